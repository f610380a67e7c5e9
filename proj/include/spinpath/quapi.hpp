// Iterative QuAPI propagation and a brute-force path-sum oracle.
//
// A table holds one amplitude per window of memory_steps consecutive pair states.
// Keys pack 2 bits per PairState (PairState::code), oldest state in the lowest bits.
#pragma once

#include "spinpath/bath.hpp"
#include "spinpath/spinsys.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spinpath {

struct QuapiConfig {
    double dt = 0.1;
    int memory_steps = 1;  ///< window length Δk
    int total_steps = 1;
    SystemParams system;
    EtaTable eta;          ///< needs max_lag >= memory_steps and eta.dt == dt
    DensityMatrix rho0 = DensityMatrix::spin_up();
    std::uint64_t memory_budget_bytes = std::uint64_t{4} << 30;

    void validate() const;
};

using PathKey = std::uint64_t;

PathKey pack_path(const std::vector<PairState>& oldest_first);
std::vector<PairState> unpack_path(PathKey key, int length);

struct AmplitudeTable {
    int step_index = 0;    ///< l: the newest state of the window is S_{l + Δk - 1}
    int memory_steps = 0;
    std::vector<cplx> values;
};

/// Bytes held by one amplitude table with window length memory_steps.
std::uint64_t table_bytes(int memory_steps);

cplx influence_factor(const EtaTable& eta, PairState sj, PairState sjp, int lag, const SystemParams& system, double dt);

AmplitudeTable init_a0(const QuapiConfig& cfg);
AmplitudeTable quapi_step(const QuapiConfig& cfg, const AmplitudeTable& table);
DensityMatrix reduced_density(const QuapiConfig& cfg, const AmplitudeTable& table);

/// Full path sum over S_0..S_N with N = cfg.total_steps. Pairs further apart than max_lag
/// are dropped from the influence functional when max_lag is given.
DensityMatrix brute_force_density(const QuapiConfig& cfg, std::optional<int> max_lag = std::nullopt);

/// Reduced density matrices at t = n dt for n = 0..total_steps. Times before the first full
/// window are evaluated with a shorter window, which is exact there.
std::vector<DensityMatrix> quapi_run(const QuapiConfig& cfg);

} // namespace spinpath
