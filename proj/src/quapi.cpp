#include "spinpath/quapi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace spinpath {

namespace {

constexpr int kMaxMemorySteps = 15;
constexpr int kMaxBrutePaths = 12; // 4^12 paths

// I(S_j, S_j') for every pair of codes and every lag 0..max_lag
class FactorTable {
public:
    FactorTable(const EtaTable& eta, const SystemParams& system, double dt, int max_lag)
        : max_lag_(max_lag), values_(16 * std::size_t(max_lag + 1))
    {
        for (int lag = 0; lag <= max_lag; ++lag)
            for (unsigned a = 0; a < 4; ++a)
                for (unsigned b = 0; b < 4; ++b)
                    values_[(lag * 4 + a) * 4 + b] =
                        influence_factor(eta, PairState::from_code(a), PairState::from_code(b), lag, system, dt);
    }

    cplx operator()(unsigned newer, unsigned older, int lag) const { return values_[(lag * 4 + newer) * 4 + older]; }

private:
    int max_lag_;
    std::vector<cplx> values_;
};

unsigned code_at(PathKey key, int pos) { return unsigned(key >> (2 * pos)) & 3u; }

cplx rho_entry(const DensityMatrix& rho, unsigned code)
{
    const PairState s = PairState::from_code(code);
    return rho(s.plus, s.minus);
}

void check_budget(int memory_steps, std::uint64_t budget)
{
    if (memory_steps > kMaxMemorySteps)
        throw std::invalid_argument(fmt::format("memory_steps={} exceeds the supported maximum {}", memory_steps, kMaxMemorySteps));
    // two tables plus the precomputed propagator table are alive during a step
    const std::uint64_t need = 3 * table_bytes(memory_steps);
    if (need > budget)
        throw std::runtime_error(fmt::format(
            "i-QuAPI with memory_steps={} stores 2^{} = {} amplitudes ({} bytes each table, {} bytes total), "
            "over the memory budget of {} bytes",
            memory_steps, 2 * memory_steps, std::uint64_t{1} << (2 * memory_steps), table_bytes(memory_steps), need, budget));
}

AmplitudeTable build_window(const QuapiConfig& cfg, int window)
{
    const FactorTable f(cfg.eta, cfg.system, cfg.dt, window);
    const std::size_t size = std::size_t{1} << (2 * window);
    AmplitudeTable t;
    t.step_index = 0;
    t.memory_steps = window;
    t.values.resize(size);
#pragma omp parallel for schedule(static)
    for (std::size_t key = 0; key < size; ++key) {
        cplx v = rho_entry(cfg.rho0, code_at(key, 0));
        for (int k1 = 0; k1 < window; ++k1)
            for (int k2 = 0; k2 <= k1; ++k2)
                v *= f(code_at(key, k1), code_at(key, k2), k1 - k2);
        t.values[key] = v;
    }
    return t;
}

} // namespace

void QuapiConfig::validate() const
{
    system.validate();
    if (!(dt > 0.0))
        throw std::invalid_argument("i-QuAPI time step must be positive");
    if (memory_steps < 1)
        throw std::invalid_argument("i-QuAPI memory_steps must be at least 1");
    if (total_steps < 0)
        throw std::invalid_argument("i-QuAPI total_steps must be nonnegative");
    if (eta.max_lag < memory_steps)
        throw std::invalid_argument("eta table is shorter than the memory window");
    if (std::abs(eta.dt - dt) > 1e-14 * dt)
        throw std::invalid_argument("eta table was built for a different time step");
}

PathKey pack_path(const std::vector<PairState>& oldest_first)
{
    PathKey key = 0;
    for (std::size_t i = 0; i < oldest_first.size(); ++i)
        key |= PathKey{oldest_first[i].code()} << (2 * i);
    return key;
}

std::vector<PairState> unpack_path(PathKey key, int length)
{
    std::vector<PairState> out;
    for (int i = 0; i < length; ++i)
        out.push_back(PairState::from_code(code_at(key, i)));
    return out;
}

std::uint64_t table_bytes(int memory_steps)
{
    return (std::uint64_t{1} << (2 * memory_steps)) * sizeof(cplx);
}

cplx influence_factor(const EtaTable& eta, PairState sj, PairState sjp, int lag, const SystemParams& system, double dt)
{
    if (lag < 0)
        throw std::invalid_argument("influence factor lag must be nonnegative");
    const cplx e = eta[lag];
    const double d = value(sj.plus) - value(sj.minus);
    cplx v = std::exp(-d * (e * double(value(sjp.plus)) - std::conj(e) * double(value(sjp.minus))));
    if (lag == 1) {
        const Matrix2 fwd = short_time_propagator(system, dt, Direction::forward);
        const Matrix2 bwd = short_time_propagator(system, dt, Direction::backward);
        v *= element(fwd, sj.plus, sjp.plus) * element(bwd, sjp.minus, sj.minus);
    }
    return v;
}

AmplitudeTable init_a0(const QuapiConfig& cfg)
{
    cfg.validate();
    check_budget(cfg.memory_steps, cfg.memory_budget_bytes);
    return build_window(cfg, cfg.memory_steps);
}

AmplitudeTable quapi_step(const QuapiConfig& cfg, const AmplitudeTable& table)
{
    const int dk = cfg.memory_steps;
    const std::size_t size = std::size_t{1} << (2 * dk);
    if (table.values.size() != size)
        throw std::invalid_argument("amplitude table does not match memory_steps");
    const FactorTable f(cfg.eta, cfg.system, cfg.dt, dk);
    const int top = 2 * (dk - 1);
    const std::size_t rest_count = std::size_t{1} << top;

    AmplitudeTable out;
    out.step_index = table.step_index + 1;
    out.memory_steps = dk;
    out.values.resize(size);
#pragma omp parallel for schedule(static)
    for (std::size_t key = 0; key < size; ++key) {
        const unsigned ck = unsigned(key >> top);
        const std::size_t rest = key & (rest_count - 1);
        // lags 0..Δk-1 reach S_k and the Δk-1 states kept from the old window
        cplx partial = f(ck, ck, 0);
        for (int m = 1; m < dk; ++m)
            partial *= f(ck, code_at(rest, dk - 1 - m), m);
        cplx sum = 0.0;
        for (unsigned c0 = 0; c0 < 4; ++c0)
            sum += f(ck, c0, dk) * table.values[(rest << 2) | c0];
        out.values[key] = partial * sum;
    }
    return out;
}

DensityMatrix reduced_density(const QuapiConfig&, const AmplitudeTable& table)
{
    const int top = 2 * (table.memory_steps - 1);
    std::array<cplx, 4> acc{};
    for (std::size_t key = 0; key < table.values.size(); ++key)
        acc[key >> top] += table.values[key];
    DensityMatrix rho;
    for (unsigned c = 0; c < 4; ++c) {
        const PairState s = PairState::from_code(c);
        rho(s.plus, s.minus) = acc[c];
    }
    return rho;
}

DensityMatrix brute_force_density(const QuapiConfig& cfg, std::optional<int> max_lag)
{
    const int n = cfg.total_steps;
    if (n < 0 || n + 1 > kMaxBrutePaths)
        throw std::invalid_argument(fmt::format("brute-force path sum over {} steps is infeasible (limit {})", n, kMaxBrutePaths - 1));
    const int reach = max_lag ? std::min(*max_lag, n) : n;
    if (cfg.eta.max_lag < reach)
        throw std::invalid_argument("eta table is too short for the brute-force path sum");
    const FactorTable f(cfg.eta, cfg.system, cfg.dt, reach);

    const std::size_t paths = std::size_t{1} << (2 * (n + 1));
    std::array<cplx, 4> acc{};
    for (std::size_t key = 0; key < paths; ++key) {
        cplx v = rho_entry(cfg.rho0, code_at(key, 0));
        for (int k = 0; k <= n; ++k)
            for (int kp = std::max(0, k - reach); kp <= k; ++kp)
                v *= f(code_at(key, k), code_at(key, kp), k - kp);
        acc[code_at(key, n)] += v;
    }
    DensityMatrix rho;
    for (unsigned c = 0; c < 4; ++c) {
        const PairState s = PairState::from_code(c);
        rho(s.plus, s.minus) = acc[c];
    }
    return rho;
}

std::vector<DensityMatrix> quapi_run(const QuapiConfig& cfg)
{
    cfg.validate();
    check_budget(cfg.memory_steps, cfg.memory_budget_bytes);
    const int dk = cfg.memory_steps;
    std::vector<DensityMatrix> out;
    for (int n = 0; n <= std::min(cfg.total_steps, dk - 2); ++n) {
        const AmplitudeTable t = build_window(cfg, n + 1);
        out.push_back(reduced_density(cfg, t));
    }
    if (cfg.total_steps < dk - 1)
        return out;
    AmplitudeTable t = build_window(cfg, dk);
    out.push_back(reduced_density(cfg, t));
    for (int n = dk; n <= cfg.total_steps; ++n) {
        t = quapi_step(cfg, t);
        out.push_back(reduced_density(cfg, t));
    }
    return out;
}

} // namespace spinpath
