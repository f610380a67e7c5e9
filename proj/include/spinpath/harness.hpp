// Experiment presets, method runners, series comparison and CSV output.
#pragma once

#include "spinpath/bath.hpp"
#include "spinpath/debpi.hpp"
#include "spinpath/pathgrid.hpp"
#include "spinpath/quapi.hpp"
#include "spinpath/spinsys.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spinpath {

struct ExperimentPreset {
    std::string name;
    SystemParams system;
    OhmicSpec bath;
    double T = 1.0;
    int n = 8;
    int dmax = 2;
    double dt = 1.0 / 80.0;
    int memory_steps = 10;
    /// Output horizon in units of dt: the series covers physical times [0, steps * dt].
    int steps = 800;
    DensityMatrix rho0 = DensityMatrix::spin_up();
    bool zero_coupling = false;

    double horizon() const { return steps * dt; }
    double quapi_dt() const { return T / memory_steps; }
    DiscreteBath discrete_bath() const;
    SolverConfig debpi_config() const;
    /// i-QuAPI with step T / memory_steps, run far enough to cover the horizon.
    QuapiConfig quapi_config() const;
    void validate() const;
};

std::vector<std::string> preset_names();
ExperimentPreset preset(const std::string& name);

struct Overrides {
    std::optional<int> dmax;
    std::optional<int> grid_n;
    std::optional<double> dt;
    std::optional<int> steps;
    std::optional<DensityMatrix> rho0;
    std::optional<int> memory_steps;
    std::optional<double> memory_time;
    std::optional<double> epsilon;
    std::optional<double> delta;
    bool zero_coupling = false;
};

ExperimentPreset apply(ExperimentPreset p, const Overrides& o);

enum class Method { debpi, quapi, brute };

std::string method_name(Method m);
Method parse_method(const std::string& s);

/// "1", "-0.5", "0.3+0.2i", "2i", "1e-3-4e-2i".
cplx parse_complex(const std::string& s);
/// Four comma-separated complex entries rho(+,+), rho(+,-), rho(-,+), rho(-,-); hermitian, unit trace.
DensityMatrix parse_rho0(const std::string& s);

struct SeriesRow {
    double t = 0.0;
    double sigma_z_re = 0.0;
    double sigma_z_im = 0.0;
    double trace_re = 0.0;
};

struct TimeSeries {
    std::string method;
    std::vector<SeriesRow> rows;

    void push(double t, const DensityMatrix& rho);
};

TimeSeries run(const ExperimentPreset& p, Method method);

struct CompareReport {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    std::size_t points = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
};

/// |Re sigma_z| differences over the common time range, sampled at the finer series' times,
/// with the coarser series linearly interpolated.
CompareReport compare(const TimeSeries& a, const TimeSeries& b);
std::string to_json(const CompareReport& r);

MemoryReport memory_report(const ExperimentPreset& p);

/// Flat "key = value" lines; '#' starts a comment. Keys are long flag names without dashes.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& is);
/// Config entries as command-line tokens: "--key value", or "--key" for a true flag.
std::vector<std::string> config_to_args(const std::vector<std::pair<std::string, std::string>>& entries,
                                        const std::vector<std::string>& flags);

void write_csv(std::ostream& os, const TimeSeries& s);
TimeSeries read_csv(std::istream& is);

} // namespace spinpath
