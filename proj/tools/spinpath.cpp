// spinpath: run presets with DEBPI / i-QuAPI / brute force, compare series, report memory.
#include "spinpath/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iostream>

using namespace spinpath;

namespace {

struct RunOptions {
    std::string preset;
    std::string method = "debpi";
    std::string rho0;
    std::string out;
    int workers = 0;
    Overrides o;
};

template <class T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help)
{
    app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void add_preset_options(CLI::App* app, RunOptions& r)
{
    app->add_option("--preset", r.preset, "experiment preset")->required();
    optional_flag(app, "--dmax", r.o.dmax, "maximum flip count D_max");
    optional_flag(app, "--grid-n", r.o.grid_n, "grid intervals N per memory window");
    optional_flag(app, "--memory-steps", r.o.memory_steps, "i-QuAPI memory steps (Delta_k)");
    optional_flag(app, "--memory-time", r.o.memory_time, "memory time T");
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error(fmt::format("cannot open '{}' for writing", path));
    return f;
}

// argv with "--config FILE" replaced by the file's entries, placed right after the subcommand
std::vector<std::string> expand_config(int argc, char** argv)
{
    std::vector<std::string> in(argv + 1, argv + argc), file_args, rest;
    std::string path;
    for (std::size_t k = 0; k < in.size(); ++k) {
        if (in[k] == "--config" && k + 1 < in.size()) {
            path = in[++k];
        } else if (in[k].rfind("--config=", 0) == 0) {
            path = in[k].substr(9);
        } else {
            rest.push_back(in[k]);
        }
    }
    if (path.empty() || rest.empty())
        return rest;
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error(fmt::format("cannot open config '{}'", path));
    file_args = config_to_args(parse_config(f), {"zero-coupling"});
    std::vector<std::string> out{rest.front()};
    out.insert(out.end(), file_args.begin(), file_args.end());
    out.insert(out.end(), rest.begin() + 1, rest.end());
    return out;
}

TimeSeries load(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error(fmt::format("cannot open '{}'", path));
    return read_csv(f);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spin-boson reduced dynamics with DEBPI and i-QuAPI"};
    app.require_subcommand(1);
    // repeated options keep the last value, so flags placed after config entries win
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // --config is expanded before parsing; the options exist for --help
    std::string config_path;
    RunOptions r;
    CLI::App* run_cmd = app.add_subcommand("run", "run a preset and write a CSV time series");
    run_cmd->add_option("--config", config_path, "file of key = value lines; command-line flags win");
    add_preset_options(run_cmd, r);
    run_cmd->add_option("--method", r.method, "debpi, quapi or brute")->check(CLI::IsMember({"debpi", "quapi", "brute"}));
    optional_flag(run_cmd, "--dt", r.o.dt, "DEBPI time step");
    optional_flag(run_cmd, "--steps", r.o.steps, "output horizon in DEBPI time steps");
    optional_flag(run_cmd, "--epsilon", r.o.epsilon, "bias epsilon");
    optional_flag(run_cmd, "--delta", r.o.delta, "tunnelling Delta");
    run_cmd->add_option("--rho0", r.rho0, "initial density: rho(+,+),rho(+,-),rho(-,+),rho(-,-), e.g. 0.5,0.5i,-0.5i,0.5");
    run_cmd->add_flag("--zero-coupling", r.o.zero_coupling, "set every bath coupling to zero");
    run_cmd->add_option("--out", r.out, "CSV path (default: stdout)");
    run_cmd->add_option("--workers", r.workers, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);

    std::string file_a, file_b;
    CLI::App* cmp_cmd = app.add_subcommand("compare", "compare Re sigma_z of two CSV series");
    cmp_cmd->add_option("a", file_a, "first CSV")->required();
    cmp_cmd->add_option("b", file_b, "second CSV")->required();

    RunOptions m;
    CLI::App* mem_cmd = app.add_subcommand("memory", "degrees of freedom of DEBPI and i-QuAPI for a preset");
    mem_cmd->add_option("--config", config_path, "file of key = value lines; command-line flags win");
    add_preset_options(mem_cmd, m);

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run_cmd->parsed()) {
            if (r.workers > 0)
                omp_set_num_threads(r.workers);
            if (!r.rho0.empty())
                r.o.rho0 = parse_rho0(r.rho0);
            const ExperimentPreset p = apply(preset(r.preset), r.o);
            const TimeSeries s = run(p, parse_method(r.method));
            if (r.out.empty()) {
                write_csv(std::cout, s);
            } else {
                std::ofstream f = open_out(r.out);
                write_csv(f, s);
            }
        } else if (cmp_cmd->parsed()) {
            std::cout << to_json(compare(load(file_a), load(file_b))) << '\n';
        } else if (mem_cmd->parsed()) {
            std::cout << memory_report(apply(preset(m.preset), m.o)).to_json() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
