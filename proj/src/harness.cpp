#include "spinpath/harness.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace spinpath {

namespace {

constexpr double kTimeTol = 1e-9;

ExperimentPreset base(std::string name, double xi, double delta, double epsilon, double omega_c, double beta, double T, int n, int dmax)
{
    ExperimentPreset p;
    p.name = std::move(name);
    p.system = {epsilon, delta};
    p.bath = {xi, omega_c, beta, 4.0 * omega_c, 200};
    p.T = T;
    p.n = n;
    p.dmax = dmax;
    return p;
}

int window_steps(const ExperimentPreset& p)
{
    const double r = p.T / p.dt;
    const long k = std::lround(r);
    if (std::abs(r - double(k)) > kTimeTol * std::max(1.0, r))
        throw std::invalid_argument(fmt::format("memory time T = {} is not a multiple of dt = {}", p.T, p.dt));
    return int(k);
}

double parse_double(std::string_view s, const std::string& what)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument(fmt::format("cannot parse '{}' in {}", std::string(s), what));
    return v;
}

std::string_view strip_plus(std::string_view s)
{
    // from_chars rejects a leading '+'
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    return s;
}

double interpolate(const std::vector<SeriesRow>& rows, double t)
{
    auto it = std::lower_bound(rows.begin(), rows.end(), t, [](const SeriesRow& r, double x) { return r.t < x; });
    if (it == rows.end())
        return rows.back().sigma_z_re;
    if (it->t == t || it == rows.begin())
        return it->sigma_z_re;
    const SeriesRow& hi = *it;
    const SeriesRow& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return (1.0 - w) * lo.sigma_z_re + w * hi.sigma_z_re;
}

} // namespace

DiscreteBath ExperimentPreset::discrete_bath() const
{
    const DiscreteBath b = discretize(bath);
    return zero_coupling ? b.uncoupled() : b;
}

SolverConfig ExperimentPreset::debpi_config() const
{
    SolverConfig c;
    c.T = T;
    c.n = n;
    c.dmax = dmax;
    c.dt = dt;
    c.system = system;
    c.bath = discrete_bath();
    c.beta = bath.beta;
    c.rho0 = rho0;
    return c;
}

QuapiConfig ExperimentPreset::quapi_config() const
{
    QuapiConfig q;
    q.dt = quapi_dt();
    q.memory_steps = memory_steps;
    q.total_steps = int(std::ceil(horizon() / q.dt - kTimeTol));
    q.system = system;
    q.eta = build_eta_table(discrete_bath(), bath.beta, q.dt, memory_steps);
    q.rho0 = rho0;
    return q;
}

void ExperimentPreset::validate() const
{
    system.validate();
    bath.validate();
    if (!(T > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("memory time and time step must be positive");
    if (n < 1 || dmax < 0 || memory_steps < 1 || steps < 0)
        throw std::invalid_argument("preset needs N >= 1, D_max >= 0, memory steps >= 1 and output steps >= 0");
}

std::vector<std::string> preset_names()
{
    return {"coupling-xi02", "coupling-xi04", "bias-eps0", "bias-eps05", "bias-eps1", "temp-beta02", "temp-beta1", "temp-beta5"};
}

ExperimentPreset preset(const std::string& name)
{
    // coupling: Delta = 1, omega_c = 2.5 Delta, beta = 5 / Delta
    if (name == "coupling-xi02")
        return base(name, 0.2, 1.0, 0.0, 2.5, 5.0, 1.5, 8, 8);
    if (name == "coupling-xi04")
        return base(name, 0.4, 1.0, 0.0, 2.5, 5.0, 1.5, 8, 8);
    // bias: Delta = 0.2, omega_c = 5 Delta, beta = 5 / Delta
    if (name == "bias-eps0")
        return base(name, 0.2, 0.2, 0.0, 1.0, 25.0, 4.0, 10, 5);
    if (name == "bias-eps05")
        return base(name, 0.2, 0.2, 0.1, 1.0, 25.0, 4.0, 10, 5);
    if (name == "bias-eps1")
        return base(name, 0.2, 0.2, 0.2, 1.0, 25.0, 4.0, 10, 5);
    // temperature: Delta = 0.1, omega_c = 2.5 Delta
    if (name == "temp-beta02")
        return base(name, 0.2, 0.1, 0.0, 0.25, 2.0, 4.0, 15, 3);
    if (name == "temp-beta1")
        return base(name, 0.2, 0.1, 0.0, 0.25, 10.0, 4.0, 15, 3);
    if (name == "temp-beta5")
        return base(name, 0.2, 0.1, 0.0, 0.25, 50.0, 4.0, 15, 3);
    std::string known;
    for (const std::string& s : preset_names())
        known += (known.empty() ? "" : ", ") + s;
    throw std::invalid_argument(fmt::format("unknown preset '{}' (known: {})", name, known));
}

ExperimentPreset apply(ExperimentPreset p, const Overrides& o)
{
    if (o.dmax)
        p.dmax = *o.dmax;
    if (o.grid_n)
        p.n = *o.grid_n;
    if (o.dt)
        p.dt = *o.dt;
    if (o.steps)
        p.steps = *o.steps;
    if (o.rho0)
        p.rho0 = *o.rho0;
    if (o.memory_steps)
        p.memory_steps = *o.memory_steps;
    if (o.memory_time)
        p.T = *o.memory_time;
    if (o.epsilon)
        p.system.epsilon = *o.epsilon;
    if (o.delta)
        p.system.delta = *o.delta;
    p.zero_coupling = p.zero_coupling || o.zero_coupling;
    p.validate();
    return p;
}

std::string method_name(Method m)
{
    switch (m) {
    case Method::debpi:
        return "debpi";
    case Method::quapi:
        return "quapi";
    case Method::brute:
        return "brute";
    }
    return "unknown";
}

Method parse_method(const std::string& s)
{
    for (Method m : {Method::debpi, Method::quapi, Method::brute})
        if (s == method_name(m))
            return m;
    throw std::invalid_argument(fmt::format("unknown method '{}' (debpi, quapi, brute)", s));
}

cplx parse_complex(const std::string& text)
{
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c)))
            s += c;
    if (s.empty())
        throw std::invalid_argument("empty complex number");
    if (s.back() != 'i' && s.back() != 'j')
        return parse_double(strip_plus(s), "complex number");
    const std::string_view body(s.data(), s.size() - 1);
    std::size_t split = std::string_view::npos;
    for (std::size_t k = body.size(); k-- > 1;)
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    auto imag_part = [&](std::string_view v) {
        if (v.empty() || v == "+")
            return 1.0;
        if (v == "-")
            return -1.0;
        return parse_double(strip_plus(v), "complex number");
    };
    if (split == std::string_view::npos)
        return {0.0, imag_part(body)};
    return {parse_double(strip_plus(body.substr(0, split)), "complex number"), imag_part(body.substr(split))};
}

DensityMatrix parse_rho0(const std::string& s)
{
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        parts.push_back(item);
    if (parts.size() != 4)
        throw std::invalid_argument("rho0 needs four comma-separated entries: (+,+),(+,-),(-,+),(-,-)");
    DensityMatrix r;
    r(Spin::up, Spin::up) = parse_complex(parts[0]);
    r(Spin::up, Spin::down) = parse_complex(parts[1]);
    r(Spin::down, Spin::up) = parse_complex(parts[2]);
    r(Spin::down, Spin::down) = parse_complex(parts[3]);
    constexpr double tol = 1e-12;
    if (std::abs(r(Spin::up, Spin::up).imag()) > tol || std::abs(r(Spin::down, Spin::down).imag()) > tol ||
        std::abs(r(Spin::up, Spin::down) - std::conj(r(Spin::down, Spin::up))) > tol)
        throw std::invalid_argument("rho0 must be hermitian");
    if (std::abs(r.trace() - 1.0) > tol)
        throw std::invalid_argument("rho0 must have unit trace");
    return r;
}

void TimeSeries::push(double t, const DensityMatrix& rho)
{
    if (!rows.empty() && !(t > rows.back().t))
        throw std::logic_error("time series times must increase strictly");
    const cplx sz = rho.sigma_z();
    rows.push_back({t, sz.real(), sz.imag(), rho.trace().real()});
}

TimeSeries run(const ExperimentPreset& p, Method method)
{
    p.validate();
    TimeSeries out;
    out.method = method_name(method);
    const double horizon = p.horizon();
    switch (method) {
    case Method::debpi: {
        const int solver_steps = std::max(0, p.steps - window_steps(p));
        for (const auto& [t, rho] : debpi_run(p.debpi_config(), solver_steps))
            if (t <= horizon + kTimeTol)
                out.push(t, rho);
        break;
    }
    case Method::quapi: {
        const QuapiConfig q = p.quapi_config();
        const std::vector<DensityMatrix> rhos = quapi_run(q);
        for (std::size_t k = 0; k < rhos.size(); ++k)
            out.push(double(k) * p.T / p.memory_steps, rhos[k]);
        break;
    }
    case Method::brute: {
        QuapiConfig q = p.quapi_config();
        const int total = q.total_steps;
        for (int k = 0; k <= total; ++k) {
            q.total_steps = k;
            out.push(double(k) * p.T / p.memory_steps, brute_force_density(q, p.memory_steps));
        }
        break;
    }
    }
    return out;
}

CompareReport compare(const TimeSeries& a, const TimeSeries& b)
{
    if (a.rows.empty() || b.rows.empty())
        throw std::invalid_argument("cannot compare an empty series");
    CompareReport r;
    r.t_begin = std::max(a.rows.front().t, b.rows.front().t);
    r.t_end = std::min(a.rows.back().t, b.rows.back().t);
    if (r.t_begin > r.t_end)
        throw std::invalid_argument(fmt::format("series cover disjoint time ranges [{}, {}] and [{}, {}]", a.rows.front().t,
                                                a.rows.back().t, b.rows.front().t, b.rows.back().t));
    auto inside = [&](const TimeSeries& s) {
        return std::count_if(s.rows.begin(), s.rows.end(), [&](const SeriesRow& x) { return x.t >= r.t_begin && x.t <= r.t_end; });
    };
    const bool a_finer = inside(a) >= inside(b);
    const TimeSeries& fine = a_finer ? a : b;
    const TimeSeries& coarse = a_finer ? b : a;
    double sum = 0.0;
    for (const SeriesRow& x : fine.rows) {
        if (x.t < r.t_begin || x.t > r.t_end)
            continue;
        const double d = std::abs(x.sigma_z_re - interpolate(coarse.rows, x.t));
        r.max_abs = std::max(r.max_abs, d);
        sum += d;
        ++r.points;
    }
    r.mean_abs = sum / double(r.points);
    return r;
}

std::string to_json(const CompareReport& r)
{
    nlohmann::ordered_json j;
    j["max_abs_diff"] = r.max_abs;
    j["mean_abs_diff"] = r.mean_abs;
    j["points"] = r.points;
    j["t_begin"] = r.t_begin;
    j["t_end"] = r.t_end;
    return j.dump();
}

MemoryReport memory_report(const ExperimentPreset& p)
{
    return memory_report(p.n, p.dmax, p.memory_steps);
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& is)
{
    auto trim = [](std::string v) {
        const auto b = v.find_first_not_of(" \t\r");
        const auto e = v.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(fmt::format("config line {}: expected key = value", lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || key.front() == '-')
            throw std::invalid_argument(fmt::format("config line {}: bad key '{}'", lineno, key));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        out.emplace_back(std::move(key), std::move(val));
    }
    return out;
}

std::vector<std::string> config_to_args(const std::vector<std::pair<std::string, std::string>>& entries,
                                        const std::vector<std::string>& flags)
{
    std::vector<std::string> args;
    for (const auto& [key, val] : entries) {
        if (std::find(flags.begin(), flags.end(), key) != flags.end()) {
            if (val == "true" || val == "1")
                args.push_back("--" + key);
            else if (val != "false" && val != "0")
                throw std::invalid_argument(fmt::format("config key '{}' takes true or false", key));
            continue;
        }
        args.push_back("--" + key);
        args.push_back(val);
    }
    return args;
}

void write_csv(std::ostream& os, const TimeSeries& s)
{
    os << "t,sigma_z_re,sigma_z_im,trace_re,method\n";
    for (const SeriesRow& r : s.rows)
        os << fmt::format("{},{},{},{},{}\n", r.t, r.sigma_z_re, r.sigma_z_im, r.trace_re, s.method);
}

TimeSeries read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "t,sigma_z_re,sigma_z_im,trace_re,method")
        throw std::invalid_argument("missing CSV header t,sigma_z_re,sigma_z_im,trace_re,method");
    TimeSeries s;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
            f.push_back(item);
        if (f.size() != 5)
            throw std::invalid_argument(fmt::format("CSV line {} has {} fields, expected 5", lineno, f.size()));
        const std::string where = fmt::format("CSV line {}", lineno);
        SeriesRow r{parse_double(f[0], where), parse_double(f[1], where), parse_double(f[2], where), parse_double(f[3], where)};
        if (s.rows.empty())
            s.method = f[4];
        if (!s.rows.empty() && !(r.t > s.rows.back().t))
            throw std::invalid_argument(fmt::format("CSV line {}: times must increase strictly", lineno));
        s.rows.push_back(r);
    }
    return s;
}

} // namespace spinpath
