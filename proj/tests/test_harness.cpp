#include <doctest.h>

#include "spinpath/harness.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

using namespace spinpath;

namespace {

std::string csv_of(const TimeSeries& s)
{
    std::ostringstream os;
    write_csv(os, s);
    return os.str();
}

TimeSeries linear_series(double t0, double t1, int rows, double slope)
{
    TimeSeries s;
    s.method = "test";
    for (int k = 0; k < rows; ++k) {
        const double t = t0 + (t1 - t0) * k / (rows - 1);
        s.rows.push_back({t, 0.25 + slope * t, 0.0, 1.0});
    }
    return s;
}

} // namespace

TEST_CASE("preset parameter sets")
{
    const ExperimentPreset b = preset("bias-eps0");
    CHECK(b.system.delta == 0.2);
    CHECK(b.system.epsilon == 0.0);
    CHECK(b.bath.omega_c == 1.0);
    CHECK(b.bath.beta == 25.0);
    CHECK(b.T == 4.0);
    CHECK(b.n == 10);
    CHECK(b.dmax == 5);
    CHECK(b.memory_steps == 10);
    CHECK(preset("bias-eps05").system.epsilon == doctest::Approx(0.1));
    CHECK(preset("bias-eps1").system.epsilon == doctest::Approx(0.2));

    const ExperimentPreset t = preset("temp-beta5");
    CHECK(t.system.delta == 0.1);
    CHECK(t.bath.omega_c == 0.25);
    CHECK(t.bath.beta == 50.0);
    CHECK(t.T == 4.0);
    CHECK(t.n == 15);
    CHECK(t.dmax == 3);
    CHECK(preset("temp-beta02").bath.beta == doctest::Approx(2.0));
    CHECK(preset("temp-beta1").bath.beta == doctest::Approx(10.0));

    const ExperimentPreset c = preset("coupling-xi02");
    CHECK(c.system.delta == 1.0);
    CHECK(c.bath.omega_c == 2.5);
    CHECK(c.bath.beta == 5.0);
    CHECK(c.bath.xi == 0.2);
    CHECK(c.T == 1.5);
    CHECK(c.n == 8);
    CHECK(c.dmax == 8);
    CHECK(preset("coupling-xi04").bath.xi == 0.4);

    for (const std::string& name : preset_names()) {
        const ExperimentPreset p = preset(name);
        CHECK(p.name == name);
        CHECK(p.bath.count == 200);
        CHECK(p.bath.omega_max == doctest::Approx(4.0 * p.bath.omega_c));
        CHECK(p.dt == 1.0 / 80.0);
        CHECK(p.steps == 800);
        CHECK(p.horizon() == doctest::Approx(10.0));
        CHECK(p.quapi_dt() == doctest::Approx(p.T / 10.0));
        CHECK_NOTHROW(p.validate());
        CHECK_NOTHROW(p.debpi_config().validate());
    }
    CHECK_THROWS_AS(preset("bias-eps2"), std::invalid_argument);
}

TEST_CASE("memory report per preset")
{
    const MemoryReport b = memory_report(preset("bias-eps0"));
    CHECK(b.debpi_dof == 458748);
    CHECK(b.quapi_dof == 1048576);
    CHECK(b.ratio == doctest::Approx(1048576.0 / 458748.0));
    const MemoryReport t = memory_report(preset("temp-beta5"));
    CHECK(t.debpi_dof == 28420);
    CHECK(t.ratio == doctest::Approx(1048576.0 / 28420.0));
    const MemoryReport c = memory_report(preset("coupling-xi02"));
    CHECK(c.debpi_dof == 17444860);
    CHECK(c.ratio < 1.0);
}

TEST_CASE("overrides")
{
    Overrides o;
    o.dmax = 3;
    o.grid_n = 12;
    o.dt = 0.01;
    o.steps = 20;
    o.memory_steps = 6;
    o.memory_time = 1.2;
    o.epsilon = 0.05;
    o.delta = 0.3;
    o.zero_coupling = true;
    const ExperimentPreset p = apply(preset("bias-eps0"), o);
    CHECK(p.dmax == 3);
    CHECK(p.n == 12);
    CHECK(p.dt == 0.01);
    CHECK(p.steps == 20);
    CHECK(p.memory_steps == 6);
    CHECK(p.T == 1.2);
    CHECK(p.system.epsilon == 0.05);
    CHECK(p.system.delta == 0.3);
    for (double c : p.discrete_bath().couplings)
        CHECK(c == 0.0);

    Overrides bad;
    bad.grid_n = 0;
    CHECK_THROWS(apply(preset("bias-eps0"), bad));
    bad = {};
    bad.delta = -1.0;
    CHECK_THROWS(apply(preset("bias-eps0"), bad));
    bad = {};
    bad.dt = 0.5; // coarser than h_s = 0.4
    CHECK_THROWS(run(apply(preset("bias-eps0"), bad), Method::debpi));
}

TEST_CASE("complex and density parsing")
{
    CHECK(parse_complex("1") == cplx(1.0, 0.0));
    CHECK(parse_complex("-0.5") == cplx(-0.5, 0.0));
    CHECK(parse_complex("+2") == cplx(2.0, 0.0));
    CHECK(parse_complex("0.3+0.2i") == cplx(0.3, 0.2));
    CHECK(parse_complex(" 0.3 - 0.2i ") == cplx(0.3, -0.2));
    CHECK(parse_complex("2i") == cplx(0.0, 2.0));
    CHECK(parse_complex("-i") == cplx(0.0, -1.0));
    CHECK(parse_complex("1e-3-4e-2i") == cplx(1e-3, -4e-2));
    CHECK(parse_complex("1e+2+3E-1j") == cplx(100.0, 0.3));
    CHECK_THROWS(parse_complex(""));
    CHECK_THROWS(parse_complex("abc"));
    CHECK_THROWS(parse_complex("1,5"));

    const DensityMatrix r = parse_rho0("0.5,0.5i,-0.5i,0.5");
    CHECK(r(Spin::up, Spin::down) == cplx(0.0, 0.5));
    CHECK(r(Spin::down, Spin::up) == cplx(0.0, -0.5));
    CHECK_THROWS(parse_rho0("1,0,0"));
    CHECK_THROWS(parse_rho0("0.5,0.5i,0.5i,0.5"));
    CHECK_THROWS(parse_rho0("0.6,0,0,0.6"));
}

TEST_CASE("step 0 carries the initial state")
{
    for (const std::string& name : preset_names()) {
        Overrides o;
        o.steps = 0;
        const ExperimentPreset p = apply(preset(name), o);
        const TimeSeries q = run(p, Method::quapi);
        REQUIRE(q.rows.size() == 1);
        CHECK(q.rows[0].t == 0.0);
        CHECK(q.rows[0].sigma_z_re == doctest::Approx(1.0).epsilon(1e-15));
        if (p.dmax <= 5) {
            const TimeSeries d = run(p, Method::debpi);
            REQUIRE(d.rows.size() == 1);
            CHECK(d.rows[0].sigma_z_re == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(d.method == "debpi");
        }
    }
}

TEST_CASE("zero coupling gives Rabi oscillations")
{
    Overrides o;
    o.zero_coupling = true;
    o.steps = 400;
    o.memory_time = 0.5;
    o.delta = 1.0;
    const ExperimentPreset p = apply(preset("bias-eps0"), o);
    double worst = 0.0;
    for (const SeriesRow& r : run(p, Method::quapi).rows)
        worst = std::max(worst, std::abs(r.sigma_z_re - std::cos(2.0 * r.t)));
    CHECK(worst < 5e-3);
}

TEST_CASE("i-QuAPI and brute force agree row by row on a toy window")
{
    Overrides o;
    o.memory_steps = 5;
    o.steps = 640;
    const ExperimentPreset p = apply(preset("temp-beta5"), o);
    const TimeSeries q = run(p, Method::quapi), b = run(p, Method::brute);
    REQUIRE(q.rows.size() == 11);
    REQUIRE(b.rows.size() == q.rows.size());
    for (std::size_t k = 0; k < q.rows.size(); ++k) {
        CHECK(q.rows[k].t == b.rows[k].t);
        CHECK(std::abs(q.rows[k].sigma_z_re - b.rows[k].sigma_z_re) < 1e-10);
        CHECK(std::abs(q.rows[k].sigma_z_im - b.rows[k].sigma_z_im) < 1e-10);
        CHECK(std::abs(q.rows[k].trace_re - b.rows[k].trace_re) < 1e-10);
        CHECK(std::abs(b.rows[k].trace_re - 1.0) <= 0.2);
    }
}

TEST_CASE("i-QuAPI refuses windows over the memory budget")
{
    Overrides o;
    o.memory_steps = 14;
    o.steps = 80;
    const ExperimentPreset p = apply(preset("temp-beta5"), o);
    try {
        run(p, Method::quapi);
        FAIL("expected a budget error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("2^28") != std::string::npos);
    }
}

TEST_CASE("DEBPI runs emit strictly increasing physical times and are deterministic")
{
    Overrides o;
    o.steps = 360;
    o.dmax = 3;
    const ExperimentPreset p = apply(preset("bias-eps0"), o);
    const TimeSeries a = run(p, Method::debpi), b = run(p, Method::debpi);
    REQUIRE(a.rows.size() == 10 + 41);
    CHECK(a.rows[9].t == doctest::Approx(3.6));
    CHECK(a.rows[10].t == doctest::Approx(4.0));
    CHECK(a.rows.back().t == doctest::Approx(4.5));
    for (std::size_t k = 1; k < a.rows.size(); ++k)
        CHECK(a.rows[k].t > a.rows[k - 1].t);
    for (const SeriesRow& r : a.rows)
        CHECK(std::abs(r.trace_re - 1.0) <= 0.2);
    CHECK(csv_of(a) == csv_of(b));
}

TEST_CASE("compare")
{
    const TimeSeries a = linear_series(0.0, 2.0, 21, 0.3);
    const CompareReport same = compare(a, a);
    CHECK(same.max_abs == 0.0);
    CHECK(same.mean_abs == 0.0);
    CHECK(same.points == 21);

    TimeSeries shifted = a;
    for (SeriesRow& r : shifted.rows)
        r.sigma_z_re += std::numeric_limits<double>::epsilon();
    CHECK(compare(a, shifted).max_abs <= 1e-12);

    // linear data is reproduced exactly by interpolation on the coarse series
    const TimeSeries coarse = linear_series(0.0, 2.0, 5, 0.3);
    const TimeSeries fine = linear_series(0.5, 1.5, 41, 0.3);
    const CompareReport r = compare(coarse, fine);
    CHECK(r.points == 41);
    CHECK(r.max_abs < 1e-15);
    CHECK(r.t_begin == 0.5);
    CHECK(r.t_end == 1.5);

    const TimeSeries offset = linear_series(0.0, 2.0, 21, 0.5);
    const CompareReport d = compare(a, offset);
    CHECK(d.max_abs == doctest::Approx(0.4));
    CHECK(d.mean_abs == doctest::Approx(0.2));

    CHECK_THROWS(compare(a, linear_series(3.0, 4.0, 3, 0.0)));
    CHECK(to_json(same).find("\"max_abs_diff\":0.0") != std::string::npos);
}

TEST_CASE("CSV layout and round trip")
{
    TimeSeries s;
    s.method = "quapi";
    s.rows = {{0.0, 1.0, 0.0, 1.0}, {0.1, 0.1 + 0.2, -1e-17, 0.9999999999999998}, {1.0 / 3.0, -0.25, 2.5e-300, 1.0}};
    const std::string text = csv_of(s);
    CHECK(text.rfind("t,sigma_z_re,sigma_z_im,trace_re,method\n0,1,0,1,quapi\n", 0) == 0);
    CHECK(text.find('\r') == std::string::npos);
    std::istringstream is(text);
    const TimeSeries back = read_csv(is);
    CHECK(back.method == "quapi");
    REQUIRE(back.rows.size() == 3);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(std::memcmp(&back.rows[k], &s.rows[k], sizeof(SeriesRow)) == 0);

    std::istringstream bad_header("time,x\n");
    CHECK_THROWS(read_csv(bad_header));
    std::istringstream not_increasing("t,sigma_z_re,sigma_z_im,trace_re,method\n1,0,0,1,a\n1,0,0,1,a\n");
    CHECK_THROWS(read_csv(not_increasing));

    TimeSeries t;
    t.push(0.0, DensityMatrix::spin_up());
    CHECK_THROWS(t.push(0.0, DensityMatrix::spin_up()));
}

TEST_CASE("methods parse by name")
{
    CHECK(parse_method("debpi") == Method::debpi);
    CHECK(parse_method("quapi") == Method::quapi);
    CHECK(parse_method("brute") == Method::brute);
    CHECK_THROWS(parse_method("c-quapi"));
}

TEST_CASE("config files")
{
    std::istringstream is("# preset for the bias runs\npreset = bias-eps0\n\n  grid-n=12   # finer grid\nout = \"a b.csv\"\nzero-coupling = true\n");
    const auto entries = parse_config(is);
    REQUIRE(entries.size() == 4);
    CHECK(entries[0] == std::pair<std::string, std::string>{"preset", "bias-eps0"});
    CHECK(entries[1] == std::pair<std::string, std::string>{"grid-n", "12"});
    CHECK(entries[2].second == "a b.csv");
    const std::vector<std::string> args = config_to_args(entries, {"zero-coupling"});
    CHECK(args == std::vector<std::string>{"--preset", "bias-eps0", "--grid-n", "12", "--out", "a b.csv", "--zero-coupling"});
    CHECK(config_to_args({{"zero-coupling", "false"}}, {"zero-coupling"}).empty());
    CHECK_THROWS(config_to_args({{"zero-coupling", "maybe"}}, {"zero-coupling"}));

    std::istringstream missing_eq("preset bias-eps0\n");
    CHECK_THROWS(parse_config(missing_eq));
    std::istringstream dashed("--preset = x\n");
    CHECK_THROWS(parse_config(dashed));
}
