#include <doctest.h>

#include "spinpath/bath.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

using namespace spinpath;

namespace {

DiscreteBath single(double w, double c) { return {{w}, {c}}; }

OhmicSpec temp_beta5() { return {0.2, 0.25, 50.0, 1.0, 200}; }
OhmicSpec coupling_xi02() { return {0.2, 2.5, 5.0, 10.0, 200}; }

// textbook form of the lag-m coefficient
cplx eta_verbatim(const DiscreteBath& b, double beta, double dt, int m)
{
    cplx sum = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double w = b.frequencies[j], c = b.couplings[j];
        const double s = std::sin(w * dt / 2.0);
        const double coth = std::cosh(beta * w / 2.0) / std::sinh(beta * w / 2.0);
        sum += 2.0 * c * c / (w * w * w) * s * s * cplx(coth * std::cos(w * m * dt), -std::sin(w * m * dt));
    }
    return sum;
}

cplx simpson(const std::function<cplx(double)>& f, double a, double b, int n)
{
    const double h = (b - a) / n;
    cplx s = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

// composite trapezoid over the triangle 0 <= x2 <= x1 <= dt, n x n cells
cplx triangle_trapezoid(const ResponseKernel& k, double dt, int n)
{
    const double h = dt / n;
    cplx outer = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x1 = i * h;
        cplx inner = 0.0;
        if (i > 0) {
            const double g = x1 / n;
            for (int q = 0; q <= n; ++q)
                inner += (q == 0 || q == n ? 0.5 : 1.0) * k.eta_tilde(x1 - q * g);
            inner *= g;
        }
        outer += (i == 0 || i == n ? 0.5 : 1.0) * inner;
    }
    return outer * h;
}

} // namespace

TEST_CASE("discretize: endpoint frequency and single oscillator")
{
    OhmicSpec s{0.3, 1.0, 1.0, 4.0, 1};
    const DiscreteBath b = discretize(s);
    REQUIRE(b.size() == 1);
    CHECK(b.frequencies[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(b.couplings[0] == doctest::Approx(4.0 * std::sqrt(0.3 * (1.0 - std::exp(-4.0)))).epsilon(1e-14));

    const DiscreteBath full = discretize(coupling_xi02());
    CHECK(full.frequencies.back() == doctest::Approx(10.0).epsilon(1e-13));
}

TEST_CASE("discretize: full arrays against the closed-form formulas")
{
    const OhmicSpec s = coupling_xi02();
    const DiscreteBath b = discretize(s);
    REQUIRE(b.size() == 200);
    const double tail = 1.0 - std::exp(-s.omega_max / s.omega_c);
    for (int j = 1; j <= 200; ++j) {
        const double w = -s.omega_c * std::log(1.0 - (j / 200.0) * tail);
        const double c = w * std::sqrt(s.xi * s.omega_c / 200.0 * tail);
        CHECK(std::abs(b.frequencies[j - 1] - w) < 1e-12 * w);
        CHECK(std::abs(b.couplings[j - 1] - c) < 1e-12 * c);
        if (j > 1)
            CHECK(b.frequencies[j - 1] > b.frequencies[j - 2]);
    }
    CHECK(b.frequencies[0] > 0.0);
}

TEST_CASE("discretize rejects invalid specs")
{
    CHECK_THROWS(discretize({0.2, 1.0, 1.0, 4.0, 0}));
    CHECK_THROWS(discretize({-0.2, 1.0, 1.0, 4.0, 10}));
    CHECK_THROWS(discretize({0.2, 0.0, 1.0, 4.0, 10}));
    CHECK_THROWS(discretize({0.2, 1.0, 0.0, 4.0, 10}));
    CHECK_THROWS(discretize({0.2, 1.0, 1.0, -4.0, 10}));
}

TEST_CASE("eta_tilde: parity and single-oscillator value")
{
    const DiscreteBath b = discretize(coupling_xi02());
    CHECK(eta_tilde(b, 5.0, 0.0).imag() == 0.0);
    for (double tau : {0.1, 0.7, 3.2}) {
        const cplx p = eta_tilde(b, 5.0, tau), m = eta_tilde(b, 5.0, -tau);
        CHECK(p.real() == doctest::Approx(m.real()).epsilon(1e-14));
        CHECK(p.imag() == doctest::Approx(-m.imag()).epsilon(1e-14));
    }
    const cplx v = eta_tilde(single(2.0, 1.0), 1.0, 0.5);
    const double coth1 = std::cosh(1.0) / std::sinh(1.0);
    CHECK(std::abs(v - 0.25 * cplx(coth1 * std::cos(1.0), -std::sin(1.0))) < 1e-15);
}

TEST_CASE("antiderivatives agree with Simpson quadrature of eta_tilde")
{
    const ResponseKernel k(discretize(coupling_xi02()), 5.0);
    for (double u : {-0.8, 0.003, 0.4, 1.5}) {
        const cplx f = simpson([&](double s) { return k.eta_tilde(s); }, 0.0, u, 2000);
        const cplx g = simpson([&](double s) { return (u - s) * k.eta_tilde(s); }, 0.0, u, 2000);
        CHECK(std::abs(k.first_integral(u) - f) < 1e-9);
        CHECK(std::abs(k.second_integral(u) - g) < 1e-9);
    }
    CHECK(k.second_integral(0.0) == cplx(0.0));
}

TEST_CASE("rectangle integral agrees with nested quadrature, including overlapping ranges")
{
    const ResponseKernel k(discretize(coupling_xi02()), 5.0);
    const double a1 = 0.2, b1 = 0.9, a2 = 0.5, b2 = 1.3;
    const cplx q = simpson([&](double x1) { return simpson([&](double x2) { return k.eta_tilde(x1 - x2); }, a2, b2, 400); },
                           a1, b1, 400);
    CHECK(std::abs(k.rectangle(a1, b1, a2, b2) - q) < 1e-8);
}

TEST_CASE("eta coefficient equals the textbook closed form")
{
    for (const OhmicSpec& s : {temp_beta5(), coupling_xi02()}) {
        const DiscreteBath b = discretize(s);
        for (int m : {1, 3, 7}) {
            const cplx got = eta_coefficient(b, s.beta, 0.1, m);
            const cplx want = eta_verbatim(b, s.beta, 0.1, m);
            CHECK(std::abs(got - want) < 1e-12 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("eta coefficient is stationary in the index pair")
{
    const DiscreteBath b = discretize(coupling_xi02());
    const ResponseKernel k(b, 5.0);
    const double dt = 0.05;
    for (int j = 1; j < 6; ++j)
        for (int jp = 0; jp < j; ++jp) {
            const cplx cell = k.rectangle(j * dt, (j + 1) * dt, jp * dt, (jp + 1) * dt);
            CHECK(std::abs(cell - eta_coefficient(b, 5.0, dt, j - jp)) < 1e-13);
        }
}

TEST_CASE("lag-0 coefficient equals triangle quadrature")
{
    for (const OhmicSpec& s : {temp_beta5(), coupling_xi02()}) {
        const DiscreteBath b = discretize(s);
        const ResponseKernel k(b, s.beta);
        const double dt = 0.1;
        const cplx q = triangle_trapezoid(k, dt, 100);
        CHECK(std::abs(eta_coefficient(b, s.beta, dt, 0) - q) < 1e-6);
    }
}

TEST_CASE("eta(m)/dt^2 converges to eta_tilde(m dt) at least at first order")
{
    const OhmicSpec s = coupling_xi02();
    const DiscreteBath b = discretize(s);
    const double tau = 0.4;
    const cplx exact = eta_tilde(b, s.beta, tau);
    double errs[3];
    int i = 0;
    for (double dt : {0.1, 0.05, 0.025}) {
        const int m = int(std::lround(tau / dt));
        errs[i++] = std::abs(eta_coefficient(b, s.beta, dt, m) / (dt * dt) - exact);
    }
    const double o1 = std::log2(errs[0] / errs[1]), o2 = std::log2(errs[1] / errs[2]);
    std::printf("eta convergence: errors %.3e %.3e %.3e, observed orders %.3f %.3f\n", errs[0], errs[1], errs[2], o1, o2);
    CHECK(o1 > 0.9);
    CHECK(o2 > 0.9);
}

TEST_CASE("eta table is transparent memoization")
{
    const OhmicSpec s = temp_beta5();
    const DiscreteBath b = discretize(s);
    const EtaTable t0 = build_eta_table(b, s.beta, 0.4, 0);
    REQUIRE(t0.coefficients.size() == 1);
    CHECK(t0[0] == eta_coefficient(b, s.beta, 0.4, 0));

    const EtaTable t = build_eta_table(b, s.beta, 0.4, 10);
    REQUIRE(t.coefficients.size() == 11);
    for (int m = 0; m <= 10; ++m) {
        CHECK(t[m] == eta_coefficient(b, s.beta, 0.4, m));
        CHECK(std::isfinite(std::abs(t[m])));
        std::printf("temp-beta5 eta(%d) = %.6e %+.6ei\n", m, t[m].real(), t[m].imag());
    }
    CHECK(std::abs(t[10]) < std::abs(t[1]));
}

TEST_CASE("eta coefficient rejects bad arguments")
{
    const DiscreteBath b = single(1.0, 1.0);
    CHECK_THROWS(eta_coefficient(b, 1.0, 0.1, -1));
    CHECK_THROWS(eta_coefficient(b, 1.0, 0.0, 1));
    CHECK_THROWS(build_eta_table(b, 1.0, 0.1, -1));
}

TEST_CASE("uncoupled bath has zero response")
{
    const DiscreteBath b = discretize(temp_beta5()).uncoupled();
    CHECK(eta_tilde(b, 50.0, 1.3) == cplx(0.0));
    CHECK(eta_coefficient(b, 50.0, 0.4, 2) == cplx(0.0));
}
