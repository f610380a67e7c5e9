#include "spinpath/bath.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spinpath {

namespace {

// x - sin(x) loses all digits for small x
double x_minus_sin(double x)
{
    if (std::abs(x) < 1e-2) {
        const double x2 = x * x;
        return x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
    }
    return x - std::sin(x);
}

void require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string("bath parameter ") + name + " must be positive and finite");
}

} // namespace

void OhmicSpec::validate() const
{
    require_positive(xi, "xi");
    require_positive(omega_c, "omega_c");
    require_positive(beta, "beta");
    require_positive(omega_max, "omega_max");
    if (count < 1)
        throw std::invalid_argument("bath needs at least one oscillator");
}

DiscreteBath DiscreteBath::uncoupled() const
{
    DiscreteBath b = *this;
    for (double& c : b.couplings)
        c = 0.0;
    return b;
}

DiscreteBath discretize(const OhmicSpec& spec)
{
    spec.validate();
    const double L = spec.count;
    const double tail = -std::expm1(-spec.omega_max / spec.omega_c);
    const double scale = std::sqrt(spec.xi * spec.omega_c / L * tail);

    DiscreteBath bath;
    bath.frequencies.resize(spec.count);
    bath.couplings.resize(spec.count);
    for (int j = 1; j <= spec.count; ++j) {
        const double w = -spec.omega_c * std::log1p(-(j / L) * tail);
        bath.frequencies[j - 1] = w;
        bath.couplings[j - 1] = w * scale;
    }
    return bath;
}

ResponseKernel::ResponseKernel(const DiscreteBath& bath, double beta)
{
    if (bath.frequencies.size() != bath.couplings.size())
        throw std::invalid_argument("bath frequency and coupling arrays differ in length");
    if (!(beta > 0.0))
        throw std::invalid_argument("inverse temperature must be positive");
    for (std::size_t j = 0; j < bath.size(); ++j) {
        const double w = bath.frequencies[j];
        if (!(w > 0.0))
            throw std::invalid_argument("bath frequencies must be positive");
        const double c = bath.couplings[j];
        const double b = c * c / (2.0 * w);
        omega_.push_back(w);
        a_.push_back(b / std::tanh(beta * w / 2.0));
        b_.push_back(b);
    }
}

cplx ResponseKernel::eta_tilde(double tau) const
{
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < omega_.size(); ++j) {
        const double x = omega_[j] * tau;
        re += a_[j] * std::cos(x);
        im -= b_[j] * std::sin(x);
    }
    return {re, im};
}

cplx ResponseKernel::first_integral(double u) const
{
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < omega_.size(); ++j) {
        const double w = omega_[j];
        const double h = std::sin(w * u / 2.0);
        re += a_[j] * std::sin(w * u) / w;
        im -= b_[j] * 2.0 * h * h / w;
    }
    return {re, im};
}

cplx ResponseKernel::second_integral(double u) const
{
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < omega_.size(); ++j) {
        const double w = omega_[j];
        const double h = std::sin(w * u / 2.0);
        re += a_[j] * 2.0 * h * h / (w * w);
        im -= b_[j] * x_minus_sin(w * u) / (w * w);
    }
    return {re, im};
}

cplx ResponseKernel::rectangle(double a1, double b1, double a2, double b2) const
{
    return second_integral(b1 - a2) - second_integral(b1 - b2) - second_integral(a1 - a2) + second_integral(a1 - b2);
}

cplx eta_tilde(const DiscreteBath& bath, double beta, double tau)
{
    return ResponseKernel(bath, beta).eta_tilde(tau);
}

cplx eta_coefficient(const DiscreteBath& bath, double beta, double dt, int lag)
{
    if (lag < 0)
        throw std::invalid_argument("eta lag must be nonnegative");
    if (!(dt > 0.0))
        throw std::invalid_argument("eta time step must be positive");
    const ResponseKernel k(bath, beta);
    if (lag == 0)
        return k.triangle(0.0, dt);
    return k.rectangle(lag * dt, (lag + 1) * dt, 0.0, dt);
}

EtaTable build_eta_table(const DiscreteBath& bath, double beta, double dt, int max_lag)
{
    if (max_lag < 0)
        throw std::invalid_argument("eta table needs max_lag >= 0");
    EtaTable t;
    t.dt = dt;
    t.max_lag = max_lag;
    for (int m = 0; m <= max_lag; ++m)
        t.coefficients.push_back(eta_coefficient(bath, beta, dt, m));
    return t;
}

} // namespace spinpath
