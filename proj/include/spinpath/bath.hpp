// Discretized Ohmic bath and the bath response coefficients.
#pragma once

#include <complex>
#include <vector>

namespace spinpath {

using cplx = std::complex<double>;

struct OhmicSpec {
    double xi = 0.2;       ///< Kondo parameter
    double omega_c = 1.0;  ///< cutoff frequency
    double beta = 1.0;     ///< inverse temperature
    double omega_max = 4.0;
    int count = 200;       ///< number of oscillators L

    void validate() const;
};

struct DiscreteBath {
    std::vector<double> frequencies;
    std::vector<double> couplings;

    std::size_t size() const { return frequencies.size(); }
    /// Same frequencies with every coupling set to zero.
    DiscreteBath uncoupled() const;
};

DiscreteBath discretize(const OhmicSpec& spec);

/// Per-oscillator weights of the response function for a bath at inverse temperature beta.
///
///   eta~(tau) = sum_j a_j cos(w_j tau) - i b_j sin(w_j tau)
///   a_j = c_j^2 / (2 w_j) coth(beta w_j / 2),  b_j = c_j^2 / (2 w_j)
///
/// first_integral(u)  = int_0^u eta~(s) ds
/// second_integral(u) = int_0^u (u - s) eta~(s) ds
/// so the integral of eta~(x1 - x2) over any rectangle or triangle reduces to
/// differences of second_integral at the corner offsets.
class ResponseKernel {
public:
    ResponseKernel(const DiscreteBath& bath, double beta);

    cplx eta_tilde(double tau) const;
    cplx first_integral(double u) const;
    cplx second_integral(double u) const;

    /// int_{a1}^{b1} int_{a2}^{b2} eta~(x1 - x2) dx2 dx1
    cplx rectangle(double a1, double b1, double a2, double b2) const;
    /// int_a^b int_a^{x1} eta~(x1 - x2) dx2 dx1
    cplx triangle(double a, double b) const { return second_integral(b - a); }

    std::size_t size() const { return omega_.size(); }

private:
    std::vector<double> omega_;
    std::vector<double> a_;
    std::vector<double> b_;
};

cplx eta_tilde(const DiscreteBath& bath, double beta, double tau);

/// Cell-integrated influence coefficient eta(lag) for step dt. lag 0 is the triangle
/// integral over [0,dt]; lag m >= 1 is the square integral over [m dt,(m+1) dt] x [0,dt].
cplx eta_coefficient(const DiscreteBath& bath, double beta, double dt, int lag);

struct EtaTable {
    double dt = 0.0;
    int max_lag = 0;
    std::vector<cplx> coefficients;

    cplx operator[](int lag) const { return coefficients.at(static_cast<std::size_t>(lag)); }
};

EtaTable build_eta_table(const DiscreteBath& bath, double beta, double dt, int max_lag);

} // namespace spinpath
