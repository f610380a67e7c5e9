#include "spinpath/spinsys.hpp"

#include <cmath>
#include <stdexcept>

namespace spinpath {

void SystemParams::validate() const
{
    if (!std::isfinite(epsilon) || !std::isfinite(delta))
        throw std::invalid_argument("system parameters must be finite");
    if (delta < 0.0)
        throw std::invalid_argument("spin-flip frequency delta must be nonnegative");
}

DensityMatrix DensityMatrix::spin_up()
{
    DensityMatrix rho;
    rho(Spin::up, Spin::up) = 1.0;
    return rho;
}

cplx h0_element(const SystemParams& p, Spin bra, Spin ket)
{
    if (bra == ket)
        return p.epsilon * value(bra);
    return p.delta;
}

Matrix2 short_time_propagator(const SystemParams& p, double dt, Direction direction)
{
    // exp(-i s H dt) = cos(w dt) I - i s sin(w dt)/w H, with w = sqrt(eps^2 + delta^2)
    const double s = direction == Direction::forward ? 1.0 : -1.0;
    const double w = std::hypot(p.epsilon, p.delta);
    const double c = std::cos(w * dt);
    const double sinc = w == 0.0 ? dt : std::sin(w * dt) / w;
    const cplx f = -kI * s * sinc;

    Matrix2 u{};
    u[0][0] = c + f * p.epsilon;
    u[1][1] = c - f * p.epsilon;
    u[0][1] = f * p.delta;
    u[1][0] = f * p.delta;
    return u;
}

Matrix2 multiply(const Matrix2& a, const Matrix2& b)
{
    Matrix2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

Matrix2 adjoint(const Matrix2& m)
{
    Matrix2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            r[i][j] = std::conj(m[j][i]);
    return r;
}

} // namespace spinpath
