// Two-level system: spin states, the bare Hamiltonian H_0 = eps*sigma_z + delta*sigma_x
// and its short-time propagators.
//
// The reference-Hamiltonian counter-term -sum_j c_j^2/(2 w_j^2) sigma_z^2 is a multiple of
// the identity for a single spin. Its phase cancels between every forward and backward
// propagator pair, so it is not represented here.
#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace spinpath {

using cplx = std::complex<double>;
inline constexpr cplx kI{0.0, 1.0};

enum class Spin : std::int8_t { down = -1, up = +1 };

constexpr int value(Spin s) { return static_cast<int>(s); }
constexpr Spin flipped(Spin s) { return s == Spin::up ? Spin::down : Spin::up; }
/// Row/column index in 2x2 matrices: +1 -> 0, -1 -> 1.
constexpr int index_of(Spin s) { return s == Spin::up ? 0 : 1; }
constexpr Spin spin_at(int index) { return index == 0 ? Spin::up : Spin::down; }

/// Classical spins on the forward (+) and backward (-) branch.
struct PairState {
    Spin plus = Spin::up;
    Spin minus = Spin::up;

    /// 2-bit code: (+1,+1)=0, (+1,-1)=1, (-1,+1)=2, (-1,-1)=3.
    constexpr unsigned code() const { return 2u * index_of(plus) + index_of(minus); }
    static constexpr PairState from_code(unsigned c) { return {spin_at(int(c >> 1) & 1), spin_at(int(c) & 1)}; }
    constexpr PairState swapped() const { return {minus, plus}; }
    friend constexpr bool operator==(PairState, PairState) = default;
};

struct SystemParams {
    double epsilon = 0.0; ///< energy bias
    double delta = 1.0;   ///< spin-flip frequency

    void validate() const;
};

using Matrix2 = std::array<std::array<cplx, 2>, 2>;

struct DensityMatrix {
    Matrix2 entries{};

    cplx& operator()(Spin row, Spin col) { return entries[index_of(row)][index_of(col)]; }
    cplx operator()(Spin row, Spin col) const { return entries[index_of(row)][index_of(col)]; }

    cplx trace() const { return entries[0][0] + entries[1][1]; }
    cplx sigma_z() const { return entries[0][0] - entries[1][1]; }

    static DensityMatrix spin_up();
};

/// <bra|H_0|ket>; always real.
cplx h0_element(const SystemParams& p, Spin bra, Spin ket);

enum class Direction { forward, backward };

/// exp(-i H_0 dt) for forward, exp(+i H_0 dt) for backward, evaluated in closed form.
Matrix2 short_time_propagator(const SystemParams& p, double dt, Direction direction);

inline cplx element(const Matrix2& m, Spin bra, Spin ket) { return m[index_of(bra)][index_of(ket)]; }

Matrix2 multiply(const Matrix2& a, const Matrix2& b);
Matrix2 adjoint(const Matrix2& m);

} // namespace spinpath
