// Differential-equation-based path integral solver.
//
// Unknowns A^{D,sgn}_{(r+,r-)}(t, [tau_1..tau_D]) live on simplex grids of flip gaps in
// units of h_s = T/N. The window covers physical times [t, t+T), so the density
// assembled at solver time t is the density at physical time t + T.
//
// Evolution: d/dt A = d/dtau_1 A - W A + A^{D+1,[-,sgn]}_{(r+,^r-)}(t,[0,tau])
//                                     + A^{D+1,[+,sgn]}_{(^r+,r-)}(t,[0,tau])
// split as advection(dt/2) . source(dt) . advection(dt/2).
#pragma once

#include "spinpath/bath.hpp"
#include "spinpath/pathgrid.hpp"
#include "spinpath/spinsys.hpp"

#include <functional>
#include <vector>

namespace spinpath {

enum class Quadrature {
    rectangle, ///< h^D at every stored point
    trapezoid, ///< iterated trapezoid over the closed simplex, hypotenuse via boundary values
};

enum class Closure {
    interpolation, ///< linear interpolation between a double-flip collapse and a boundary value
    none,          ///< amplitudes with D_max+1 flips are dropped
};

struct SolverConfig {
    double T = 1.0;
    int n = 8;
    int dmax = 2;
    double dt = 1.0 / 80.0;
    SystemParams system;
    DiscreteBath bath;
    double beta = 1.0;
    DensityMatrix rho0 = DensityMatrix::spin_up();
    Quadrature quadrature = Quadrature::trapezoid;
    Closure closure = Closure::interpolation;

    double h() const { return T / n; }
    void validate() const;
};

/// W(h) for a segment with flip gaps `times` (real, sum <= T).
cplx compute_w(const SolverConfig& cfg, const PathSegmentKey& key, const FlipTimes& times);

/// A(0,h) = <r0+|rho0|r0-> Y(h) exp(Z_hh) for a segment with flip gaps `times`.
cplx initial_amplitude(const SolverConfig& cfg, const PathSegmentKey& key, const FlipTimes& times);

struct SolverState {
    double t = 0.0;
    /// banks[D][((init * 2^D) + sign_mask) * grid(D).size() + point]
    std::vector<std::vector<cplx>> banks;
};

class DebpiSolver {
public:
    explicit DebpiSolver(SolverConfig cfg);

    const SolverConfig& config() const { return cfg_; }
    const SimplexGrid& grid(int d) const { return grids_[d]; }
    std::size_t bank_offset(int d, unsigned init, std::uint32_t mask) const
    {
        return ((std::size_t(init) << d) + mask) * grids_[d].size();
    }

    SolverState initial_state() const;
    SolverState zero_state() const;

    /// Value at integer gaps m (units of h_s). Interior points are read from the banks;
    /// points with sum m = N use the boundary relation.
    cplx value_at(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const;
    /// Requires sum m = N.
    cplx boundary_value(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const;
    /// Flips k and k+1 (0-based) share a branch and m[k+1] = 0.
    cplx collapse_double_flip(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m, int k) const;
    /// key has D_max+1 flips and m[0] = 0.
    cplx closure_estimate(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const;

    cplx w_value(int d, unsigned init, std::uint32_t mask, std::size_t point) const
    {
        return wcache_[d][bank_offset(d, init, mask) + point];
    }

    /// Boundary data for the advection sub-step: (D, init, mask, hypotenuse gaps, time) -> value.
    using BoundaryFn = std::function<cplx(int, unsigned, std::uint32_t, const std::vector<int>&, double)>;

    void advection_half_step(SolverState& s) const;
    void advection(SolverState& s, double tau, const BoundaryFn& boundary = {}) const;
    void source_full_step(SolverState& s) const;
    void strang_step(SolverState& s) const;

    DensityMatrix assemble_density(const SolverState& s) const;
    /// Density at physical time j h_s for 0 <= j <= N, from the exact initial data on a
    /// window of j cells (flip counts up to D_max).
    DensityMatrix early_density(int j) const;

    /// Right-hand side of the source sub-problem at s, written into out.
    void source_rhs(const SolverState& s, SolverState& out) const;

private:
    struct HypLink {
        int low_dim = -1;         ///< j - 1 for the last nonzero coordinate j (1-based)
        std::uint32_t low_point = 0;
    };
    struct ClosureEntry {
        std::uint32_t collapse_point;
        std::uint32_t boundary_point;
        std::uint32_t collapse_mask;
        std::uint32_t boundary_mask;
        double collapse_coeff;  ///< real: -Delta^2 times weight
        double boundary_coeff;  ///< imaginary part: weight times -/+ Delta
    };

    void build_maps();
    cplx flip_factor(Branch b) const;
    cplx hyp_value(const SolverState& s, int d, unsigned init, std::uint32_t mask, const HypLink& link) const;
    void fill_weights();
    /// Lattice offset u (a multiple of h_s, 0 <= u <= T) as a table index.
    std::size_t lattice_index(double u) const;

    SolverConfig cfg_;
    std::vector<SimplexGrid> grids_;
    std::vector<std::vector<int>> sums_;
    std::vector<std::vector<std::int32_t>> next1_, next2_, prev_, prepend0_;
    /// Last-layer points with m_1 = 0: m - e_j and m - e_j + e_1 for the first j > 1 with m_j > 0.
    std::vector<std::vector<std::int32_t>> edge0_, edge1_;
    std::vector<std::vector<HypLink>> hyp1_, hyp2_;
    std::vector<ClosureEntry> closure_; ///< [(mask * 2 + new_is_minus) * G + point] for D = D_max
    std::vector<std::vector<cplx>> wcache_;
    std::vector<std::vector<double>> weights_;     ///< interior quadrature weights per D
    std::vector<std::vector<double>> hyp_weights_; ///< per D >= 1, indexed by grid(D-1) points
    std::vector<cplx> lattice_f_, lattice_g_;
};

/// Densities at physical times: j h_s for j < N from the windowed initial data, then T + k dt
/// for k = 0..steps. The callback, if any, sees each (time, density) as produced.
std::vector<std::pair<double, DensityMatrix>> debpi_run(const SolverConfig& cfg, int steps,
                                                         const std::function<void(double, const DensityMatrix&)>& on_row = {});

} // namespace spinpath
