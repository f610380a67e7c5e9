#include "spinpath/debpi.hpp"

#include <array>
#include <cmath>
#include <tuple>
#include <stdexcept>

#include <fmt/format.h>

namespace spinpath {

namespace {

constexpr int kMaxFlips = 16;

double energy(const SystemParams& p, Spin s) { return h0_element(p, s, s).real(); }

unsigned toggled_init(unsigned init, Branch b) { return b == Branch::plus ? init ^ 2u : init ^ 1u; }

Branch branch_of(std::uint32_t mask, int k) { return (mask >> k) & 1u ? Branch::minus : Branch::plus; }

// Piecewise-constant path on [0, total): states[k] holds on [pos[k], pos[k+1]).
struct Segments {
    std::vector<double> pos;
    std::vector<PairState> states;
};

Segments segments_from_gaps(const PathSegmentKey& key, const double* gaps, double total)
{
    Segments seg;
    const int d = key.flips();
    seg.pos.resize(d + 2);
    seg.states.resize(d + 1);
    seg.pos[0] = 0.0;
    seg.states[0] = key.init;
    double p = 0.0;
    for (int k = 0; k < d; ++k) {
        p += gaps[k];
        seg.pos[k + 1] = p;
        seg.states[k + 1] = apply_flip(seg.states[k], key.signs[k]);
    }
    seg.pos[d + 1] = total;
    return seg;
}

double branch_difference(PairState s) { return double(value(s.plus) - value(s.minus)); }

template <class FirstIntegral>
cplx w_of(const SystemParams& sys, const Segments& seg, FirstIntegral&& first)
{
    const int segs = int(seg.states.size());
    const double total = seg.pos.back();
    const PairState fin = seg.states.back();
    cplx w = kI * (energy(sys, fin.plus) - energy(sys, fin.minus));
    const double df = branch_difference(fin);
    if (df == 0.0)
        return w;
    cplx bath = 0.0;
    for (int k = 0; k < segs; ++k) {
        if (seg.pos[k + 1] <= seg.pos[k])
            continue;
        const cplx x = first(total - seg.pos[k]) - first(total - seg.pos[k + 1]);
        bath += double(value(seg.states[k].plus)) * x - double(value(seg.states[k].minus)) * std::conj(x);
    }
    return w + df * bath;
}

template <class SecondIntegral>
cplx amplitude_of(const SystemParams& sys, const DensityMatrix& rho0, const PathSegmentKey& key, const Segments& seg,
                  SecondIntegral&& second)
{
    const cplx r0 = rho0(key.init.plus, key.init.minus);
    if (r0 == cplx(0.0))
        return 0.0;
    const int segs = int(seg.states.size());
    const auto& a = seg.pos;

    double phase = 0.0;
    for (int k = 0; k < segs; ++k)
        phase -= (energy(sys, seg.states[k].plus) - energy(sys, seg.states[k].minus)) * (a[k + 1] - a[k]);
    cplx flips = 1.0;
    for (Branch b : key.signs)
        flips *= b == Branch::plus ? -kI * sys.delta : kI * sys.delta;

    cplx z = 0.0;
    for (int k = 0; k < segs; ++k) {
        const double dk = branch_difference(seg.states[k]);
        if (dk == 0.0 || a[k + 1] <= a[k])
            continue;
        cplx inner = 0.0;
        for (int l = 0; l <= k; ++l) {
            if (a[l + 1] <= a[l])
                continue;
            const cplx r = l == k ? second(a[k + 1] - a[k])
                                  : second(a[k + 1] - a[l]) - second(a[k + 1] - a[l + 1]) - second(a[k] - a[l]) +
                                        second(a[k] - a[l + 1]);
            inner += double(value(seg.states[l].plus)) * r - double(value(seg.states[l].minus)) * std::conj(r);
        }
        z -= dk * inner;
    }
    return r0 * flips * std::polar(1.0, phase) * std::exp(z);
}

// Nested trapezoid weight (in units of h^D) of an integer point of the closed simplex sum <= budget.
double trapezoid_weight(const int* m, int d, int budget)
{
    double w = 1.0;
    int r = budget;
    for (int k = 0; k < d; ++k) {
        if (r == 0)
            return 0.0;
        if (m[k] == 0 || m[k] == r)
            w *= 0.5;
        r -= m[k];
    }
    return w;
}

struct ClosurePlan {
    std::vector<int> collapse_gaps;
    std::uint32_t collapse_mask = 0;
    std::vector<int> boundary_gaps;
    std::uint32_t boundary_mask = 0;
    Branch branch = Branch::plus;
    double collapse_weight = 0.0;
    double boundary_weight = 0.0;
};

std::pair<std::vector<int>, std::uint32_t> remove_flips(const std::vector<int>& pos, std::uint32_t mask, int skip1, int skip2)
{
    std::vector<int> gaps;
    std::uint32_t out = 0;
    int last = 0;
    for (int i = 0; i < int(pos.size()); ++i) {
        if (i == skip1 || i == skip2)
            continue;
        if ((mask >> i) & 1u)
            out |= 1u << gaps.size();
        gaps.push_back(pos[i] - last);
        last = pos[i];
    }
    return {gaps, out};
}

ClosurePlan plan_closure(std::uint32_t mask, const std::vector<int>& gaps, int n)
{
    const int d = int(gaps.size());
    int minus = 0;
    for (int k = d - 3; k < d; ++k)
        minus += (mask >> k) & 1u;
    ClosurePlan plan;
    plan.branch = minus >= 2 ? Branch::minus : Branch::plus;

    std::vector<int> pos(d);
    int p = 0;
    int i0 = -1, is = -1;
    for (int k = 0; k < d; ++k) {
        p += gaps[k];
        pos[k] = p;
        if (branch_of(mask, k) == plan.branch) {
            is = i0;
            i0 = k;
        }
    }
    const double s0 = pos[i0], ss = pos[is];
    plan.collapse_weight = (n - s0) / (n - ss);
    plan.boundary_weight = (s0 - ss) / (n - ss);
    std::tie(plan.collapse_gaps, plan.collapse_mask) = remove_flips(pos, mask, is, i0);
    std::tie(plan.boundary_gaps, plan.boundary_mask) = remove_flips(pos, mask, i0, -1);
    return plan;
}

int sum_of(const std::vector<int>& m)
{
    int s = 0;
    for (int v : m)
        s += v;
    return s;
}

} // namespace

void SolverConfig::validate() const
{
    system.validate();
    if (!(T > 0.0) || !std::isfinite(T))
        throw std::invalid_argument("memory time T must be positive");
    if (n < 1)
        throw std::invalid_argument("grid resolution N must be at least 1");
    if (dmax < 0 || dmax > kMaxFlips)
        throw std::invalid_argument(fmt::format("D_max must lie in [0, {}]", kMaxFlips));
    if (closure == Closure::interpolation && dmax < 2)
        throw std::invalid_argument("the interpolation closure needs D_max >= 2");
    if (!(dt > 0.0))
        throw std::invalid_argument("time step must be positive");
    if (dt > h() * (1.0 + 1e-12))
        throw std::invalid_argument(fmt::format("time step {} exceeds the grid spacing h_s = {}", dt, h()));
    if (!(beta > 0.0))
        throw std::invalid_argument("inverse temperature must be positive");
    if (bath.frequencies.size() != bath.couplings.size())
        throw std::invalid_argument("bath arrays differ in length");
}

cplx compute_w(const SolverConfig& cfg, const PathSegmentKey& key, const FlipTimes& times)
{
    if (int(times.size()) != key.flips())
        throw std::invalid_argument("flip time count does not match the key");
    const ResponseKernel k(cfg.bath, cfg.beta);
    const Segments seg = segments_from_gaps(key, times.data(), cfg.T);
    if (seg.pos[key.flips()] > cfg.T * (1.0 + 1e-12))
        throw std::invalid_argument("flip times exceed the memory window");
    return w_of(cfg.system, seg, [&](double u) { return k.first_integral(u); });
}

cplx initial_amplitude(const SolverConfig& cfg, const PathSegmentKey& key, const FlipTimes& times)
{
    if (int(times.size()) != key.flips())
        throw std::invalid_argument("flip time count does not match the key");
    const ResponseKernel k(cfg.bath, cfg.beta);
    const Segments seg = segments_from_gaps(key, times.data(), cfg.T);
    if (seg.pos[key.flips()] > cfg.T * (1.0 + 1e-12))
        throw std::invalid_argument("flip times exceed the memory window");
    return amplitude_of(cfg.system, cfg.rho0, key, seg, [&](double u) { return k.second_integral(u); });
}

DebpiSolver::DebpiSolver(SolverConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    const int n = cfg_.n;
    const double h = cfg_.h();
    for (int d = 0; d <= cfg_.dmax; ++d)
        grids_.emplace_back(n, d);

    const ResponseKernel k(cfg_.bath, cfg_.beta);
    for (int j = 0; j <= n; ++j) {
        lattice_f_.push_back(k.first_integral(j * h));
        lattice_g_.push_back(k.second_integral(j * h));
    }
    build_maps();
    fill_weights();

    // W is time independent
    wcache_.resize(cfg_.dmax + 1);
    for (int d = 0; d <= cfg_.dmax; ++d) {
        const std::size_t g = grids_[d].size();
        wcache_[d].resize((std::size_t(4) << d) * g);
        const std::size_t banks = std::size_t(4) << d;
#pragma omp parallel for schedule(dynamic)
        for (std::size_t b = 0; b < banks; ++b) {
            const PathSegmentKey key = PathSegmentKey::from_mask(PairState::from_code(unsigned(b >> d)), d, std::uint32_t(b & ((1u << d) - 1)));
            std::vector<double> gaps(d);
            for (std::size_t p = 0; p < g; ++p) {
                const int* m = grids_[d].point_data(p);
                for (int i = 0; i < d; ++i)
                    gaps[i] = m[i] * h;
                const Segments seg = segments_from_gaps(key, gaps.data(), n * h);
                wcache_[d][b * g + p] = w_of(cfg_.system, seg, [&](double u) { return lattice_f_[lattice_index(u)]; });
            }
        }
    }
}

void DebpiSolver::build_maps()
{
    const int n = cfg_.n;
    const int dmax = cfg_.dmax;
    sums_.resize(dmax + 1);
    next1_.resize(dmax + 1);
    next2_.resize(dmax + 1);
    prev_.resize(dmax + 1);
    edge0_.resize(dmax + 1);
    edge1_.resize(dmax + 1);
    prepend0_.resize(dmax + 1);
    hyp1_.resize(dmax + 1);
    hyp2_.resize(dmax + 1);

    auto link_for = [&](std::vector<int> m) {
        HypLink link;
        int j = int(m.size());
        while (j > 0 && m[j - 1] == 0)
            --j;
        link.low_dim = j - 1;
        m.resize(std::size_t(j - 1));
        link.low_point = std::uint32_t(grids_[j - 1].index_of(m));
        return link;
    };

    for (int d = 0; d <= dmax; ++d) {
        const SimplexGrid& g = grids_[d];
        const std::size_t size = g.size();
        sums_[d].resize(size);
        next1_[d].assign(size, -1);
        next2_[d].assign(size, -1);
        prev_[d].assign(size, -1);
        edge0_[d].assign(size, -1);
        edge1_[d].assign(size, -1);
        hyp1_[d].resize(size);
        hyp2_[d].resize(size);
        if (d < dmax)
            prepend0_[d].resize(size);
        for (std::size_t p = 0; p < size; ++p) {
            std::vector<int> m = g.point(p);
            const int s = sum_of(m);
            sums_[d][p] = s;
            if (d < dmax) {
                std::vector<int> q{0};
                q.insert(q.end(), m.begin(), m.end());
                prepend0_[d][p] = std::int32_t(grids_[d + 1].index_of(q));
            }
            if (d == 0)
                continue;
            if (m[0] >= 1) {
                --m[0];
                prev_[d][p] = std::int32_t(g.index_of(m));
                ++m[0];
            } else if (s == n - 1) {
                // curvature along tau_1 is taken one row over, at m - e_j
                const auto j = std::find_if(m.begin() + 1, m.end(), [](int v) { return v > 0; });
                if (j != m.end()) {
                    --*j;
                    edge0_[d][p] = std::int32_t(g.index_of(m));
                    ++m[0];
                    edge1_[d][p] = std::int32_t(g.index_of(m));
                    --m[0];
                    ++*j;
                }
            }
            ++m[0];
            if (s + 1 <= n - 1)
                next1_[d][p] = std::int32_t(g.index_of(m));
            else
                hyp1_[d][p] = link_for(m);
            ++m[0];
            if (s + 2 <= n - 1)
                next2_[d][p] = std::int32_t(g.index_of(m));
            else if (s + 2 == n)
                hyp2_[d][p] = link_for(m);
        }
    }

    if (cfg_.closure != Closure::interpolation)
        return;
    const SimplexGrid& g = grids_[dmax];
    const std::size_t size = g.size();
    closure_.resize((std::size_t(2) << dmax) * size);
#pragma omp parallel for schedule(dynamic)
    for (std::uint32_t mask = 0; mask < (1u << dmax); ++mask)
        for (std::uint32_t b = 0; b < 2; ++b) {
            const std::uint32_t full_mask = (mask << 1) | b;
            std::vector<int> gaps(std::size_t(dmax + 1), 0);
            for (std::size_t p = 0; p < size; ++p) {
                const int* m = g.point_data(p);
                for (int i = 0; i < dmax; ++i)
                    gaps[i + 1] = m[i];
                const ClosurePlan plan = plan_closure(full_mask, gaps, n);
                ClosureEntry& e = closure_[(std::size_t(mask) * 2 + b) * size + p];
                e.collapse_point = std::uint32_t(grids_[dmax - 1].index_of(plan.collapse_gaps));
                e.collapse_mask = plan.collapse_mask;
                e.boundary_point = std::uint32_t(grids_[dmax].index_of(plan.boundary_gaps));
                e.boundary_mask = plan.boundary_mask;
                e.collapse_coeff = -cfg_.system.delta * cfg_.system.delta * plan.collapse_weight;
                e.boundary_coeff = (plan.branch == Branch::plus ? -1.0 : 1.0) * cfg_.system.delta * plan.boundary_weight;
            }
        }
}

void DebpiSolver::fill_weights()
{
    const int n = cfg_.n;
    const double h = cfg_.h();
    weights_.resize(cfg_.dmax + 1);
    hyp_weights_.resize(cfg_.dmax + 1);
    for (int d = 0; d <= cfg_.dmax; ++d) {
        const double hd = std::pow(h, d);
        const SimplexGrid& g = grids_[d];
        weights_[d].resize(g.size());
        for (std::size_t p = 0; p < g.size(); ++p)
            weights_[d][p] = cfg_.quadrature == Quadrature::rectangle ? hd : hd * trapezoid_weight(g.point_data(p), d, n);
        if (d == 0)
            continue;
        const SimplexGrid& low = grids_[d - 1];
        hyp_weights_[d].assign(low.size(), 0.0);
        if (cfg_.quadrature == Quadrature::rectangle)
            continue;
        std::vector<int> m(static_cast<std::size_t>(d));
        for (std::size_t p = 0; p < low.size(); ++p) {
            const int* q = low.point_data(p);
            int s = 0;
            for (int i = 0; i < d - 1; ++i) {
                m[i] = q[i];
                s += q[i];
            }
            m[d - 1] = n - s;
            hyp_weights_[d][p] = hd * trapezoid_weight(m.data(), d, n);
        }
    }
}

std::size_t DebpiSolver::lattice_index(double u) const
{
    const long j = std::lround(u / cfg_.h());
    if (j < 0 || j > cfg_.n)
        throw std::logic_error("segment offset outside the lattice");
    return std::size_t(j);
}

cplx DebpiSolver::flip_factor(Branch b) const
{
    return b == Branch::plus ? -kI * cfg_.system.delta : kI * cfg_.system.delta;
}

SolverState DebpiSolver::zero_state() const
{
    SolverState s;
    s.banks.resize(cfg_.dmax + 1);
    for (int d = 0; d <= cfg_.dmax; ++d)
        s.banks[d].assign((std::size_t(4) << d) * grids_[d].size(), 0.0);
    return s;
}

SolverState DebpiSolver::initial_state() const
{
    SolverState s = zero_state();
    const int n = cfg_.n;
    const double h = cfg_.h();
    for (int d = 0; d <= cfg_.dmax; ++d) {
        const std::size_t g = grids_[d].size();
        const std::size_t banks = std::size_t(4) << d;
#pragma omp parallel for schedule(dynamic)
        for (std::size_t b = 0; b < banks; ++b) {
            const PathSegmentKey key = PathSegmentKey::from_mask(PairState::from_code(unsigned(b >> d)), d, std::uint32_t(b & ((1u << d) - 1)));
            if (cfg_.rho0(key.init.plus, key.init.minus) == cplx(0.0))
                continue;
            std::vector<double> gaps(d);
            for (std::size_t p = 0; p < g; ++p) {
                const int* m = grids_[d].point_data(p);
                for (int i = 0; i < d; ++i)
                    gaps[i] = m[i] * h;
                const Segments seg = segments_from_gaps(key, gaps.data(), n * h);
                s.banks[d][b * g + p] = amplitude_of(cfg_.system, cfg_.rho0, key, seg,
                                                     [&](double u) { return lattice_g_[lattice_index(u)]; });
            }
        }
    }
    return s;
}

cplx DebpiSolver::hyp_value(const SolverState& s, int d, unsigned init, std::uint32_t mask, const HypLink& link) const
{
    const int low = link.low_dim;
    const std::uint32_t low_mask = mask & ((1u << low) - 1u);
    cplx v = s.banks[low][bank_offset(low, init, low_mask) + link.low_point];
    for (int k = low; k < d; ++k)
        v *= flip_factor(branch_of(mask, k));
    return v;
}

cplx DebpiSolver::boundary_value(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const
{
    const int d = key.flips();
    if (int(m.size()) != d || d < 1 || d > cfg_.dmax)
        throw std::invalid_argument("boundary value needs 1 <= D <= D_max gaps");
    for (int v : m)
        if (v < 0)
            throw std::invalid_argument("negative flip gap");
    if (sum_of(m) != cfg_.n)
        throw std::invalid_argument("boundary value requested off the hypotenuse");
    int j = d;
    while (m[j - 1] == 0)
        --j;
    HypLink link;
    link.low_dim = j - 1;
    link.low_point = std::uint32_t(grids_[j - 1].index_of(std::vector<int>(m.begin(), m.begin() + (j - 1))));
    return hyp_value(s, d, key.init.code(), key.sign_mask(), link);
}

cplx DebpiSolver::value_at(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const
{
    const int d = key.flips();
    if (d > cfg_.dmax)
        throw std::invalid_argument("flip count exceeds D_max");
    if (sum_of(m) == cfg_.n)
        return boundary_value(s, key, m);
    return s.banks[d][bank_offset(d, key.init.code(), key.sign_mask()) + grids_[d].index_of(m)];
}

cplx DebpiSolver::collapse_double_flip(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m, int k) const
{
    const int d = key.flips();
    if (int(m.size()) != d || k < 0 || k + 1 >= d)
        throw std::invalid_argument("collapse needs two adjacent flips inside the key");
    if (key.signs[k] != key.signs[k + 1] || m[k + 1] != 0)
        throw std::invalid_argument("collapse needs equal adjacent signs with zero separation");
    PathSegmentKey reduced{key.init, {}};
    std::vector<int> gaps;
    for (int i = 0; i < d; ++i) {
        if (i == k || i == k + 1)
            continue;
        reduced.signs.push_back(key.signs[i]);
        gaps.push_back(i == k + 2 ? m[k] + m[k + 1] + m[k + 2] : m[i]);
    }
    const double delta = cfg_.system.delta;
    return -delta * delta * value_at(s, reduced, gaps);
}

cplx DebpiSolver::closure_estimate(const SolverState& s, const PathSegmentKey& key, const std::vector<int>& m) const
{
    const int d = key.flips();
    if (d != cfg_.dmax + 1 || int(m.size()) != d)
        throw std::invalid_argument("closure estimate needs exactly D_max + 1 flips");
    if (d < 3)
        throw std::invalid_argument("closure estimate needs D_max >= 2");
    if (m[0] != 0)
        throw std::invalid_argument("closure estimate expects a first gap of zero");
    const ClosurePlan plan = plan_closure(key.sign_mask(), m, cfg_.n);
    const PathSegmentKey collapsed = PathSegmentKey::from_mask(key.init, d - 2, plan.collapse_mask);
    const PathSegmentKey shortened = PathSegmentKey::from_mask(key.init, d - 1, plan.boundary_mask);
    const double delta = cfg_.system.delta;
    return plan.collapse_weight * (-delta * delta) * value_at(s, collapsed, plan.collapse_gaps) +
           plan.boundary_weight * flip_factor(plan.branch) * value_at(s, shortened, plan.boundary_gaps);
}

void DebpiSolver::advection_half_step(SolverState& s) const
{
    advection(s, cfg_.dt / 2.0);
}

// Heun stages around second-order stencils in tau_1: one-sided upwind below the last
// layer, central on it, so the update is second order in tau at any fixed h.
void DebpiSolver::advection(SolverState& s, double tau, const BoundaryFn& boundary) const
{
    const int n = cfg_.n;
    const double h = cfg_.h();

    auto hyp = [&](const SolverState& st, int d, unsigned init, std::uint32_t mask, std::size_t p, int shift,
                   const HypLink& link, double t) -> cplx {
        if (!boundary)
            return hyp_value(st, d, init, mask, link);
        std::vector<int> m = grids_[d].point(p);
        m[0] += shift;
        return boundary(d, init, mask, m, t);
    };

    // last-layer points with m_1 = 0 have no left neighbour: forward difference to the
    // hypotenuse, corrected by the curvature h/2 d^2/dtau_1^2 from the adjacent row
    auto edge_slope = [&](const SolverState& st, const cplx* u, int d, unsigned init, std::uint32_t mask, std::size_t p,
                          double t) -> cplx {
        const cplx up = hyp(st, d, init, mask, p, 1, hyp1_[d][p], t);
        cplx slope = (up - u[p]) / h;
        if (edge0_[d][p] >= 0) {
            const std::size_t q0 = std::size_t(edge0_[d][p]), q1 = std::size_t(edge1_[d][p]);
            const cplx u2 = hyp(st, d, init, mask, q1, 1, hyp1_[d][q1], t);
            slope -= (u2 - 2.0 * u[q1] + u[q0]) / (2.0 * h);
        }
        return slope;
    };

    SolverState pred = s;
    for (int d = 1; d <= cfg_.dmax; ++d) {
        const std::size_t g = grids_[d].size();
        const std::size_t banks = std::size_t(4) << d;
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < banks; ++b) {
            const unsigned init = unsigned(b >> d);
            const std::uint32_t mask = std::uint32_t(b & ((1u << d) - 1));
            const cplx* u = s.banks[d].data() + b * g;
            cplx* out = pred.banks[d].data() + b * g;
            for (std::size_t p = 0; p < g; ++p) {
                if (sums_[d][p] <= n - 2) {
                    const cplx u1 = u[next1_[d][p]];
                    const cplx u2 = next2_[d][p] >= 0 ? u[next2_[d][p]] : hyp(s, d, init, mask, p, 2, hyp2_[d][p], s.t);
                    out[p] = u[p] + tau * (-3.0 * u[p] + 4.0 * u1 - u2) / (2.0 * h);
                } else if (prev_[d][p] >= 0) {
                    const cplx up = hyp(s, d, init, mask, p, 1, hyp1_[d][p], s.t);
                    const cplx um = u[prev_[d][p]];
                    out[p] = u[p] + tau * (up - um) / (2.0 * h);
                } else {
                    out[p] = u[p] + tau * edge_slope(s, u, d, init, mask, p, s.t);
                }
            }
        }
    }

    std::vector<std::vector<cplx>> next(std::size_t(cfg_.dmax + 1));
    for (int d = 1; d <= cfg_.dmax; ++d) {
        const std::size_t g = grids_[d].size();
        const std::size_t banks = std::size_t(4) << d;
        next[d].resize(banks * g);
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < banks; ++b) {
            const unsigned init = unsigned(b >> d);
            const std::uint32_t mask = std::uint32_t(b & ((1u << d) - 1));
            const cplx* u = s.banks[d].data() + b * g;
            const cplx* v = pred.banks[d].data() + b * g;
            cplx* out = next[d].data() + b * g;
            for (std::size_t p = 0; p < g; ++p) {
                if (sums_[d][p] <= n - 2) {
                    const cplx v1 = v[next1_[d][p]];
                    const cplx v2 = next2_[d][p] >= 0 ? v[next2_[d][p]] : hyp(pred, d, init, mask, p, 2, hyp2_[d][p], s.t + tau);
                    out[p] = 0.5 * (u[p] + v[p] + tau * (-3.0 * v[p] + 4.0 * v1 - v2) / (2.0 * h));
                } else if (prev_[d][p] >= 0) {
                    const cplx up = hyp(pred, d, init, mask, p, 1, hyp1_[d][p], s.t + tau);
                    out[p] = 0.5 * (u[p] + v[p] + tau * (up - v[prev_[d][p]]) / (2.0 * h));
                } else {
                    out[p] = 0.5 * (u[p] + v[p] + tau * edge_slope(pred, v, d, init, mask, p, s.t + tau));
                }
            }
        }
    }
    for (int d = 1; d <= cfg_.dmax; ++d)
        s.banks[d].swap(next[d]);
}

void DebpiSolver::source_rhs(const SolverState& s, SolverState& out) const
{
    const int dmax = cfg_.dmax;
    for (int d = 0; d <= dmax; ++d) {
        const std::size_t g = grids_[d].size();
        const std::size_t banks = std::size_t(4) << d;
        const std::vector<cplx>& w = wcache_[d];
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < banks; ++b) {
            const unsigned init = unsigned(b >> d);
            const std::uint32_t mask = std::uint32_t(b & ((1u << d) - 1));
            const cplx* u = s.banks[d].data() + b * g;
            cplx* o = out.banks[d].data() + b * g;
            for (std::size_t p = 0; p < g; ++p)
                o[p] = -w[b * g + p] * u[p];
            if (d < dmax) {
                const cplx* up = s.banks[d + 1].data() + bank_offset(d + 1, toggled_init(init, Branch::plus), mask << 1);
                const cplx* um = s.banks[d + 1].data() + bank_offset(d + 1, toggled_init(init, Branch::minus), (mask << 1) | 1u);
                for (std::size_t p = 0; p < g; ++p) {
                    const std::size_t q = std::size_t(prepend0_[d][p]);
                    o[p] += um[q] + up[q];
                }
            } else if (cfg_.closure == Closure::interpolation) {
                for (std::uint32_t nb = 0; nb < 2; ++nb) {
                    const unsigned init2 = toggled_init(init, nb ? Branch::minus : Branch::plus);
                    const ClosureEntry* e = closure_.data() + (std::size_t(mask) * 2 + nb) * g;
                    const cplx* low = s.banks[d - 1].data();
                    const cplx* same = s.banks[d].data();
                    for (std::size_t p = 0; p < g; ++p) {
                        const cplx a = low[bank_offset(d - 1, init2, e[p].collapse_mask) + e[p].collapse_point];
                        const cplx c = same[bank_offset(d, init2, e[p].boundary_mask) + e[p].boundary_point];
                        o[p] += e[p].collapse_coeff * a + cplx(0.0, e[p].boundary_coeff) * c;
                    }
                }
            }
        }
    }
}

void DebpiSolver::source_full_step(SolverState& s) const
{
    const double dt = cfg_.dt;
    SolverState k = zero_state();
    SolverState stage = s;
    SolverState acc = s;

    auto axpy = [](std::vector<std::vector<cplx>>& y, const std::vector<std::vector<cplx>>& x, const std::vector<std::vector<cplx>>& base,
                   double a) {
        for (std::size_t d = 0; d < y.size(); ++d) {
            const std::size_t sz = y[d].size();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < sz; ++i)
                y[d][i] = base[d][i] + a * x[d][i];
        }
    };
    auto accumulate = [](std::vector<std::vector<cplx>>& y, const std::vector<std::vector<cplx>>& x, double a) {
        for (std::size_t d = 0; d < y.size(); ++d) {
            const std::size_t sz = y[d].size();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < sz; ++i)
                y[d][i] += a * x[d][i];
        }
    };

    source_rhs(s, k);
    accumulate(acc.banks, k.banks, dt / 6.0);
    axpy(stage.banks, k.banks, s.banks, dt / 2.0);
    source_rhs(stage, k);
    accumulate(acc.banks, k.banks, dt / 3.0);
    axpy(stage.banks, k.banks, s.banks, dt / 2.0);
    source_rhs(stage, k);
    accumulate(acc.banks, k.banks, dt / 3.0);
    axpy(stage.banks, k.banks, s.banks, dt);
    source_rhs(stage, k);
    accumulate(acc.banks, k.banks, dt / 6.0);
    s.banks.swap(acc.banks);
}

void DebpiSolver::strang_step(SolverState& s) const
{
    advection_half_step(s);
    source_full_step(s);
    s.t += cfg_.dt / 2.0;
    advection_half_step(s);
    s.t += cfg_.dt / 2.0;
}

DensityMatrix DebpiSolver::assemble_density(const SolverState& s) const
{
    std::array<cplx, 4> acc{};
    for (int d = 0; d <= cfg_.dmax; ++d) {
        const std::size_t g = grids_[d].size();
        const std::size_t banks = std::size_t(4) << d;
        std::vector<cplx> partial(banks);
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < banks; ++b) {
            const cplx* u = s.banks[d].data() + b * g;
            cplx sum = 0.0;
            for (std::size_t p = 0; p < g; ++p)
                sum += weights_[d][p] * u[p];
            if (d >= 1 && cfg_.quadrature == Quadrature::trapezoid) {
                // hypotenuse points with a nonzero last gap: A^{D-1} times the last flip factor
                const unsigned init = unsigned(b >> d);
                const std::uint32_t mask = std::uint32_t(b & ((1u << d) - 1));
                const std::size_t gl = grids_[d - 1].size();
                const cplx* low = s.banks[d - 1].data() + bank_offset(d - 1, init, mask & ((1u << (d - 1)) - 1u));
                cplx hs = 0.0;
                for (std::size_t p = 0; p < gl; ++p)
                    hs += hyp_weights_[d][p] * low[p];
                sum += flip_factor(branch_of(mask, d - 1)) * hs;
            }
            partial[b] = sum;
        }
        for (std::size_t b = 0; b < banks; ++b) {
            const PathSegmentKey key = PathSegmentKey::from_mask(PairState::from_code(unsigned(b >> d)), d, std::uint32_t(b & ((1u << d) - 1)));
            acc[final_state(key).code()] += partial[b];
        }
    }
    DensityMatrix rho;
    for (unsigned c = 0; c < 4; ++c) {
        const PairState ps = PairState::from_code(c);
        rho(ps.plus, ps.minus) = acc[c];
    }
    return rho;
}

DensityMatrix DebpiSolver::early_density(int j) const
{
    if (j < 0 || j > cfg_.n)
        throw std::invalid_argument("early density index must lie in [0, N]");
    if (j == 0)
        return cfg_.rho0;
    const double h = cfg_.h();
    std::array<cplx, 4> acc{};
    for (int d = 0; d <= cfg_.dmax; ++d) {
        // closed simplex sum <= j
        const SimplexGrid g(j + 1, d);
        const std::size_t banks = std::size_t(4) << d;
        const double hd = std::pow(h, d);
        std::vector<cplx> partial(banks);
#pragma omp parallel for schedule(dynamic)
        for (std::size_t b = 0; b < banks; ++b) {
            const PathSegmentKey key = PathSegmentKey::from_mask(PairState::from_code(unsigned(b >> d)), d, std::uint32_t(b & ((1u << d) - 1)));
            if (cfg_.rho0(key.init.plus, key.init.minus) == cplx(0.0))
                continue;
            std::vector<double> gaps(d);
            cplx sum = 0.0;
            for (std::size_t p = 0; p < g.size(); ++p) {
                const int* m = g.point_data(p);
                int total = 0;
                for (int i = 0; i < d; ++i) {
                    gaps[i] = m[i] * h;
                    total += m[i];
                }
                const double w = cfg_.quadrature == Quadrature::rectangle ? (total <= j - 1 ? 1.0 : 0.0) : trapezoid_weight(m, d, j);
                if (w == 0.0)
                    continue;
                const Segments seg = segments_from_gaps(key, gaps.data(), j * h);
                sum += w * amplitude_of(cfg_.system, cfg_.rho0, key, seg, [&](double u) { return lattice_g_[lattice_index(u)]; });
            }
            partial[b] = hd * sum;
        }
        for (std::size_t b = 0; b < banks; ++b) {
            const PathSegmentKey key = PathSegmentKey::from_mask(PairState::from_code(unsigned(b >> d)), d, std::uint32_t(b & ((1u << d) - 1)));
            acc[final_state(key).code()] += partial[b];
        }
    }
    DensityMatrix rho;
    for (unsigned c = 0; c < 4; ++c) {
        const PairState ps = PairState::from_code(c);
        rho(ps.plus, ps.minus) = acc[c];
    }
    return rho;
}

std::vector<std::pair<double, DensityMatrix>> debpi_run(const SolverConfig& cfg, int steps,
                                                         const std::function<void(double, const DensityMatrix&)>& on_row)
{
    if (steps < 0)
        throw std::invalid_argument("step count must be nonnegative");
    const DebpiSolver solver(cfg);
    std::vector<std::pair<double, DensityMatrix>> rows;
    auto emit = [&](double t, const DensityMatrix& rho) {
        rows.emplace_back(t, rho);
        if (on_row)
            on_row(t, rho);
    };
    for (int j = 0; j < cfg.n; ++j)
        emit(j * cfg.h(), solver.early_density(j));
    SolverState s = solver.initial_state();
    emit(cfg.T, solver.assemble_density(s));
    for (int k = 1; k <= steps; ++k) {
        solver.strang_step(s);
        emit(cfg.T + k * cfg.dt, solver.assemble_density(s));
    }
    return rows;
}

} // namespace spinpath
