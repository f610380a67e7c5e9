#include "spinpath/pathgrid.hpp"

#include <json.hpp>

#include <limits>
#include <numeric>
#include <stdexcept>

namespace spinpath {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r))
        throw std::overflow_error("degree-of-freedom count overflows 64 bits");
    return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r))
        throw std::overflow_error("degree-of-freedom count overflows 64 bits");
    return r;
}

void enumerate(int dim, int budget, std::vector<int>& cur, std::vector<int>& out)
{
    if (int(cur.size()) == dim) {
        out.insert(out.end(), cur.begin(), cur.end());
        return;
    }
    for (int v = 0; v <= budget; ++v) {
        cur.push_back(v);
        enumerate(dim, budget - v, cur, out);
        cur.pop_back();
    }
}

} // namespace

std::uint32_t PathSegmentKey::sign_mask() const
{
    std::uint32_t m = 0;
    for (std::size_t k = 0; k < signs.size(); ++k)
        if (signs[k] == Branch::minus)
            m |= 1u << k;
    return m;
}

PathSegmentKey PathSegmentKey::from_mask(PairState init, int flips, std::uint32_t mask)
{
    PathSegmentKey key{init, {}};
    for (int k = 0; k < flips; ++k)
        key.signs.push_back((mask >> k) & 1u ? Branch::minus : Branch::plus);
    return key;
}

std::string PathSegmentKey::to_string() const
{
    std::string s = "(";
    s += init.plus == Spin::up ? "+1," : "-1,";
    s += init.minus == Spin::up ? "+1)" : "-1)";
    s += "[";
    for (Branch b : signs)
        s += branch_char(b);
    s += "]";
    return s;
}

PairState apply_flip(PairState s, Branch b)
{
    if (b == Branch::plus)
        s.plus = flipped(s.plus);
    else
        s.minus = flipped(s.minus);
    return s;
}

PairState state_after(const PathSegmentKey& key, int count)
{
    PairState s = key.init;
    for (int k = 0; k < count; ++k)
        s = apply_flip(s, key.signs[k]);
    return s;
}

PairState final_state(const PathSegmentKey& key)
{
    return state_after(key, key.flips());
}

PairState evaluate_path(const PathSegmentKey& key, const FlipTimes& times, double T, double tau)
{
    if (!(tau >= 0.0 && tau < T))
        throw std::invalid_argument("path evaluation point must lie in [0, T)");
    if (times.size() != key.signs.size())
        throw std::invalid_argument("flip time count does not match the key");
    double pos = 0.0;
    int applied = 0;
    for (double gap : times) {
        pos += gap;
        if (pos > tau)
            break;
        ++applied;
    }
    return state_after(key, applied);
}

std::uint64_t binomial(int n, int k)
{
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        // r * (n-k+i) is divisible by i
        const std::uint64_t g = std::gcd(r, std::uint64_t(i));
        r = checked_mul(r / g, std::uint64_t(n - k + i) / (i / g));
    }
    return r;
}

std::uint64_t SimplexGrid::count(int dim, int budget)
{
    if (budget < 0)
        return 0;
    return binomial(budget + dim, dim);
}

SimplexGrid::SimplexGrid(int n, int dim) : n_(n), dim_(dim)
{
    if (n < 1 || dim < 0)
        throw std::invalid_argument("simplex grid needs N >= 1 and D >= 0");
    size_ = count(dim, n - 1);
    counts_.resize(std::size_t(dim + 1) * std::size_t(n));
    for (int k = 0; k <= dim; ++k)
        for (int b = 0; b < n; ++b)
            counts_[std::size_t(k) * n + b] = count(k, b);
    std::vector<int> cur;
    points_.reserve(size_ * std::size_t(dim));
    enumerate(dim, n - 1, cur, points_);
}

std::vector<int> SimplexGrid::point(std::size_t index) const
{
    if (index >= size_)
        throw std::out_of_range("simplex grid index out of range");
    const int* p = point_data(index);
    return {p, p + dim_};
}

std::size_t SimplexGrid::index_of(const int* m) const
{
    int budget = n_ - 1;
    std::uint64_t rank = 0;
    for (int k = 0; k < dim_; ++k) {
        if (m[k] < 0 || m[k] > budget)
            throw std::out_of_range("multi-index is not on the simplex grid");
        // points with a smaller k-th coordinate and the same prefix:
        // sum_{v < m_k} count(dim-k-1, budget-v) = count(dim-k, budget) - count(dim-k, budget-m_k)
        const std::uint64_t* row = counts_.data() + std::size_t(dim_ - k) * n_;
        rank += row[budget] - (budget - m[k] >= 0 ? row[budget - m[k]] : 0);
        budget -= m[k];
    }
    return std::size_t(rank);
}

SimplexGrid enumerate_grid(int n, int dim)
{
    return SimplexGrid(n, dim);
}

std::uint64_t ndof(int n, int dmax, int states)
{
    if (n < 1 || dmax < 0 || states < 1)
        throw std::invalid_argument("ndof needs N >= 1, D_max >= 0, states >= 1");
    std::uint64_t sum = 0;
    for (int d = 0; d <= dmax; ++d) {
        if (d >= 63)
            throw std::overflow_error("degree-of-freedom count overflows 64 bits");
        sum = checked_add(sum, checked_mul(std::uint64_t{1} << d, binomial(n + d, d)));
    }
    return checked_mul(std::uint64_t(states), sum);
}

std::uint64_t stored_values(int n, int dmax)
{
    std::uint64_t sum = 0;
    for (int d = 0; d <= dmax; ++d)
        sum = checked_add(sum, checked_mul(std::uint64_t{1} << d, SimplexGrid::count(d, n - 1)));
    return checked_mul(4, sum);
}

std::string MemoryReport::to_json() const
{
    nlohmann::ordered_json j;
    j["debpi_dof"] = debpi_dof;
    j["quapi_dof"] = quapi_dof;
    j["ratio"] = ratio;
    return j.dump();
}

MemoryReport memory_report(int n, int dmax, int memory_steps)
{
    if (memory_steps < 1 || memory_steps > 31)
        throw std::invalid_argument("memory_steps must lie in [1, 31]");
    MemoryReport r;
    r.debpi_dof = ndof(n, dmax);
    r.quapi_dof = std::uint64_t{1} << (2 * memory_steps);
    r.ratio = double(r.quapi_dof) / double(r.debpi_dof);
    return r;
}

} // namespace spinpath
