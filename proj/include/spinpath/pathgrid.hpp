// Continuous path segments on a memory window [0,T), simplex grids of flip gaps,
// and degree-of-freedom accounting.
//
// A segment starts in `init` at tau = 0 (the oldest end of the window) and flips
// on the branch given by signs[k] after the gap taus[k] following the previous flip.
#pragma once

#include "spinpath/spinsys.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spinpath {

enum class Branch : std::uint8_t { plus, minus };

constexpr char branch_char(Branch b) { return b == Branch::plus ? '+' : '-'; }

struct PathSegmentKey {
    PairState init;
    std::vector<Branch> signs;

    int flips() const { return static_cast<int>(signs.size()); }
    /// Bit k set when signs[k] is a minus flip.
    std::uint32_t sign_mask() const;
    static PathSegmentKey from_mask(PairState init, int flips, std::uint32_t mask);
    std::string to_string() const;
};

using FlipTimes = std::vector<double>;

PairState apply_flip(PairState s, Branch b);
PairState final_state(const PathSegmentKey& key);
/// State just after `count` flips.
PairState state_after(const PathSegmentKey& key, int count);

/// (h+(tau), h-(tau)); right-continuous at the flips.
PairState evaluate_path(const PathSegmentKey& key, const FlipTimes& times, double T, double tau);

/// Multi-indices (m_1..m_D), m_k >= 0, sum <= N-1, in lexicographic order.
class SimplexGrid {
public:
    SimplexGrid(int n, int dim);

    int n() const { return n_; }
    int dim() const { return dim_; }
    std::size_t size() const { return size_; }

    std::vector<int> point(std::size_t index) const;
    const int* point_data(std::size_t index) const { return points_.data() + index * std::size_t(dim_); }
    /// Rank of a multi-index with sum <= N-1 (throws otherwise).
    std::size_t index_of(const std::vector<int>& m) const { return index_of(m.data()); }
    std::size_t index_of(const int* m) const;
    /// Number of multi-indices of dimension dim with sum <= budget.
    static std::uint64_t count(int dim, int budget);

private:
    int n_;
    int dim_;
    std::size_t size_;
    std::vector<int> points_;
    std::vector<std::uint64_t> counts_; ///< count(k, b) at [k * n + b], 0 <= b < n
};

SimplexGrid enumerate_grid(int n, int dim);

std::uint64_t binomial(int n, int k);

/// states * sum_{D=0}^{dmax} 2^D * binomial(N+D, D), overflow-checked.
std::uint64_t ndof(int n, int dmax, int states = 4);

/// Complex values actually held by the solver banks: 4 * sum 2^D * binomial(N-1+D, D).
std::uint64_t stored_values(int n, int dmax);

struct MemoryReport {
    std::uint64_t debpi_dof = 0;
    std::uint64_t quapi_dof = 0;
    double ratio = 0.0;

    std::string to_json() const;
};

MemoryReport memory_report(int n, int dmax, int memory_steps);

} // namespace spinpath
