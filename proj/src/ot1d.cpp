#include "otfair/ot1d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace otfair {

namespace {

void check_finite(const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("EmpiricalDist: values must be finite");
        }
    }
}

void require_nonempty(const EmpiricalDist& d, const char* op) {
    if (d.empty()) {
        throw std::invalid_argument(std::string(op) +
                                    ": empty empirical distribution");
    }
}

}  // namespace

EmpiricalDist EmpiricalDist::from_unsorted(std::vector<double> values) {
    check_finite(values);
    std::sort(values.begin(), values.end());
    EmpiricalDist d;
    d.values_ = std::move(values);
    return d;
}

EmpiricalDist EmpiricalDist::from_sorted(std::vector<double> values) {
    check_finite(values);
    if (!std::is_sorted(values.begin(), values.end())) {
        throw std::invalid_argument("EmpiricalDist: values not sorted");
    }
    EmpiricalDist d;
    d.values_ = std::move(values);
    return d;
}

std::size_t EmpiricalDist::rank_leq(double t) const {
    auto it = std::upper_bound(values_.begin(), values_.end(), t);
    return static_cast<std::size_t>(it - values_.begin());
}

double EmpiricalDist::cdf(double t) const {
    require_nonempty(*this, "cdf");
    return static_cast<double>(rank_leq(t)) /
           static_cast<double>(values_.size());
}

double EmpiricalDist::quantile(double u) const {
    require_nonempty(*this, "quantile");
    const std::size_t n = values_.size();
    if (u <= 0.0) return values_.front();
    if (u >= 1.0) return values_.back();
    // Smallest 1-based index i with i/n >= u, resolved by binary search on the
    // double-rounded rank grid so ties at representable ranks are exact.
    std::size_t lo = 1, hi = n;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (static_cast<double>(mid) / static_cast<double>(n) >= u) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return values_[lo - 1];
}

double EmpiricalDist::cdf_linear(double t) const {
    require_nonempty(*this, "cdf_linear");
    const std::size_t n = values_.size();
    if (t < values_.front()) return 0.0;
    if (t >= values_.back()) return 1.0;
    auto hi = std::upper_bound(values_.begin(), values_.end(), t);
    // values_[hi-1] <= t < values_[hi]; interpolate between the step levels.
    const std::size_t k = static_cast<std::size_t>(hi - values_.begin());
    const double f_lo = static_cast<double>(k) / static_cast<double>(n);
    const double f_hi = static_cast<double>(k + 1) / static_cast<double>(n);
    const double x_lo = values_[k - 1];
    const double x_hi = values_[k];
    if (x_hi == x_lo) return f_lo;
    return f_lo + (f_hi - f_lo) * (t - x_lo) / (x_hi - x_lo);
}

QuantileTable::QuantileTable(std::vector<double> grid_in,
                             std::vector<double> q_in)
    : grid(std::move(grid_in)), q(std::move(q_in)) {
    if (grid.empty() || grid.size() != q.size()) {
        throw std::invalid_argument("QuantileTable: grid/q size mismatch");
    }
    double prev = 0.0;
    for (double g : grid) {
        if (!(g > prev) || g > 1.0) {
            throw std::invalid_argument(
                "QuantileTable: grid must be strictly increasing in (0,1]");
        }
        prev = g;
    }
    for (std::size_t k = 1; k < q.size(); ++k) {
        if (q[k] < q[k - 1]) {
            throw std::invalid_argument("QuantileTable: q must be non-decreasing");
        }
    }
}

double QuantileTable::eval_step(double u) const {
    auto it = std::lower_bound(grid.begin(), grid.end(), u);
    if (it == grid.end()) return q.back();
    return q[static_cast<std::size_t>(it - grid.begin())];
}

double QuantileTable::eval_linear(double u) const {
    if (u <= grid.front()) return q.front();
    if (u >= grid.back()) return q.back();
    auto it = std::lower_bound(grid.begin(), grid.end(), u);
    const std::size_t k = static_cast<std::size_t>(it - grid.begin());
    const double g0 = grid[k - 1], g1 = grid[k];
    return q[k - 1] + (q[k] - q[k - 1]) * (u - g0) / (g1 - g0);
}

double w2_squared(const EmpiricalDist& a, const EmpiricalDist& b) {
    require_nonempty(a, "w2_squared");
    require_nonempty(b, "w2_squared");
    const std::size_t na = a.size(), nb = b.size();
    const auto va = a.values(), vb = b.values();
    // Walk the merged rank breakpoints {i/na} U {j/nb}. Breakpoints are
    // compared exactly as integer cross-products i*nb vs j*na.
    const double inv = 1.0 / (static_cast<double>(na) * static_cast<double>(nb));
    std::uint64_t ia = 1, ib = 1, prev = 0;
    double acc = 0.0;
    while (ia <= na && ib <= nb) {
        const std::uint64_t ra = ia * nb;
        const std::uint64_t rb = ib * na;
        const std::uint64_t cur = std::min(ra, rb);
        const double diff = va[ia - 1] - vb[ib - 1];
        acc += diff * diff * static_cast<double>(cur - prev) * inv;
        prev = cur;
        if (ra == cur) ++ia;
        if (rb == cur) ++ib;
    }
    return acc;
}

double w2_squared_to_table(const EmpiricalDist& a, const QuantileTable& table) {
    require_nonempty(a, "w2_squared_to_table");
    const std::size_t na = a.size();
    const auto va = a.values();
    double acc = 0.0;
    double prev = 0.0;
    std::size_t ia = 1, ig = 0;
    while (prev < 1.0) {
        const double ra = static_cast<double>(ia) / static_cast<double>(na);
        // Past the table end the step convention clamps to the last q value.
        const double rg = ig < table.grid.size() ? table.grid[ig] : 1.0;
        const double cur = std::min(std::min(ra, rg), 1.0);
        const double qv = ig < table.q.size() ? table.q[ig] : table.q.back();
        const double diff = va[ia - 1] - qv;
        acc += diff * diff * (cur - prev);
        prev = cur;
        if (ra == cur && ia < na) ++ia;
        if (rg == cur && ig < table.grid.size()) ++ig;
        if (cur >= 1.0) break;
    }
    return acc;
}

namespace {

// Exact assignment solver (Hungarian algorithm with potentials, O(n^3)).
// cost is n x n, row-major. Returns the minimum total assignment cost.
double hungarian_min_cost(const std::vector<double>& cost, std::size_t n) {
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // match[col] = row (1-based)
    for (std::size_t i = 1; i <= n; ++i) {
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        std::vector<std::size_t> way(n + 1, 0);
        std::size_t j0 = 0;
        match[0] = i;
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur =
                    cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        total += cost[(match[j] - 1) * n + (j - 1)];
    }
    return total;
}

}  // namespace

double w2_squared_bruteforce(const EmpiricalDist& a, const EmpiricalDist& b) {
    require_nonempty(a, "w2_squared_bruteforce");
    require_nonempty(b, "w2_squared_bruteforce");
    const std::size_t na = a.size(), nb = b.size();
    if (na > 8 || nb > 8) {
        throw std::invalid_argument(
            "w2_squared_bruteforce: counts must be <= 8");
    }
    const auto va = a.values(), vb = b.values();
    if (na == nb) {
        // All couplings between uniform equal-count empiricals are convex
        // combinations of permutation matchings; enumerate them all.
        std::vector<std::size_t> perm(na);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (std::size_t i = 0; i < na; ++i) {
                const double d = va[i] - vb[perm[i]];
                c += d * d;
            }
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best / static_cast<double>(na);
    }
    // Unequal counts: refine both to N = lcm(na, nb) atoms of mass 1/N each;
    // the transport LP over the refined uniform measures has the same optimum
    // and is an assignment problem, solved exactly.
    const std::size_t g = std::gcd(na, nb);
    const std::size_t N = na / g * nb;
    std::vector<double> xa(N), xb(N);
    for (std::size_t i = 0; i < N; ++i) {
        xa[i] = va[i / (N / na)];
        xb[i] = vb[i / (N / nb)];
    }
    std::vector<double> cost(N * N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            const double d = xa[i] - xb[j];
            cost[i * N + j] = d * d;
        }
    }
    return hungarian_min_cost(cost, N) / static_cast<double>(N);
}

std::vector<double> merged_rank_grid(std::span<const EmpiricalDist> dists) {
    std::vector<double> grid;
    std::size_t total = 0;
    for (const auto& d : dists) total += d.size();
    grid.reserve(total);
    for (const auto& d : dists) {
        const std::size_t n = d.size();
        for (std::size_t i = 1; i <= n; ++i) {
            grid.push_back(static_cast<double>(i) / static_cast<double>(n));
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

QuantileTable barycenter_quantiles(std::span<const EmpiricalDist> dists,
                                   std::span<const double> weights,
                                   std::vector<double> grid) {
    if (dists.empty() || dists.size() != weights.size()) {
        throw std::invalid_argument(
            "barycenter_quantiles: dists/weights size mismatch");
    }
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw std::invalid_argument(
                "barycenter_quantiles: negative weight");
        }
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw std::invalid_argument(
            "barycenter_quantiles: weights must sum to 1");
    }
    for (const auto& d : dists) require_nonempty(d, "barycenter_quantiles");
    const bool ascending = std::is_sorted(grid.begin(), grid.end());
    std::vector<double> q(grid.size(), 0.0);
    for (std::size_t s = 0; s < dists.size(); ++s) {
        if (weights[s] == 0.0) continue;
        if (ascending) {
            // Single merge pass: the quantile index is monotone in u, with
            // the same double comparisons as EmpiricalDist::quantile.
            const auto values = dists[s].values();
            const std::size_t n = values.size();
            std::size_t i = 1;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double u = grid[k];
                while (i < n &&
                       static_cast<double>(i) / static_cast<double>(n) < u) {
                    ++i;
                }
                q[k] += weights[s] * values[u <= 0.0 ? 0 : i - 1];
            }
        } else {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                q[k] += weights[s] * dists[s].quantile(grid[k]);
            }
        }
    }
    return QuantileTable(std::move(grid), std::move(q));
}

double transport_to_barycenter(const EmpiricalDist& source,
                               const QuantileTable& bary, double z,
                               Interp interp) {
    if (!std::isfinite(z)) {
        throw std::invalid_argument("transport_to_barycenter: non-finite score");
    }
    const double u =
        interp == Interp::kStep ? source.cdf(z) : source.cdf_linear(z);
    // u = 0 (z below the support) lands on the first grid point by the step
    // convention; eval handles it via clamping.
    return bary.eval(u, interp);
}

}  // namespace otfair
