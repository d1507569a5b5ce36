#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace otfair {

/// How a quantile table is evaluated between grid points. Step is the
/// canonical generalized-inverse convention; Linear is an opt-in alternative
/// for smoother test percentiles.
enum class Interp { kStep, kLinear };

/// Immutable empirical distribution over a sorted multiset of finite scores.
/// CDF is the right-continuous step function F(t) = #{z <= t}/n; the quantile
/// is its left-continuous generalized inverse F^{-1}(u) = inf{y : F(y) >= u}.
class EmpiricalDist {
public:
    EmpiricalDist() = default;

    /// Sorts and validates; throws std::invalid_argument on non-finite input.
    static EmpiricalDist from_unsorted(std::vector<double> values);
    /// Accepts an already-sorted vector; throws if unsorted or non-finite.
    static EmpiricalDist from_sorted(std::vector<double> values);

    bool empty() const { return values_.empty(); }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double min() const { return values_.front(); }
    double max() const { return values_.back(); }

    /// F(t): fraction of values <= t. Requires a non-empty distribution.
    double cdf(double t) const;

    /// Number of values <= t.
    std::size_t rank_leq(double t) const;

    /// F^{-1}(u) for u in [0,1]; u = 0 returns the minimum sample (rather
    /// than the measure-theoretic -inf) so outputs stay inside the support.
    double quantile(double u) const;

    /// Piecewise-linear CDF variant used by Interp::kLinear transport:
    /// 0 below the support, 1 at and above the max, linear between
    /// consecutive distinct sample points.
    double cdf_linear(double t) const;

private:
    std::vector<double> values_;
};

/// Quantile function tabulated on a strictly increasing probability grid in
/// (0, 1]. q is non-decreasing along the grid. Under step evaluation the
/// table represents the distribution putting mass grid[k]-grid[k-1] on q[k].
struct QuantileTable {
    std::vector<double> grid;
    std::vector<double> q;

    QuantileTable() = default;
    /// Validates grid monotonicity/range and q monotonicity.
    QuantileTable(std::vector<double> grid_in, std::vector<double> q_in);

    std::size_t size() const { return grid.size(); }

    /// q at the smallest grid point >= u; clamps to the ends outside the grid.
    double eval_step(double u) const;
    /// Linear interpolation in u, clamped to the ends.
    double eval_linear(double u) const;
    double eval(double u, Interp interp) const {
        return interp == Interp::kStep ? eval_step(u) : eval_linear(u);
    }
};

/// Exact squared Wasserstein-2 distance between empirical distributions:
/// the integral over (0,1] of the squared quantile difference, computed by
/// piecewise-constant integration over the merged rank breakpoints
/// {i/n_a} U {j/n_b}. For equal counts this reduces to the mean squared
/// difference of the sorted pairing.
double w2_squared(const EmpiricalDist& a, const EmpiricalDist& b);

/// W2^2 between an empirical distribution and the distribution represented by
/// a step-evaluated quantile table. Exact when the table grid contains the
/// breakpoints of the tabulated quantile function (true for merged rank
/// grids), since both quantile functions are then step functions whose jump
/// points all appear among the merged breakpoints.
double w2_squared_to_table(const EmpiricalDist& a, const QuantileTable& table);

/// Testing oracle: W2^2 as the minimum coupling cost, found without the
/// sorted-pairing shortcut. Equal counts are solved by exhaustive permutation
/// enumeration; unequal counts by refining both measures to lcm(n_a, n_b)
/// uniform atoms and solving the resulting assignment problem exactly
/// (Hungarian algorithm). Counts must be <= 8 each.
double w2_squared_bruteforce(const EmpiricalDist& a, const EmpiricalDist& b);

/// Deduplicated union of the rank grids {i/n_s : 1 <= i <= n_s} of all
/// distributions. Always ends at 1.0. Using it as a barycenter grid makes W2
/// integrals against the table exact.
std::vector<double> merged_rank_grid(std::span<const EmpiricalDist> dists);

/// Wasserstein-2 barycenter quantile function on the given grid:
/// q(u) = sum_s weights[s] * F_s^{-1}(u). Weights must be non-negative and
/// sum to 1 within 1e-9; grid must be strictly increasing in (0,1].
QuantileTable barycenter_quantiles(std::span<const EmpiricalDist> dists,
                                   std::span<const double> weights,
                                   std::vector<double> grid);

/// Monotone transport of a score onto the barycenter:
/// bary(F_source(z)), with F_source(z) = 0 mapped to the first grid point.
double transport_to_barycenter(const EmpiricalDist& source,
                               const QuantileTable& bary, double z,
                               Interp interp = Interp::kStep);

}  // namespace otfair
