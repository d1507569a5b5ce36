#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otfair/ot1d.hpp"
#include "otfair/partition.hpp"

namespace otfair {

/// Fitting configuration. Exactly one of alpha/budget may be set; with
/// neither the post-processor is exact (alpha = 0). l = nullopt selects the
/// plug-in L*.
struct FitConfig {
    std::optional<int> l;          // explicit interval count, or auto
    std::optional<double> alpha;   // fixed relaxation in [0,1]
    std::optional<double> budget;  // unfairness budget B >= 0
    int min_cell = 10;             // per-cell sample floor for the L* cap
    int probe_l = 10;              // probe discretization for the L_cdf estimate
    int lcdf_grid = 100;           // threshold grid size for the L_cdf estimate
    std::uint64_t seed = 0;        // drives the fold splits
    Interp interp = Interp::kStep;
    /// Estimate quantiles and CDFs from the full cell sample instead of
    /// disjoint halves. Halves the estimation variance, at the cost of the
    /// independence that the split-fold analysis assumes.
    bool pooled = false;
};

/// Fitted pieces of one proxy interval: per-group CDF fold distributions,
/// per-group quantile fold distributions, and the barycenter quantile table
/// over the cell's merged rank grid. Cell-groups with fewer than 2 samples
/// borrow both folds from the nearest non-degenerate cell of the same group;
/// fallback[s] names the donor cell (== own index when not degenerate).
struct CellModel {
    std::vector<EmpiricalDist> quantile_fold;  // per group, from fold 0
    std::vector<EmpiricalDist> cdf_fold;       // per group, from fold 1
    std::vector<int> fallback;                 // donor cell per group
    QuantileTable bary;
    /// Derived cache: pred[s][j] = bary evaluated at rank j/|cdf_fold|,
    /// so a step-mode prediction is one rank lookup. Rebuilt by finalize(),
    /// never serialized.
    std::vector<std::vector<double>> pred;
};

/// The fitted post-processor.
struct FairModel {
    int num_groups = 0;
    int num_cells = 0;
    std::vector<double> weights;       // empirical group weights
    std::vector<CellModel> cells;
    double alpha = 0.0;                // relaxation actually applied
    double m_hat = 0.0;                // score clipping bound
    double lcdf_hat = 0.0;             // plug-in Lipschitz constant (0 if not estimated)
    bool lcdf_estimated = false;
    int l_star = 1;                    // plug-in L* (== num_cells when auto)
    double delta_star = 0.0;           // theoretical unfairness bound
    double u_hat_bb = 0.0;             // empirical black-box unfairness at the fitted L
    std::uint64_t seed = 0;
    Interp interp = Interp::kStep;
    FitConfig config;                       // echo of the fit request
    std::vector<std::string> group_labels;  // optional, used by the CLI

    Partition partition() const { return Partition(num_cells); }

    /// Rebuilds the per-cell prediction tables. fit and the JSON loader call
    /// this; hand-assembled models may skip it (prediction then takes the
    /// slower direct path).
    void finalize();

    /// Number of (cell, group) pairs served by a donor cell.
    int degenerate_cells() const;

    /// Per-group quantile table on the cell's barycenter grid; satisfies
    /// bary.q(u) = sum_s weights[s] * group_quantile_table(l, s).q(u).
    QuantileTable group_quantile_table(int cell, int group) const;
};

/// Plug-in estimate of the Lipschitz constant of v -> F_{score|v,s}(t):
/// max over groups, adjacent probe-cell pairs and a threshold grid of
/// |F_l(t) - F_{l+1}(t)| / (1/probe_l). Pairs where either cell holds fewer
/// than 10 samples of the group are skipped. Floored at 1e-6.
/// Throws if n < 2*K*probe_l or if every pair was skipped.
double estimate_lcdf(const std::vector<Record>& records, int probe_l,
                     int grid_size);

/// Plug-in interval count floor((8 lcdf^2 n / (K ln(2Kn)))^{1/3}), capped at
/// floor(n / (K min_cell)) and floored at 1.
int select_l_star(std::size_t n, int num_groups, double lcdf_hat, int min_cell);

/// Theoretical unfairness bound 40 m^2 (lcdf K ln(2K))^{1/3} (ln(n)/n)^{1/3}.
double compute_delta_star(std::size_t n, int num_groups, double lcdf_hat,
                          double m_hat);

/// Budget rule: 0 if delta >= budget, else min{1, ((budget-delta)/(2 u_hat))^2}
/// (already-fair u_hat <= 0 yields 1).
double calibrate_alpha(double budget, double delta, double u_hat);

/// Empirical unfairness of the scores at discretization `partition`:
/// sum_l p_l sum_s w_s W2^2(full-cell group dist, cell barycenter).
/// Empty cell-groups borrow the nearest non-empty cell of the same group.
double empirical_unfairness_bb(const std::vector<Record>& records,
                               const Partition& partition,
                               const std::vector<double>& weights,
                               int num_groups);

/// Fits the discretized post-processor (and, with a budget, calibrates the
/// relaxation). Requires every group index in [0, max s] to appear and each
/// group to hold at least 2 records.
FairModel fit(const std::vector<Record>& records, const FitConfig& config);

/// Post-processed prediction sqrt(a)*score + (1-sqrt(a))*fair with the
/// model's own alpha.
double predict(const FairModel& model, double v, int s, double score);

/// Same, overriding alpha; used for frontier sweeps without refitting.
double predict_with_alpha(const FairModel& model, double v, int s,
                          double score, double alpha);

/// Self-describing JSON document; round-trips predictions bit-exactly.
std::string to_json(const FairModel& model);
FairModel model_from_json(const std::string& text);

void save_model(const FairModel& model, const std::string& path);
FairModel load_model(const std::string& path);

}  // namespace otfair
