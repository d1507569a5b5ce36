#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otfair/postprocess.hpp"

namespace otfair {

/// Thrown when an evaluation cannot produce a result for the given options
/// (e.g. no CF window reaches the per-group sample floor).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A prediction attached to the proxy/group it was made for.
struct PredRecord {
    double v = 0.0;
    int s = 0;
    double pred = 0.0;
    std::optional<double> y;
};

/// Options of the windowed conditional-unfairness estimate.
struct CfOptions {
    int grid_points = 50;
    double window_h = 0.05;
    int min_per_group = 10;
    /// Weight groups by their empirical frequency (matching the population
    /// definition) or uniformly.
    bool uniform_group_weights = false;
};

struct MetricsReport {
    double rmse = 0.0;
    bool has_rmse = false;
    double cf = 0.0;
    double dp = 0.0;
    int n_eval = 0;
    int windows_used = 0;

    /// Ratios against a named baseline report, when one was supplied.
    struct Relative {
        std::string baseline;
        double rmse = 0.0;
        double cf = 0.0;
        double dp = 0.0;
    };
    std::optional<Relative> relative;
};

/// Attaches method/baseline metric ratios to a report.
MetricsReport relative_to(MetricsReport report, const MetricsReport& baseline,
                          const std::string& baseline_name);

/// sqrt(mean squared error); lengths must match and be positive.
double rmse(const std::vector<double>& predictions,
            const std::vector<double>& outcomes);

/// Monte-Carlo Riemann sum of the conditional unfairness: at each grid
/// center v0 on [0,1], records with |v - v0| <= h form per-group local
/// distributions; windows where every group reaches min_per_group contribute
/// sum_s w_s W2^2(local group dist, local barycenter). Returns the mean over
/// valid windows and their count; throws if no window is valid.
std::pair<double, int> cf_unfairness(const std::vector<PredRecord>& records,
                                     const CfOptions& options = {});

/// Global demographic-parity violation: pairwise W2^2 for two groups;
/// weighted distance to the global barycenter for more.
double dp_violation(const std::vector<PredRecord>& records,
                    bool uniform_group_weights = false);

/// Full report over labeled predictions (RMSE omitted when no y present).
MetricsReport evaluate(const std::vector<PredRecord>& records,
                       const CfOptions& options = {});

struct LSweepPoint {
    int l = 0;
    double cf = 0.0;
    double rmse = 0.0;
    int windows_used = 0;
    bool failed = false;
    std::string error;
};

struct LSweep {
    std::vector<LSweepPoint> points;
    int l_star = 0;  // plug-in choice on the training records
};

/// Refits the exact post-processor at each L (same seed) on `train` and
/// evaluates on `test`; per-L failures are recorded and the sweep continues.
LSweep sweep_l(const std::vector<Record>& train,
               const std::vector<Record>& test,
               const std::vector<int>& l_values, const FitConfig& base_config,
               const CfOptions& options = {});

struct AlphaSweepPoint {
    double alpha = 0.0;
    double cf = 0.0;
    double rmse = 0.0;
    double dp = 0.0;
    int windows_used = 0;
};

/// Evaluates predict(alpha) on `test` for each alpha without refitting.
std::vector<AlphaSweepPoint> sweep_alpha(const FairModel& model,
                                         const std::vector<Record>& test,
                                         const std::vector<double>& alphas,
                                         const CfOptions& options = {});

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

}  // namespace otfair
