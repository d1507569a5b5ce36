#include "otfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "otfair/ot1d.hpp"

namespace otfair {

namespace {

int infer_num_groups(const std::vector<PredRecord>& records) {
    int max_s = -1;
    for (const auto& r : records) {
        if (r.s < 0) throw std::invalid_argument("metrics: negative group index");
        max_s = std::max(max_s, r.s);
    }
    return max_s + 1;
}

std::vector<double> group_weights(const std::vector<PredRecord>& records,
                                  int num_groups, bool uniform) {
    std::vector<double> w(num_groups, 0.0);
    if (uniform) {
        std::fill(w.begin(), w.end(), 1.0 / num_groups);
        return w;
    }
    for (const auto& r : records) w[r.s] += 1.0;
    for (double& x : w) x /= static_cast<double>(records.size());
    return w;
}

// Weighted sum of squared W2 distances from the group distributions to their
// barycenter, on the merged rank grid (exact).
double barycenter_dispersion(const std::vector<EmpiricalDist>& dists,
                             const std::vector<double>& weights) {
    const QuantileTable bary =
        barycenter_quantiles(dists, weights, merged_rank_grid(dists));
    double total = 0.0;
    for (std::size_t s = 0; s < dists.size(); ++s) {
        total += weights[s] * w2_squared_to_table(dists[s], bary);
    }
    return total;
}

}  // namespace

double rmse(const std::vector<double>& predictions,
            const std::vector<double>& outcomes) {
    if (predictions.empty() || predictions.size() != outcomes.size()) {
        throw std::invalid_argument("rmse: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - outcomes[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

std::pair<double, int> cf_unfairness(const std::vector<PredRecord>& records,
                                     const CfOptions& options) {
    if (records.empty()) {
        throw std::invalid_argument("cf_unfairness: no records");
    }
    if (!(options.window_h > 0.0 && options.window_h <= 0.5)) {
        throw std::invalid_argument("cf_unfairness: window_h must be in (0, 0.5]");
    }
    if (options.grid_points < 1) {
        throw std::invalid_argument("cf_unfairness: grid_points must be >= 1");
    }
    const int num_groups = infer_num_groups(records);
    const std::vector<double> weights =
        group_weights(records, num_groups, options.uniform_group_weights);

    double total = 0.0;
    int used = 0;
    for (int g = 0; g < options.grid_points; ++g) {
        const double v0 =
            options.grid_points == 1
                ? 0.5
                : static_cast<double>(g) / (options.grid_points - 1);
        std::vector<std::vector<double>> local(num_groups);
        for (const auto& r : records) {
            if (std::abs(r.v - v0) <= options.window_h) {
                local[r.s].push_back(r.pred);
            }
        }
        const bool valid = std::all_of(
            local.begin(), local.end(), [&](const std::vector<double>& g_vals) {
                return g_vals.size() >=
                       static_cast<std::size_t>(options.min_per_group);
            });
        if (!valid) continue;
        std::vector<EmpiricalDist> dists;
        dists.reserve(num_groups);
        for (auto& vals : local) {
            dists.push_back(EmpiricalDist::from_unsorted(std::move(vals)));
        }
        total += barycenter_dispersion(dists, weights);
        ++used;
    }
    if (used == 0) {
        throw InfeasibleError(
            "cf_unfairness: no window had enough samples per group; "
            "increase window_h or lower min_per_group");
    }
    return {total / used, used};
}

double dp_violation(const std::vector<PredRecord>& records,
                    bool uniform_group_weights) {
    if (records.empty()) {
        throw std::invalid_argument("dp_violation: no records");
    }
    const int num_groups = infer_num_groups(records);
    std::vector<std::vector<double>> by_group(num_groups);
    for (const auto& r : records) by_group[r.s].push_back(r.pred);
    for (int s = 0; s < num_groups; ++s) {
        if (by_group[s].empty()) {
            throw std::runtime_error("dp_violation: group " + std::to_string(s) +
                                     " has no records");
        }
    }
    std::vector<EmpiricalDist> dists;
    dists.reserve(num_groups);
    for (auto& vals : by_group) {
        dists.push_back(EmpiricalDist::from_unsorted(std::move(vals)));
    }
    if (num_groups == 1) return 0.0;
    if (num_groups == 2) return w2_squared(dists[0], dists[1]);
    const std::vector<double> weights =
        group_weights(records, num_groups, uniform_group_weights);
    return barycenter_dispersion(dists, weights);
}

MetricsReport evaluate(const std::vector<PredRecord>& records,
                       const CfOptions& options) {
    MetricsReport report;
    report.n_eval = static_cast<int>(records.size());
    std::vector<double> preds, outcomes;
    for (const auto& r : records) {
        if (r.y) {
            preds.push_back(r.pred);
            outcomes.push_back(*r.y);
        }
    }
    if (!preds.empty() && preds.size() == records.size()) {
        report.rmse = rmse(preds, outcomes);
        report.has_rmse = true;
    }
    auto [cf, used] = cf_unfairness(records, options);
    report.cf = cf;
    report.windows_used = used;
    report.dp = dp_violation(records, options.uniform_group_weights);
    return report;
}

LSweep sweep_l(const std::vector<Record>& train,
               const std::vector<Record>& test,
               const std::vector<int>& l_values, const FitConfig& base_config,
               const CfOptions& options) {
    LSweep sweep;
    try {
        FitConfig auto_config = base_config;
        auto_config.l.reset();
        auto_config.alpha.reset();
        auto_config.budget.reset();
        sweep.l_star = fit(train, auto_config).l_star;
    } catch (const std::exception&) {
        sweep.l_star = 0;  // marker unavailable; the curve is still useful
    }
    for (int l : l_values) {
        LSweepPoint point;
        point.l = l;
        try {
            FitConfig config = base_config;
            config.l = l;
            config.alpha.reset();
            config.budget.reset();
            const FairModel model = fit(train, config);
            std::vector<PredRecord> preds;
            std::vector<double> p, y;
            preds.reserve(test.size());
            for (const Record& r : test) {
                const double value = predict(model, r.v, r.s, r.score);
                preds.push_back({r.v, r.s, value, r.y});
                if (r.y) {
                    p.push_back(value);
                    y.push_back(*r.y);
                }
            }
            auto [cf, used] = cf_unfairness(preds, options);
            point.cf = cf;
            point.windows_used = used;
            if (!p.empty()) point.rmse = rmse(p, y);
        } catch (const std::exception& e) {
            point.failed = true;
            point.error = e.what();
        }
        sweep.points.push_back(std::move(point));
    }
    return sweep;
}

std::vector<AlphaSweepPoint> sweep_alpha(const FairModel& model,
                                         const std::vector<Record>& test,
                                         const std::vector<double>& alphas,
                                         const CfOptions& options) {
    std::vector<AlphaSweepPoint> points;
    points.reserve(alphas.size());
    for (double alpha : alphas) {
        AlphaSweepPoint point;
        point.alpha = alpha;
        std::vector<PredRecord> preds;
        std::vector<double> p, y;
        preds.reserve(test.size());
        for (const Record& r : test) {
            const double value = predict_with_alpha(model, r.v, r.s, r.score, alpha);
            preds.push_back({r.v, r.s, value, r.y});
            if (r.y) {
                p.push_back(value);
                y.push_back(*r.y);
            }
        }
        auto [cf, used] = cf_unfairness(preds, options);
        point.cf = cf;
        point.windows_used = used;
        point.dp = dp_violation(preds, options.uniform_group_weights);
        if (!p.empty()) point.rmse = rmse(p, y);
        points.push_back(std::move(point));
    }
    return points;
}

MetricsReport relative_to(MetricsReport report, const MetricsReport& baseline,
                          const std::string& baseline_name) {
    MetricsReport::Relative rel;
    rel.baseline = baseline_name;
    rel.rmse = baseline.rmse != 0.0 ? report.rmse / baseline.rmse : 0.0;
    rel.cf = baseline.cf != 0.0 ? report.cf / baseline.cf : 0.0;
    rel.dp = baseline.dp != 0.0 ? report.dp / baseline.dp : 0.0;
    report.relative = std::move(rel);
    return report;
}

std::string report_to_json(const MetricsReport& report) {
    nlohmann::json j;
    if (report.has_rmse) {
        j["rmse"] = report.rmse;
    } else {
        j["rmse"] = nullptr;
    }
    j["cf"] = report.cf;
    j["dp"] = report.dp;
    j["n_eval"] = report.n_eval;
    j["windows_used"] = report.windows_used;
    if (report.relative) {
        j["relative"] = {{"baseline", report.relative->baseline},
                         {"rmse", report.relative->rmse},
                         {"cf", report.relative->cf},
                         {"dp", report.relative->dp}};
    }
    return j.dump();
}

MetricsReport report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    MetricsReport report;
    if (!j.at("rmse").is_null()) {
        report.rmse = j.at("rmse").get<double>();
        report.has_rmse = true;
    }
    report.cf = j.at("cf").get<double>();
    report.dp = j.at("dp").get<double>();
    report.n_eval = j.at("n_eval").get<int>();
    report.windows_used = j.at("windows_used").get<int>();
    return report;
}

}  // namespace otfair
