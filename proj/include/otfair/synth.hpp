#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otfair/metrics.hpp"
#include "otfair/postprocess.hpp"
#include "otfair/rng.hpp"

namespace otfair {

enum class SynthKind { kBinary, kMultigroup };

/// Synthetic generator configuration. kBinary draws V ~ U(0,1), S ~ Bern(1/2)
/// and features X1 = (2S-1)V, X2 ~ U(-eps_x, eps_x) with Y = X1 + X2 + eps_y.
/// kMultigroup draws S uniform on {0..K-1} and X = 2S - (K-1) + V + eps_x
/// with Y = X + eps_y.
struct SynthConfig {
    SynthKind kind = SynthKind::kBinary;
    std::size_t n_train = 1000;
    std::size_t n_test = 10000;
    int k = 2;
    double eps_x = 0.5;
    double eps_y = 0.01;
    /// Gaussian noise added to the recorded proxy (clamped to [0,1]),
    /// for proxy-robustness studies. Features and outcomes keep the true v.
    double v_noise = 0.0;
    std::uint64_t seed = 0;
};

/// A generated observation: proxy, group, raw features, outcome.
struct DataRow {
    double v = 0.0;
    int s = 0;
    std::vector<double> x;
    double y = 0.0;
};

std::vector<DataRow> gen_binary(std::size_t n, double eps_x, double eps_y,
                                Rng& rng);

std::vector<DataRow> gen_multigroup(std::size_t n, int k, double eps_x,
                                    double eps_y, Rng& rng);

struct SynthDataset {
    std::vector<DataRow> train;
    std::vector<DataRow> test;
};

/// Train/test draw on independent derived streams of config.seed.
SynthDataset make_synth(const SynthConfig& config);

/// Linear model fitted by ridge-penalized least squares (intercept
/// unpenalized).
struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coef;
    double ridge = 0.0;

    double predict(std::span<const double> features) const;
};

/// Solves the ridge normal equations. Throws on a singular system when
/// ridge = 0 (suggesting ridge > 0).
LinearModel fit_ridge(const std::vector<std::vector<double>>& features,
                      const std::vector<double>& targets, double ridge);

/// Base-model feature vector (x..., v, s).
std::vector<double> base_features(const DataRow& row);

/// The aware black-box predictor of the benchmark: ridge 0.1 on (x..., v, s).
LinearModel fit_base_model(const std::vector<DataRow>& train);

/// Fair K baseline: ridge 0.1 of Y on V alone; counterfactually fair by
/// construction since the prediction depends on nothing but v.
LinearModel baseline_fair_k(const std::vector<DataRow>& train);

/// Converts generated rows plus a score model into post-processor records.
std::vector<Record> to_records(const std::vector<DataRow>& rows,
                               const LinearModel& score_model);

struct BenchConfig {
    SynthConfig synth;
    std::vector<std::string> methods = {"base", "fair_k", "wfr", "ours"};
    int repeats = 30;
    std::optional<double> budget;  // required by ours_relaxed
    CfOptions metrics;
    int min_cell = 10;
    int probe_l = 10;
    int lcdf_grid = 100;
    /// Fit the post-processing methods on pooled cell samples instead of
    /// split folds (the variant behind the published desk-scale numbers).
    bool pooled = false;
    /// Measure wall times. Off by default so identical configurations yield
    /// byte-identical CSV output.
    bool timings = false;
};

struct BenchRow {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    int k = 0;
    std::optional<int> l;
    std::optional<double> alpha;
    double rmse = 0.0;
    double cf = 0.0;
    double dp = 0.0;
    int windows_used = 0;
    double fit_ms = 0.0;
    double predict_ms = 0.0;
    bool failed = false;
    std::string error;
};

/// Mean and normal 99% confidence interval (mean +/- 2.58 sd/sqrt(B)).
struct MeanCi {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct BenchSummary {
    std::string method;
    MeanCi rmse, cf, dp;
    /// Per-seed method/base ratios, averaged.
    double rmse_rel = 0.0;
    double cf_rel = 0.0;
    double dp_rel = 0.0;
};

/// Runs the benchmark: per repeat, regenerate data with a derived seed,
/// train the base model, fit every requested method and evaluate on the test
/// draw. Per-method failures are reported in the row and the run continues.
std::vector<BenchRow> run_benchmark(const BenchConfig& config);

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows);

MeanCi mean_ci(const std::vector<double>& values);

/// CSV renderings (17 significant digits, deterministic).
std::string bench_rows_csv(const std::vector<BenchRow>& rows);
std::string bench_summary_csv(const std::vector<BenchSummary>& summaries);

/// Canonical float formatting used by every CSV/stdout surface.
std::string format_double(double value);

}  // namespace otfair
