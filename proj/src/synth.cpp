#include "otfair/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace otfair {

std::vector<DataRow> gen_binary(std::size_t n, double eps_x, double eps_y,
                                Rng& rng) {
    std::vector<DataRow> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DataRow row;
        row.v = rng.unit();
        row.s = rng.bernoulli_half() ? 1 : 0;
        const double sign = 2.0 * row.s - 1.0;
        const double x1 = sign * row.v;
        const double x2 = rng.uniform(-eps_x, eps_x);
        row.x = {x1, x2};
        row.y = x1 + x2 + rng.uniform(-eps_y, eps_y);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<DataRow> gen_multigroup(std::size_t n, int k, double eps_x,
                                    double eps_y, Rng& rng) {
    if (k < 2) {
        throw std::invalid_argument("gen_multigroup: need at least 2 groups");
    }
    std::vector<DataRow> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DataRow row;
        row.v = rng.unit();
        row.s = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const double x = 2.0 * row.s - (k - 1) + row.v + rng.uniform(-eps_x, eps_x);
        row.x = {x};
        row.y = x + rng.uniform(-eps_y, eps_y);
        rows.push_back(std::move(row));
    }
    return rows;
}

SynthDataset make_synth(const SynthConfig& config) {
    Rng train_rng(derive_seed(config.seed, stream::kTrainData));
    Rng test_rng(derive_seed(config.seed, stream::kTestData));
    SynthDataset data;
    if (config.kind == SynthKind::kBinary) {
        data.train = gen_binary(config.n_train, config.eps_x, config.eps_y, train_rng);
        data.test = gen_binary(config.n_test, config.eps_x, config.eps_y, test_rng);
    } else {
        data.train = gen_multigroup(config.n_train, config.k, config.eps_x,
                                    config.eps_y, train_rng);
        data.test = gen_multigroup(config.n_test, config.k, config.eps_x,
                                   config.eps_y, test_rng);
    }
    if (config.v_noise > 0.0) {
        Rng noise_rng(derive_seed(config.seed, stream::kProxyNoise));
        const auto perturb = [&](std::vector<DataRow>& rows) {
            for (DataRow& row : rows) {
                row.v = std::clamp(row.v + config.v_noise * noise_rng.normal(),
                                   0.0, 1.0);
            }
        };
        perturb(data.train);
        perturb(data.test);
    }
    return data;
}

double LinearModel::predict(std::span<const double> features) const {
    if (features.size() != coef.size()) {
        throw std::invalid_argument("LinearModel: feature count mismatch");
    }
    double value = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) value += coef[j] * features[j];
    return value;
}

LinearModel fit_ridge(const std::vector<std::vector<double>>& features,
                      const std::vector<double>& targets, double ridge) {
    if (features.size() < 2 || features.size() != targets.size()) {
        throw std::invalid_argument("fit_ridge: need at least 2 aligned rows");
    }
    if (ridge < 0.0) {
        throw std::invalid_argument("fit_ridge: ridge must be >= 0");
    }
    const std::size_t n = features.size();
    const std::size_t p = features.front().size();
    Eigen::MatrixXd design(n, p + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != p) {
            throw std::invalid_argument("fit_ridge: ragged feature rows");
        }
        design(i, 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) design(i, j + 1) = features[i][j];
        y(i) = targets[i];
    }
    Eigen::MatrixXd normal = design.transpose() * design;
    for (std::size_t j = 1; j <= p; ++j) normal(j, j) += ridge;  // intercept unpenalized
    Eigen::VectorXd rhs = design.transpose() * y;

    Eigen::VectorXd theta;
    if (ridge == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "fit_ridge: singular normal equations; use ridge > 0");
        }
        theta = lu.solve(rhs);
    } else {
        theta = normal.ldlt().solve(rhs);
    }
    LinearModel model;
    model.intercept = theta(0);
    model.coef.assign(theta.data() + 1, theta.data() + 1 + p);
    model.ridge = ridge;
    return model;
}

std::vector<double> base_features(const DataRow& row) {
    std::vector<double> f = row.x;
    f.push_back(row.v);
    f.push_back(static_cast<double>(row.s));
    return f;
}

namespace {

constexpr double kBaseRidge = 0.1;

LinearModel fit_on(const std::vector<DataRow>& train,
                   const std::function<std::vector<double>(const DataRow&)>& fx) {
    std::vector<std::vector<double>> features;
    std::vector<double> targets;
    features.reserve(train.size());
    targets.reserve(train.size());
    for (const DataRow& row : train) {
        features.push_back(fx(row));
        targets.push_back(row.y);
    }
    return fit_ridge(features, targets, kBaseRidge);
}

}  // namespace

LinearModel fit_base_model(const std::vector<DataRow>& train) {
    return fit_on(train, base_features);
}

LinearModel baseline_fair_k(const std::vector<DataRow>& train) {
    return fit_on(train, [](const DataRow& row) {
        return std::vector<double>{row.v};
    });
}

std::vector<Record> to_records(const std::vector<DataRow>& rows,
                               const LinearModel& score_model) {
    std::vector<Record> records;
    records.reserve(rows.size());
    for (const DataRow& row : rows) {
        Record r;
        r.v = row.v;
        r.s = row.s;
        r.score = score_model.predict(base_features(row));
        r.y = row.y;
        records.push_back(r);
    }
    return records;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct MethodResult {
    std::vector<double> predictions;
    std::optional<int> l;
    std::optional<double> alpha;
    double fit_ms = 0.0;
    double predict_ms = 0.0;
};

MethodResult run_method(const std::string& method, const BenchConfig& config,
                        std::uint64_t repeat_seed,
                        const std::vector<DataRow>& train,
                        const std::vector<DataRow>& test,
                        const std::vector<Record>& train_records,
                        const std::vector<Record>& test_records) {
    MethodResult result;
    if (method == "base") {
        result.alpha = 1.0;
        const auto start = Clock::now();
        result.predictions.reserve(test_records.size());
        for (const Record& r : test_records) result.predictions.push_back(r.score);
        result.predict_ms = elapsed_ms(start);
        return result;
    }
    if (method == "fair_k") {
        const auto fit_start = Clock::now();
        const LinearModel model = baseline_fair_k(train);
        result.fit_ms = elapsed_ms(fit_start);
        const auto predict_start = Clock::now();
        result.predictions.reserve(test.size());
        for (const DataRow& row : test) {
            const double f[] = {row.v};
            result.predictions.push_back(model.predict(f));
        }
        result.predict_ms = elapsed_ms(predict_start);
        return result;
    }
    if (method == "wfr" || method == "ours" || method == "ours_relaxed") {
        FitConfig fit_config;
        fit_config.seed = repeat_seed;
        fit_config.min_cell = config.min_cell;
        fit_config.probe_l = config.probe_l;
        fit_config.lcdf_grid = config.lcdf_grid;
        fit_config.pooled = config.pooled;
        if (method == "wfr") fit_config.l = 1;
        if (method == "ours_relaxed") {
            if (!config.budget) {
                throw std::invalid_argument(
                    "bench: ours_relaxed requires a budget");
            }
            fit_config.budget = *config.budget;
        }
        const auto fit_start = Clock::now();
        const FairModel model = fit(train_records, fit_config);
        result.fit_ms = elapsed_ms(fit_start);
        result.l = model.num_cells;
        result.alpha = model.alpha;
        const auto predict_start = Clock::now();
        result.predictions.reserve(test_records.size());
        for (const Record& r : test_records) {
            result.predictions.push_back(predict(model, r.v, r.s, r.score));
        }
        result.predict_ms = elapsed_ms(predict_start);
        return result;
    }
    throw std::invalid_argument("bench: unknown method '" + method + "'");
}

}  // namespace

std::vector<BenchRow> run_benchmark(const BenchConfig& config) {
    if (config.repeats < 1) {
        throw std::invalid_argument("bench: repeats must be >= 1");
    }
    std::vector<BenchRow> rows;
    for (int r = 0; r < config.repeats; ++r) {
        const std::uint64_t repeat_seed =
            config.synth.seed + static_cast<std::uint64_t>(r);
        SynthConfig synth = config.synth;
        synth.seed = repeat_seed;
        const SynthDataset data = make_synth(synth);
        const LinearModel base = fit_base_model(data.train);
        const std::vector<Record> train_records = to_records(data.train, base);
        const std::vector<Record> test_records = to_records(data.test, base);

        for (const std::string& method : config.methods) {
            BenchRow row;
            row.method = method;
            row.seed = repeat_seed;
            row.n = config.synth.n_train;
            row.k = config.synth.k;
            try {
                const MethodResult res =
                    run_method(method, config, repeat_seed, data.train, data.test,
                               train_records, test_records);
                row.l = res.l;
                row.alpha = res.alpha;
                if (config.timings) {
                    row.fit_ms = res.fit_ms;
                    row.predict_ms = res.predict_ms;
                }
                std::vector<PredRecord> preds;
                std::vector<double> p, y;
                preds.reserve(test_records.size());
                for (std::size_t i = 0; i < test_records.size(); ++i) {
                    const Record& rec = test_records[i];
                    preds.push_back({rec.v, rec.s, res.predictions[i], rec.y});
                    p.push_back(res.predictions[i]);
                    y.push_back(*rec.y);
                }
                row.rmse = rmse(p, y);
                auto [cf, used] = cf_unfairness(preds, config.metrics);
                row.cf = cf;
                row.windows_used = used;
                row.dp = dp_violation(preds, config.metrics.uniform_group_weights);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
                std::fprintf(stderr, "bench: %s seed %llu failed: %s\n",
                             method.c_str(),
                             static_cast<unsigned long long>(repeat_seed),
                             e.what());
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

MeanCi mean_ci(const std::vector<double>& values) {
    MeanCi ci;
    if (values.empty()) return ci;
    double sum = 0.0;
    for (double v : values) sum += v;
    ci.mean = sum / static_cast<double>(values.size());
    if (values.size() == 1) {
        ci.lo = ci.hi = ci.mean;
        return ci;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - ci.mean) * (v - ci.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    const double half = 2.58 * sd / std::sqrt(static_cast<double>(values.size()));
    ci.lo = ci.mean - half;
    ci.hi = ci.mean + half;
    return ci;
}

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows) {
    std::vector<std::string> methods;
    for (const BenchRow& row : rows) {
        if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) {
            methods.push_back(row.method);
        }
    }
    // Base metrics per seed, for the relative columns.
    std::vector<std::pair<std::uint64_t, const BenchRow*>> base_rows;
    for (const BenchRow& row : rows) {
        if (row.method == "base" && !row.failed) {
            base_rows.emplace_back(row.seed, &row);
        }
    }
    auto base_for = [&](std::uint64_t seed) -> const BenchRow* {
        for (const auto& [s, row] : base_rows) {
            if (s == seed) return row;
        }
        return nullptr;
    };

    std::vector<BenchSummary> summaries;
    for (const std::string& method : methods) {
        BenchSummary summary;
        summary.method = method;
        std::vector<double> rmses, cfs, dps, rel_rmse, rel_cf, rel_dp;
        for (const BenchRow& row : rows) {
            if (row.method != method || row.failed) continue;
            rmses.push_back(row.rmse);
            cfs.push_back(row.cf);
            dps.push_back(row.dp);
            if (const BenchRow* base = base_for(row.seed)) {
                if (base->rmse != 0.0) rel_rmse.push_back(row.rmse / base->rmse);
                if (base->cf != 0.0) rel_cf.push_back(row.cf / base->cf);
                if (base->dp != 0.0) rel_dp.push_back(row.dp / base->dp);
            }
        }
        summary.rmse = mean_ci(rmses);
        summary.cf = mean_ci(cfs);
        summary.dp = mean_ci(dps);
        summary.rmse_rel = mean_ci(rel_rmse).mean;
        summary.cf_rel = mean_ci(rel_cf).mean;
        summary.dp_rel = mean_ci(rel_dp).mean;
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::string bench_rows_csv(const std::vector<BenchRow>& rows) {
    std::string out =
        "method,seed,n,K,L,alpha,rmse,cf,dp,windows_used,fit_ms,predict_ms\n";
    for (const BenchRow& row : rows) {
        out += row.method;
        out += ',' + std::to_string(row.seed);
        out += ',' + std::to_string(row.n);
        out += ',' + std::to_string(row.k);
        out += ',';
        if (row.l) out += std::to_string(*row.l);
        out += ',';
        if (row.alpha) out += format_double(*row.alpha);
        if (row.failed) {
            out += ",nan,nan,nan,0,0,0\n";
            continue;
        }
        out += ',' + format_double(row.rmse);
        out += ',' + format_double(row.cf);
        out += ',' + format_double(row.dp);
        out += ',' + std::to_string(row.windows_used);
        out += ',' + format_double(row.fit_ms);
        out += ',' + format_double(row.predict_ms);
        out += '\n';
    }
    return out;
}

std::string bench_summary_csv(const std::vector<BenchSummary>& summaries) {
    std::string out =
        "method,rmse_mean,rmse_lo,rmse_hi,cf_mean,cf_lo,cf_hi,"
        "dp_mean,dp_lo,dp_hi,rmse_rel,cf_rel,dp_rel\n";
    for (const BenchSummary& s : summaries) {
        out += s.method;
        for (double v : {s.rmse.mean, s.rmse.lo, s.rmse.hi, s.cf.mean, s.cf.lo,
                         s.cf.hi, s.dp.mean, s.dp.lo, s.dp.hi, s.rmse_rel,
                         s.cf_rel, s.dp_rel}) {
            out += ',' + format_double(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace otfair
