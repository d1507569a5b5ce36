#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "otfair/metrics.hpp"
#include "otfair/postprocess.hpp"
#include "otfair/rng.hpp"
#include "otfair/synth.hpp"

using namespace otfair;

namespace {

// Scores drawn identically across groups given v: an already-fair black box.
std::vector<Record> fair_scores(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Record> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Record r;
        r.v = rng.unit();
        r.s = rng.bernoulli_half() ? 1 : 0;
        r.score = r.v + rng.uniform(-0.25, 0.25);
        records.push_back(r);
    }
    return records;
}

std::vector<Record> binary_records(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto rows = gen_binary(n, 0.5, 0.01, rng);
    const LinearModel base = fit_base_model(rows);
    return to_records(rows, base);
}

double mean_cf(const FairModel& model, const std::vector<Record>& test,
               double alpha) {
    std::vector<PredRecord> preds;
    preds.reserve(test.size());
    for (const Record& r : test) {
        preds.push_back({r.v, r.s, predict_with_alpha(model, r.v, r.s, r.score, alpha), r.y});
    }
    return cf_unfairness(preds).first;
}

}  // namespace

TEST_CASE("select_l_star matches the plug-in formula and cap") {
    CHECK(select_l_star(1000, 2, 1.0, 10) == 7);
    CHECK(select_l_star(100, 2, 2.5, 10) == 5);  // formula gives 7, cap binds at 5
    CHECK(select_l_star(1000, 2, 1e-6, 10) == 1);
    CHECK_THROWS_AS(select_l_star(1, 2, 1.0, 10), std::invalid_argument);
}

TEST_CASE("delta_star arithmetic and scalings") {
    CHECK(compute_delta_star(3, 2, 1.0, 1.0) ==
          doctest::Approx(40.203408500872364).epsilon(1e-12));
    double prev = compute_delta_star(3, 2, 1.0, 1.0);
    for (std::size_t n : {10, 100, 1000, 10000}) {
        const double cur = compute_delta_star(n, 2, 1.0, 1.0);
        CHECK(cur < prev);
        prev = cur;
    }
    const double base = compute_delta_star(50, 3, 1.5, 1.0);
    CHECK(compute_delta_star(50, 3, 1.5, 2.0) == doctest::Approx(4.0 * base));
}

TEST_CASE("calibrate_alpha implements the budget rule") {
    CHECK(calibrate_alpha(0.5, 0.5, 0.4) == 0.0);
    CHECK(calibrate_alpha(0.5, 0.6, 0.4) == 0.0);
    CHECK(calibrate_alpha(0.5, 0.1, 0.4) == doctest::Approx(0.25));
    CHECK(calibrate_alpha(100.0, 0.0, 0.1) == 1.0);  // capped
    CHECK(calibrate_alpha(0.5, 0.1, 0.0) == 1.0);    // already fair
    CHECK_THROWS_AS(calibrate_alpha(-1.0, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("estimate_lcdf limiting cases") {
    // Constant scores: identical CDFs in every cell, floored at 1e-6.
    std::vector<Record> constant;
    for (int i = 0; i < 500; ++i) {
        constant.push_back({(i + 0.5) / 500.0, i % 2, 3.0, {}});
    }
    CHECK(estimate_lcdf(constant, 10, 100) == doctest::Approx(1e-6));

    // score = v exactly: the CDF jumps by 1 across one cell width.
    std::vector<Record> dirac;
    for (int i = 0; i < 2000; ++i) {
        const double v = (i + 0.5) / 2000.0;
        dirac.push_back({v, i % 2, v, {}});
    }
    const double lcdf = estimate_lcdf(dirac, 10, 100);
    CHECK(lcdf >= 1.0);
    CHECK(lcdf == doctest::Approx(10.0).epsilon(0.15));

    CHECK_THROWS_AS(estimate_lcdf(constant, 200, 100), std::invalid_argument);

    // Enough records overall, but every adjacent pair starved below 10.
    std::vector<Record> sparse;
    for (int i = 0; i < 50; ++i) {
        sparse.push_back({(i + 0.5) / 50.0, i % 2, 0.1 * i, {}});
    }
    CHECK_THROWS_AS(estimate_lcdf(sparse, 10, 100), std::runtime_error);
}

TEST_CASE("estimate_lcdf on the synthetic generator stays in band") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto records = binary_records(10000, seed);
        const double lcdf = estimate_lcdf(records, 10, 100);
        CHECK(lcdf >= 0.5);
        CHECK(lcdf <= 4.0);
    }
}

TEST_CASE("fit validates its contract") {
    std::vector<Record> records = binary_records(200, 9);
    FitConfig config;
    config.alpha = 0.5;
    config.budget = 0.5;
    CHECK_THROWS_AS(fit(records, config), std::invalid_argument);

    FitConfig zero_l;
    zero_l.l = 0;
    CHECK_THROWS_AS(fit(records, zero_l), std::invalid_argument);

    // A group index that never occurs.
    std::vector<Record> gap = records;
    for (Record& r : gap) {
        if (r.s == 1) r.s = 2;
    }
    FitConfig two_cells;
    two_cells.l = 2;
    CHECK_THROWS_AS(fit(gap, two_cells), std::runtime_error);

    CHECK_THROWS_AS(fit({}, FitConfig{}), std::invalid_argument);
}

TEST_CASE("single-group model with per-cell-constant scores is the identity") {
    std::vector<Record> records;
    for (int i = 0; i < 40; ++i) {
        const double v = (i + 0.5) / 40.0;
        records.push_back({v, 0, std::floor(v * 4.0), {}});
    }
    FitConfig config;
    config.l = 4;
    const FairModel model = fit(records, config);
    for (const Record& r : records) {
        CHECK(predict(model, r.v, r.s, r.score) == r.score);
    }
}

TEST_CASE("relaxation identities hold exactly at the predictor level") {
    const auto records = binary_records(1000, 3);
    FitConfig config;
    config.l = 8;
    config.seed = 5;
    const FairModel model = fit(records, config);
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double root = std::sqrt(alpha);
        for (std::size_t i = 0; i < records.size(); i += 97) {
            const Record& r = records[i];
            const double fair = predict_with_alpha(model, r.v, r.s, r.score, 0.0);
            const double mixed = predict_with_alpha(model, r.v, r.s, r.score, alpha);
            CHECK(mixed == root * r.score + (1.0 - root) * fair);
        }
    }
    const Record& r = records[0];
    CHECK(predict_with_alpha(model, r.v, r.s, r.score, 1.0) == r.score);
    CHECK(predict_with_alpha(model, r.v, r.s, r.score, 0.25) ==
          doctest::Approx(0.5 * r.score +
                          0.5 * predict_with_alpha(model, r.v, r.s, r.score, 0.0)));
}

TEST_CASE("exact predictions stay inside the clipping bound and preserve rank") {
    const auto records = binary_records(2000, 17);
    FitConfig config;
    const FairModel model = fit(records, config);
    double prev = -1e300;
    for (double score = -3.0; score <= 3.0; score += 0.01) {
        const double out = predict_with_alpha(model, 0.37, 0, score, 0.0);
        CHECK(out >= -model.m_hat);
        CHECK(out <= model.m_hat);
        CHECK(out >= prev);
        prev = out;
    }
    CHECK_THROWS_AS(predict(model, 0.5, 9, 0.0), std::invalid_argument);
}

TEST_CASE("cell barycenter equals the weighted per-group quantiles") {
    const auto records = binary_records(1500, 23);
    FitConfig config;
    config.l = 6;
    const FairModel model = fit(records, config);
    for (int l = 0; l < model.num_cells; ++l) {
        std::vector<QuantileTable> tables;
        for (int s = 0; s < model.num_groups; ++s) {
            tables.push_back(model.group_quantile_table(l, s));
        }
        const QuantileTable& bary = model.cells[l].bary;
        for (std::size_t k = 0; k < bary.size(); ++k) {
            double expected = 0.0;
            for (int s = 0; s < model.num_groups; ++s) {
                expected += model.weights[s] * tables[s].q[k];
            }
            CHECK(bary.q[k] == doctest::Approx(expected).epsilon(1e-12));
        }
        for (double qv : bary.q) {
            CHECK(qv >= -model.m_hat);
            CHECK(qv <= model.m_hat);
        }
    }
}

TEST_CASE("degenerate cell-groups borrow the nearest donor, lower ties first") {
    // Group 1 only inhabits the middle cell; cells 0 and 2 must borrow it.
    std::vector<Record> records;
    for (int i = 0; i < 30; ++i) {
        records.push_back({(i + 0.5) / 30.0, 0, static_cast<double>(i), {}});
    }
    records.push_back({0.40, 1, 1.0, {}});
    records.push_back({0.45, 1, 2.0, {}});
    records.push_back({0.55, 1, 3.0, {}});
    FitConfig config;
    config.l = 3;
    const FairModel model = fit(records, config);
    CHECK(model.cells[0].fallback[1] == 1);
    CHECK(model.cells[2].fallback[1] == 1);
    CHECK(model.cells[1].fallback[1] == 1);
    CHECK(model.cells[0].fallback[0] == 0);
    CHECK(model.degenerate_cells() == 2);

    // A group with a single record overall cannot be fitted at all.
    std::vector<Record> sparse = records;
    sparse.erase(sparse.end() - 2, sparse.end());
    CHECK_THROWS_AS(fit(sparse, config), std::runtime_error);
}

TEST_CASE("empirical_unfairness_bb on the spec instances") {
    std::vector<Record> records = {
        {0.5, 0, 0.0, {}}, {0.5, 0, 1.0, {}}, {0.5, 1, 10.0, {}}, {0.5, 1, 11.0, {}},
    };
    const std::vector<double> weights = {0.5, 0.5};
    CHECK(empirical_unfairness_bb(records, Partition(1), weights, 2) ==
          doctest::Approx(25.0));

    // Identical group distributions in every cell.
    std::vector<Record> same;
    for (int i = 0; i < 100; ++i) {
        same.push_back({i / 100.0, 0, static_cast<double>(i % 5), {}});
        same.push_back({i / 100.0, 1, static_cast<double>(i % 5), {}});
    }
    CHECK(empirical_unfairness_bb(same, Partition(5), weights, 2) ==
          doctest::Approx(0.0));

    // W2^2 homogeneity: scaling all scores by c scales the value by c^2.
    std::vector<Record> scaled = records;
    for (Record& r : scaled) r.score *= 3.0;
    CHECK(empirical_unfairness_bb(scaled, Partition(1), weights, 2) ==
          doctest::Approx(9.0 * 25.0));
}

TEST_CASE("budget mode follows Algorithm 2") {
    const auto records = binary_records(1000, 29);
    FitConfig small_budget;
    small_budget.budget = 1e-6;  // far below delta*
    const FairModel capped = fit(records, small_budget);
    CHECK(capped.alpha == 0.0);
    CHECK(capped.delta_star >= 1e-6);

    FitConfig big_budget;
    big_budget.budget = 1e6;  // far above delta*: alpha approaches/hits 1
    const FairModel relaxed = fit(records, big_budget);
    CHECK(relaxed.alpha ==
          calibrate_alpha(1e6, relaxed.delta_star, relaxed.u_hat_bb));
    CHECK(relaxed.alpha == 1.0);
}

TEST_CASE("already-fair scores: unfairness and edits vanish with n") {
    double prev_u = 1e300;
    double prev_edit = 1e300;
    for (std::size_t n : {1000, 10000, 100000}) {
        const auto records = fair_scores(n, 71);
        FitConfig config;
        config.seed = 7;
        const FairModel model = fit(records, config);
        CHECK(model.u_hat_bb < prev_u);
        double edit = 0.0;
        for (const Record& r : records) {
            const double d = predict(model, r.v, r.s, r.score) - r.score;
            edit += d * d;
        }
        edit /= static_cast<double>(n);
        CHECK(edit < prev_edit);
        prev_u = model.u_hat_bb;
        prev_edit = edit;
    }
    CHECK(prev_u < 5e-3);
    CHECK(prev_edit < 5e-3);
}

TEST_CASE("post-processing twice changes little (idempotence in distribution)") {
    const auto records = binary_records(10000, 41);
    FitConfig l8;
    l8.l = 8;
    const double u_raw =
        empirical_unfairness_bb(records, Partition(8), fit(records, l8).weights, 2);

    FitConfig config;
    config.l = 8;
    config.seed = 1;
    const FairModel first = fit(records, config);
    std::vector<Record> once = records;
    for (Record& r : once) r.score = predict(first, r.v, r.s, r.score);

    FitConfig config2 = config;
    config2.seed = 2;
    const FairModel second = fit(once, config2);
    std::vector<Record> twice = once;
    for (Record& r : twice) r.score = predict(second, r.v, r.s, r.score);

    const double u_once =
        empirical_unfairness_bb(once, Partition(8), first.weights, 2);
    const double u_twice =
        empirical_unfairness_bb(twice, Partition(8), first.weights, 2);
    CHECK(u_twice <= u_once + 0.05 * u_raw);
}

TEST_CASE("the prediction table matches the direct transport path exactly") {
    const auto records = binary_records(700, 31);
    FitConfig config;
    config.seed = 2;
    const FairModel model = fit(records, config);
    Rng rng(14);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.unit();
        const int s = static_cast<int>(rng.below(2));
        const double score = rng.uniform(-3, 3);
        const int l = model.partition().cell_index(v);
        const CellModel& cell = model.cells[l];
        const EmpiricalDist& source = model.cells[cell.fallback[s]].cdf_fold[s];
        const double clipped = std::clamp(score, -model.m_hat, model.m_hat);
        const double direct =
            transport_to_barycenter(source, cell.bary, clipped, Interp::kStep);
        CHECK(predict_with_alpha(model, v, s, score, 0.0) == direct);
    }
}

TEST_CASE("fit is deterministic and the JSON round-trip is bit-exact") {
    const auto records = binary_records(800, 57);
    FitConfig config;
    config.seed = 99;
    const FairModel a = fit(records, config);
    const FairModel b = fit(records, config);
    CHECK(to_json(a) == to_json(b));

    const FairModel restored = model_from_json(to_json(a));
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        const double v = rng.unit();
        const int s = static_cast<int>(rng.below(2));
        const double score = rng.uniform(-2, 2);
        CHECK(predict(restored, v, s, score) == predict(a, v, s, score));
    }
    CHECK(to_json(restored) == to_json(a));
}

TEST_CASE("pooled mode shares the cell sample between both estimates") {
    const auto records = binary_records(1000, 61);
    FitConfig config;
    config.seed = 4;
    config.pooled = true;
    const FairModel pooled = fit(records, config);
    const Partition partition(pooled.num_cells);
    std::vector<std::size_t> counts(pooled.num_cells, 0);
    for (const Record& r : records) ++counts[partition.cell_index(r.v)];
    for (int l = 0; l < pooled.num_cells; ++l) {
        std::size_t held = 0;
        for (int s = 0; s < pooled.num_groups; ++s) {
            const auto& cell = pooled.cells[l];
            CHECK(cell.quantile_fold[s].values().size() ==
                  cell.cdf_fold[s].values().size());
            if (cell.fallback[s] == l) {
                for (std::size_t k = 0; k < cell.quantile_fold[s].size(); ++k) {
                    CHECK(cell.quantile_fold[s].values()[k] ==
                          cell.cdf_fold[s].values()[k]);
                }
                held += cell.quantile_fold[s].size();
            }
        }
        CHECK(held == counts[l]);
    }

    // Round-trip stays bit-exact in pooled mode too.
    const FairModel restored = model_from_json(to_json(pooled));
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        const double v = rng.unit();
        const int s = static_cast<int>(rng.below(2));
        const double score = rng.uniform(-2, 2);
        CHECK(predict(restored, v, s, score) == predict(pooled, v, s, score));
    }

    // Same data, same seed: pooling cuts the post-processed unfairness.
    FitConfig split_config = config;
    split_config.pooled = false;
    const FairModel split = fit(records, split_config);
    const auto test = binary_records(20000, 62);
    CHECK(mean_cf(pooled, test, 0.0) < mean_cf(split, test, 0.0));
}

TEST_CASE("auto L uses the plug-in rule") {
    const auto records = binary_records(1000, 83);
    FitConfig config;
    const FairModel model = fit(records, config);
    CHECK(model.lcdf_estimated);
    CHECK(model.num_cells == model.l_star);
    CHECK(model.l_star ==
          select_l_star(records.size(), 2, model.lcdf_hat, config.min_cell));
    const double cf_fair = mean_cf(model, binary_records(10000, 84), 0.0);
    const double cf_raw = mean_cf(model, binary_records(10000, 84), 1.0);
    CHECK(cf_fair < cf_raw);
}
