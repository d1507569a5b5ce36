#include <doctest.h>

#include <cmath>
#include <vector>

#include "otfair/metrics.hpp"
#include "otfair/rng.hpp"
#include "otfair/synth.hpp"
#include "test_helpers.hpp"

using namespace otfair;
using otfair::testing::dist;
using otfair::testing::random_dist;

namespace {

std::vector<PredRecord> shift_scale(const std::vector<PredRecord>& records,
                                    double scale, double shift) {
    std::vector<PredRecord> out = records;
    for (PredRecord& r : out) r.pred = scale * r.pred + shift;
    return out;
}

std::vector<PredRecord> random_preds(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PredRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        PredRecord r;
        r.v = rng.unit();
        r.s = rng.bernoulli_half() ? 1 : 0;
        r.pred = rng.uniform(-1, 1) + (r.s ? 0.5 : -0.5) * r.v;
        records.push_back(r);
    }
    return records;
}

}  // namespace

TEST_CASE("rmse basics") {
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({0, 0}, {3, 4}) == doctest::Approx(3.5355339059327373));
    CHECK(rmse({1.7, 2.7}, {1, 2}) == doctest::Approx(0.7));
    CHECK_THROWS_AS(rmse({1}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
}

TEST_CASE("cf_unfairness degenerate and exact cases") {
    std::vector<PredRecord> constant;
    for (int i = 0; i < 200; ++i) {
        constant.push_back({i / 200.0, i % 2, 1.0, {}});
    }
    auto [cf_const, used] = cf_unfairness(constant);
    CHECK(cf_const == 0.0);
    CHECK(used > 0);

    // One global window over the two-point groups from the transport example.
    std::vector<PredRecord> tiny = {
        {0.5, 0, 0.0, {}}, {0.5, 0, 1.0, {}}, {0.5, 1, 10.0, {}}, {0.5, 1, 11.0, {}},
    };
    CfOptions one_window;
    one_window.grid_points = 1;
    one_window.window_h = 0.5;
    one_window.min_per_group = 2;
    auto [cf_tiny, used_tiny] = cf_unfairness(tiny, one_window);
    CHECK(cf_tiny == doctest::Approx(25.0));
    CHECK(used_tiny == 1);

    CfOptions starved;
    starved.min_per_group = 1000;
    CHECK_THROWS_AS(cf_unfairness(tiny, starved), InfeasibleError);
}

TEST_CASE("cf is invariant to shifts and quadratic in scale") {
    const auto records = random_preds(4000, 21);
    const double base = cf_unfairness(records).first;
    CHECK(cf_unfairness(shift_scale(records, 1.0, 3.7)).first ==
          doctest::Approx(base).epsilon(1e-9));
    CHECK(cf_unfairness(shift_scale(records, 2.0, 0.0)).first ==
          doctest::Approx(4.0 * base).epsilon(1e-9));
}

TEST_CASE("dp_violation basics") {
    std::vector<PredRecord> same;
    for (int i = 0; i < 50; ++i) {
        same.push_back({0.5, 0, static_cast<double>(i % 7), {}});
        same.push_back({0.5, 1, static_cast<double>(i % 7), {}});
    }
    CHECK(dp_violation(same) == 0.0);

    std::vector<PredRecord> diracs = {{0.5, 0, 0.0, {}}, {0.5, 1, 1.0, {}}};
    CHECK(dp_violation(diracs) == doctest::Approx(1.0));

    std::vector<PredRecord> shifted = {
        {0.5, 0, 0.0, {}}, {0.5, 0, 1.0, {}}, {0.5, 1, 10.0, {}}, {0.5, 1, 11.0, {}},
    };
    CHECK(dp_violation(shifted) == doctest::Approx(100.0));

    const auto records = random_preds(3000, 33);
    const double base = dp_violation(records);
    CHECK(dp_violation(shift_scale(records, 1.0, -2.0)) ==
          doctest::Approx(base).epsilon(1e-9));
    CHECK(dp_violation(shift_scale(records, 3.0, 1.0)) ==
          doctest::Approx(9.0 * base).epsilon(1e-9));
}

TEST_CASE("a single global window reduces cf to the weighted dp dispersion") {
    // With one window spanning [0,1] and two groups, the windowed metric
    // equals w0*w1 times the pairwise global W2^2.
    const auto records = random_preds(3000, 77);
    CfOptions global;
    global.grid_points = 1;
    global.window_h = 0.5;
    const double cf = cf_unfairness(records, global).first;
    double w1 = 0.0;
    for (const auto& r : records) w1 += r.s;
    w1 /= static_cast<double>(records.size());
    CHECK(cf == doctest::Approx((1.0 - w1) * w1 * dp_violation(records))
                    .epsilon(1e-9));
}

TEST_CASE("group-symmetric predictions sit at the sampling-noise floor") {
    Rng rng(91);
    std::vector<PredRecord> records;
    for (int i = 0; i < 10000; ++i) {
        PredRecord r;
        r.v = rng.unit();
        r.s = rng.bernoulli_half() ? 1 : 0;
        r.pred = r.v + rng.uniform(-0.25, 0.25);  // law independent of s given v
        records.push_back(r);
    }
    CHECK(cf_unfairness(records).first <= 1e-3);
}

TEST_CASE("two-group barycenter dispersion is a quarter of the pairwise W2^2") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_dist(rng, 8, 2.0);
        const auto b = random_dist(rng, 8, 2.0);
        const std::vector<EmpiricalDist> dists = {a, b};
        const std::vector<double> half = {0.5, 0.5};
        const auto bary = barycenter_quantiles(dists, half, merged_rank_grid(dists));
        const double dispersion = 0.5 * w2_squared_to_table(a, bary) +
                                  0.5 * w2_squared_to_table(b, bary);
        CHECK(dispersion == doctest::Approx(0.25 * w2_squared(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("post-processing beats the raw scores on conditional unfairness") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        SynthConfig synth;
        synth.seed = seed;
        const SynthDataset data = make_synth(synth);
        const LinearModel base = fit_base_model(data.train);
        const auto train = to_records(data.train, base);
        const auto test = to_records(data.test, base);

        FitConfig config;
        config.seed = seed;
        const FairModel model = fit(train, config);

        std::vector<PredRecord> raw, fair;
        for (const Record& r : test) {
            raw.push_back({r.v, r.s, r.score, r.y});
            fair.push_back({r.v, r.s, predict(model, r.v, r.s, r.score), r.y});
        }
        CHECK(cf_unfairness(fair).first < cf_unfairness(raw).first);
        // L = 1 (global alignment) lowers the DP violation as well.
        FitConfig wfr_config;
        wfr_config.l = 1;
        wfr_config.seed = seed;
        const FairModel wfr = fit(train, wfr_config);
        std::vector<PredRecord> global;
        for (const Record& r : test) {
            global.push_back({r.v, r.s, predict(wfr, r.v, r.s, r.score), r.y});
        }
        CHECK(dp_violation(global) <= dp_violation(raw));
    }
}

TEST_CASE("sweep_l reports the curve and the plug-in marker") {
    SynthConfig synth;
    synth.seed = 12;
    synth.n_test = 4000;
    const SynthDataset data = make_synth(synth);
    const LinearModel base = fit_base_model(data.train);
    const auto train = to_records(data.train, base);
    const auto test = to_records(data.test, base);

    FitConfig config;
    config.seed = 12;
    const LSweep sweep = sweep_l(train, test, {1, 2, 4, 8}, config);
    CHECK(sweep.points.size() == 4);
    CHECK(sweep.l_star >= 1);
    for (const auto& p : sweep.points) CHECK(!p.failed);

    // The L=1 sweep point is the WFR baseline: refit directly and compare.
    FitConfig wfr_config;
    wfr_config.l = 1;
    wfr_config.seed = 12;
    const FairModel wfr = fit(train, wfr_config);
    std::vector<PredRecord> preds;
    std::vector<double> p, y;
    for (const Record& r : test) {
        const double value = predict(wfr, r.v, r.s, r.score);
        preds.push_back({r.v, r.s, value, r.y});
        p.push_back(value);
        y.push_back(*r.y);
    }
    CHECK(sweep.points[0].cf == doctest::Approx(cf_unfairness(preds).first));
    CHECK(sweep.points[0].rmse == doctest::Approx(rmse(p, y)));

    // A fit failure at some L is recorded, not thrown.
    std::vector<Record> two_each = {
        {0.1, 0, 0.0, 0.0}, {0.9, 0, 1.0, 1.0}, {0.1, 1, 0.0, 0.0}, {0.9, 1, 1.0, 1.0},
    };
    CfOptions tiny;
    tiny.grid_points = 1;
    tiny.window_h = 0.5;
    tiny.min_per_group = 2;
    FitConfig one_cell;
    one_cell.l = 1;
    const LSweep broken = sweep_l(two_each, two_each, {1, 64}, one_cell, tiny);
    CHECK(!broken.points[0].failed);
    CHECK(broken.points[1].failed);
}

TEST_CASE("sweep_alpha endpoints and monotone trends") {
    SynthConfig synth;
    synth.seed = 31;
    synth.n_train = 2000;
    synth.n_test = 20000;
    const SynthDataset data = make_synth(synth);
    const LinearModel base = fit_base_model(data.train);
    const auto train = to_records(data.train, base);
    const auto test = to_records(data.test, base);

    FitConfig config;
    config.seed = 31;
    const FairModel model = fit(train, config);
    const auto points =
        sweep_alpha(model, test, {0.0, 0.25, 0.5, 0.75, 1.0});

    std::vector<PredRecord> raw, fair;
    std::vector<double> p0, p1, y;
    for (const Record& r : test) {
        const double f = predict_with_alpha(model, r.v, r.s, r.score, 0.0);
        raw.push_back({r.v, r.s, r.score, r.y});
        fair.push_back({r.v, r.s, f, r.y});
        p0.push_back(f);
        p1.push_back(r.score);
        y.push_back(*r.y);
    }
    CHECK(points.front().cf == doctest::Approx(cf_unfairness(fair).first));
    CHECK(points.back().cf == doctest::Approx(cf_unfairness(raw).first));
    CHECK(points.front().rmse == doctest::Approx(rmse(p0, y)));
    CHECK(points.back().rmse == doctest::Approx(rmse(p1, y)));

    for (std::size_t i = 1; i < points.size(); ++i) {
        CHECK(points[i].cf >= points[i - 1].cf * 0.95);
        CHECK(points[i].rmse <= points[i - 1].rmse * 1.05);
    }
    // Corollary-style interpolation of the test risk, with 5% slack.
    for (const auto& point : points) {
        const double root = std::sqrt(point.alpha);
        const double bound =
            (1.0 - root) * points.front().rmse + root * points.back().rmse;
        CHECK(point.rmse <= bound * 1.05 + 1e-12);
    }
}

TEST_CASE("relative reports divide by the named baseline") {
    MetricsReport base;
    base.rmse = 2.0;
    base.has_rmse = true;
    base.cf = 0.4;
    base.dp = 0.1;
    base.n_eval = 10;
    base.windows_used = 5;
    MetricsReport method = base;
    method.rmse = 1.0;
    method.cf = 0.1;
    method.dp = 0.2;
    const MetricsReport rel = relative_to(method, base, "base");
    REQUIRE(rel.relative.has_value());
    CHECK(rel.relative->baseline == "base");
    CHECK(rel.relative->rmse == doctest::Approx(0.5));
    CHECK(rel.relative->cf == doctest::Approx(0.25));
    CHECK(rel.relative->dp == doctest::Approx(2.0));

    const MetricsReport parsed = report_from_json(report_to_json(base));
    CHECK(parsed.rmse == base.rmse);
    CHECK(parsed.cf == base.cf);
    CHECK(parsed.dp == base.dp);
    CHECK(parsed.windows_used == base.windows_used);
    CHECK(report_to_json(rel).find("\"relative\"") != std::string::npos);
}

TEST_CASE("evaluate assembles the full report") {
    std::vector<PredRecord> records;
    for (int i = 0; i < 400; ++i) {
        records.push_back({i / 400.0, i % 2, 0.5, 0.5});
    }
    const MetricsReport report = evaluate(records);
    CHECK(report.has_rmse);
    CHECK(report.rmse == 0.0);
    CHECK(report.cf == 0.0);
    CHECK(report.dp == 0.0);
    CHECK(report.n_eval == 400);
    CHECK(report.windows_used > 0);
    const std::string json = report_to_json(report);
    CHECK(json.find("\"cf\"") != std::string::npos);

    std::vector<PredRecord> unlabeled = records;
    for (PredRecord& r : unlabeled) r.y.reset();
    CHECK(!evaluate(unlabeled).has_rmse);
}
