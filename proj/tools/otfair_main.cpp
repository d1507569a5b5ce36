// otfair: post-process a regressor's scores toward counterfactual fairness
// by interval-discretized quantile alignment, and evaluate the results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otfair/dataset.hpp"
#include "otfair/metrics.hpp"
#include "otfair/postprocess.hpp"
#include "otfair/synth.hpp"

namespace {

using namespace otfair;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitPartialPrediction = 3;
constexpr int kExitInfeasible = 4;

std::string fmt(double value) { return format_double(value); }

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stoi(item));
    return values;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    return values;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

Interp parse_interp(const std::string& name) {
    if (name == "step") return Interp::kStep;
    if (name == "linear") return Interp::kLinear;
    throw SchemaError("unknown interpolation mode '" + name + "'");
}

struct FitArgs {
    std::string input;
    std::string out = "model.json";
    std::string l = "auto";
    std::optional<double> alpha;
    std::optional<double> budget;
    int min_cell = 10;
    int probe_l = 10;
    int lcdf_grid = 100;
    std::uint64_t seed = 0;
    std::string interp = "step";
    bool pooled = false;
    bool jsonl = false;
};

int cmd_fit(const FitArgs& args) {
    if (args.alpha && args.budget) {
        std::cerr << "fit: --alpha and --budget are mutually exclusive\n";
        return kExitUsage;
    }
    FitConfig config;
    if (args.l != "auto") {
        try {
            config.l = std::stoi(args.l);
        } catch (const std::exception&) {
            std::cerr << "fit: --L must be 'auto' or an integer\n";
            return kExitUsage;
        }
    }
    config.alpha = args.alpha;
    config.budget = args.budget;
    config.min_cell = args.min_cell;
    config.probe_l = args.probe_l;
    config.lcdf_grid = args.lcdf_grid;
    config.seed = args.seed;
    config.interp = parse_interp(args.interp);
    config.pooled = args.pooled;

    const Dataset data = load_dataset(args.input, {.jsonl = args.jsonl});
    FairModel model = fit(data.records, config);
    model.group_labels = data.group_labels;
    save_model(model, args.out);

    std::cout << "l=" << model.num_cells << '\n'
              << "l_star=" << model.l_star << '\n'
              << "delta_star=" << fmt(model.delta_star) << '\n'
              << "u_hat_bb=" << fmt(model.u_hat_bb) << '\n'
              << "alpha=" << fmt(model.alpha) << '\n'
              << "m_hat=" << fmt(model.m_hat) << '\n'
              << "lcdf_hat=" << fmt(model.lcdf_hat) << '\n'
              << "degenerate_cells=" << model.degenerate_cells() << '\n'
              << "n=" << data.records.size() << '\n'
              << "model=" << args.out << '\n';
    if (args.budget && model.alpha == 0.0 && model.delta_star >= *args.budget) {
        std::cout << "warning=budget_below_delta_star\n";
    }
    return kExitOk;
}

struct PredictArgs {
    std::string model;
    std::string input;
    std::string out = "predictions.csv";
    bool jsonl = false;
};

int cmd_predict(const PredictArgs& args) {
    const FairModel model = load_model(args.model);
    const Dataset data = load_dataset(args.input, {.jsonl = args.jsonl});

    // Map the file's labels onto the model's label table; a model fitted
    // through the library (no labels) falls back to numeric group indices.
    std::vector<int> label_map(data.group_labels.size(), -1);
    for (std::size_t i = 0; i < data.group_labels.size(); ++i) {
        if (model.group_labels.empty()) {
            try {
                const int idx = std::stoi(data.group_labels[i]);
                if (idx >= 0 && idx < model.num_groups) label_map[i] = idx;
            } catch (const std::exception&) {
            }
            continue;
        }
        for (std::size_t j = 0; j < model.group_labels.size(); ++j) {
            if (model.group_labels[j] == data.group_labels[i]) {
                label_map[i] = static_cast<int>(j);
                break;
            }
        }
    }

    std::size_t failures = 0;
    std::vector<std::string> predictions(data.records.size());
    std::vector<std::string> errors(data.records.size());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const Record& r = data.records[i];
        const int s = label_map[r.s];
        if (s < 0) {
            errors[i] = "unknown_group";
            ++failures;
            continue;
        }
        predictions[i] = fmt(predict(model, r.v, s, r.score));
    }

    std::vector<std::string> columns = data.columns;
    columns.push_back("prediction");
    if (failures > 0) columns.push_back("error");
    std::vector<std::vector<std::string>> rows = data.rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].push_back(predictions[i]);
        if (failures > 0) rows[i].push_back(errors[i]);
    }
    write_table(args.out, columns, rows);
    std::cout << "rows=" << rows.size() << '\n'
              << "failed_rows=" << failures << '\n'
              << "predictions=" << args.out << '\n';
    return failures > 0 ? kExitPartialPrediction : kExitOk;
}

struct EvaluateArgs {
    std::string input;
    std::string out;
    std::string baseline;
    std::string pred_col = "prediction";
    int grid = 50;
    double window = 0.05;
    int min_per_group = 10;
    bool uniform_weights = false;
    bool jsonl = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
    LoadOptions load;
    load.jsonl = args.jsonl;
    load.score_column = args.pred_col;
    const Dataset data = load_dataset(args.input, load);

    std::vector<PredRecord> preds;
    preds.reserve(data.records.size());
    bool all_labeled = true;
    for (const Record& r : data.records) {
        preds.push_back({r.v, r.s, r.score, r.y});
        if (!r.y) all_labeled = false;
    }
    CfOptions options;
    options.grid_points = args.grid;
    options.window_h = args.window;
    options.min_per_group = args.min_per_group;
    options.uniform_group_weights = args.uniform_weights;

    MetricsReport report = evaluate(preds, options);
    if (!args.baseline.empty()) {
        std::ifstream in(args.baseline, std::ios::binary);
        if (!in) throw SchemaError("cannot open " + args.baseline);
        std::stringstream ss;
        ss << in.rdbuf();
        report = relative_to(report, report_from_json(ss.str()), args.baseline);
    }
    if (!all_labeled) {
        std::cout << "notice=rmse_omitted_missing_y\n";
    }
    if (report.has_rmse) std::cout << "rmse=" << fmt(report.rmse) << '\n';
    std::cout << "cf=" << fmt(report.cf) << '\n'
              << "dp=" << fmt(report.dp) << '\n'
              << "windows_used=" << report.windows_used << '\n'
              << "n_eval=" << report.n_eval << '\n';
    if (report.relative) {
        std::cout << "rmse_rel=" << fmt(report.relative->rmse) << '\n'
                  << "cf_rel=" << fmt(report.relative->cf) << '\n'
                  << "dp_rel=" << fmt(report.relative->dp) << '\n';
    }
    if (!args.out.empty()) write_text(args.out, report_to_json(report) + "\n");
    return kExitOk;
}

struct SweepArgs {
    std::string input;
    std::string test;
    std::string mode = "L";
    std::string out = "curve.csv";
    std::string l_values = "1,2,4,8,16,32,64";
    std::string alphas = "0,0.25,0.5,0.75,1";
    std::string l = "auto";
    std::uint64_t seed = 0;
    int min_cell = 10;
    int grid = 50;
    double window = 0.05;
    int min_per_group = 10;
    bool pooled = false;
    bool jsonl = false;
};

int cmd_sweep(const SweepArgs& args) {
    const Dataset train = load_dataset(args.input, {.jsonl = args.jsonl});
    const Dataset test = load_dataset(args.test, {.jsonl = args.jsonl});

    CfOptions options;
    options.grid_points = args.grid;
    options.window_h = args.window;
    options.min_per_group = args.min_per_group;

    FitConfig config;
    config.seed = args.seed;
    config.min_cell = args.min_cell;
    config.pooled = args.pooled;
    if (args.l != "auto") config.l = std::stoi(args.l);

    std::string csv = "x,mean,lo,hi,series\n";
    if (args.mode == "L") {
        const LSweep sweep =
            sweep_l(train.records, test.records, parse_int_list(args.l_values),
                    config, options);
        for (const LSweepPoint& p : sweep.points) {
            if (p.failed) {
                std::cerr << "sweep: L=" << p.l << " failed: " << p.error << '\n';
                continue;
            }
            csv += std::to_string(p.l) + ',' + fmt(p.cf) + ',' + fmt(p.cf) +
                   ',' + fmt(p.cf) + ",cf\n";
        }
        for (const LSweepPoint& p : sweep.points) {
            if (p.failed) continue;
            csv += std::to_string(p.l) + ',' + fmt(p.rmse) + ',' + fmt(p.rmse) +
                   ',' + fmt(p.rmse) + ",rmse\n";
        }
        csv += std::to_string(sweep.l_star) + ",0,0,0,l_star\n";
        std::cout << "l_star=" << sweep.l_star << '\n';
    } else if (args.mode == "alpha") {
        const FairModel model = fit(train.records, config);
        const auto points = sweep_alpha(model, test.records,
                                        parse_double_list(args.alphas), options);
        for (const auto& p : points) {
            csv += fmt(p.alpha) + ',' + fmt(p.cf) + ',' + fmt(p.cf) + ',' +
                   fmt(p.cf) + ",cf\n";
        }
        for (const auto& p : points) {
            csv += fmt(p.alpha) + ',' + fmt(p.rmse) + ',' + fmt(p.rmse) + ',' +
                   fmt(p.rmse) + ",rmse\n";
        }
        for (const auto& p : points) {
            csv += fmt(p.alpha) + ',' + fmt(p.dp) + ',' + fmt(p.dp) + ',' +
                   fmt(p.dp) + ",dp\n";
        }
        std::cout << "l=" << model.num_cells << '\n';
    } else {
        std::cerr << "sweep: --mode must be L or alpha\n";
        return kExitUsage;
    }
    write_text(args.out, csv);
    std::cout << "curve=" << args.out << '\n';
    return kExitOk;
}

struct SynthArgs {
    bool binary = false;
    int multigroup = 0;
    std::size_t n_train = 1000;
    std::size_t n_test = 10000;
    double eps_x = 0.5;
    double eps_y = 0.01;
    double v_noise = 0.0;
    std::uint64_t seed = 0;
    std::string out_train = "train.csv";
    std::string out_test = "test.csv";
};

int cmd_synth(const SynthArgs& args) {
    if (args.binary == (args.multigroup > 0)) {
        std::cerr << "synth: pass exactly one of --binary or --multigroup K\n";
        return kExitUsage;
    }
    SynthConfig config;
    config.kind = args.binary ? SynthKind::kBinary : SynthKind::kMultigroup;
    config.k = args.binary ? 2 : args.multigroup;
    config.n_train = args.n_train;
    config.n_test = args.n_test;
    config.eps_x = args.eps_x;
    config.eps_y = args.eps_y;
    config.v_noise = args.v_noise;
    config.seed = args.seed;

    const SynthDataset data = make_synth(config);
    const LinearModel base = fit_base_model(data.train);

    const auto write_rows = [&](const std::vector<DataRow>& rows,
                                const std::string& path) {
        std::vector<std::string> columns = {"v", "s"};
        if (config.kind == SynthKind::kBinary) {
            columns.push_back("x1");
            columns.push_back("x2");
        } else {
            columns.push_back("x");
        }
        columns.push_back("score");
        columns.push_back("y");
        std::vector<std::vector<std::string>> cells;
        cells.reserve(rows.size());
        for (const DataRow& row : rows) {
            std::vector<std::string> line = {fmt(row.v), std::to_string(row.s)};
            for (double x : row.x) line.push_back(fmt(x));
            line.push_back(fmt(base.predict(base_features(row))));
            line.push_back(fmt(row.y));
            cells.push_back(std::move(line));
        }
        write_table(path, columns, cells);
    };
    write_rows(data.train, args.out_train);
    write_rows(data.test, args.out_test);
    std::cout << "train=" << args.out_train << '\n'
              << "test=" << args.out_test << '\n'
              << "n_train=" << data.train.size() << '\n'
              << "n_test=" << data.test.size() << '\n';
    return kExitOk;
}

struct BenchArgs {
    int repeats = 30;
    std::string methods = "base,fair_k,wfr,ours";
    std::optional<double> budget;
    bool binary = true;
    int multigroup = 0;
    std::size_t n_train = 1000;
    std::size_t n_test = 10000;
    double v_noise = 0.0;
    std::uint64_t seed = 0;
    std::string out = "bench.csv";
    std::string summary_out;
    int grid = 50;
    double window = 0.05;
    int min_per_group = 10;
    bool pooled = false;
    bool timings = false;
};

int cmd_bench(const BenchArgs& args) {
    BenchConfig config;
    config.synth.kind =
        args.multigroup > 0 ? SynthKind::kMultigroup : SynthKind::kBinary;
    config.synth.k = args.multigroup > 0 ? args.multigroup : 2;
    config.synth.n_train = args.n_train;
    config.synth.n_test = args.n_test;
    config.synth.v_noise = args.v_noise;
    config.synth.seed = args.seed;
    config.repeats = args.repeats;
    config.budget = args.budget;
    config.metrics.grid_points = args.grid;
    config.metrics.window_h = args.window;
    config.metrics.min_per_group = args.min_per_group;
    config.pooled = args.pooled;
    config.timings = args.timings;

    config.methods.clear();
    std::stringstream ss(args.methods);
    std::string method;
    while (std::getline(ss, method, ',')) {
        if (method != "base" && method != "fair_k" && method != "wfr" &&
            method != "ours" && method != "ours_relaxed") {
            std::cerr << "bench: unknown method '" << method << "'\n";
            return kExitUsage;
        }
        config.methods.push_back(method);
    }
    if (config.methods.empty()) {
        std::cerr << "bench: no methods requested\n";
        return kExitUsage;
    }

    const std::vector<BenchRow> rows = run_benchmark(config);
    write_text(args.out, bench_rows_csv(rows));
    const std::vector<BenchSummary> summaries = summarize(rows);
    if (!args.summary_out.empty()) {
        write_text(args.summary_out, bench_summary_csv(summaries));
    }
    for (const BenchSummary& s : summaries) {
        std::cout << s.method << ".rmse_mean=" << fmt(s.rmse.mean) << '\n'
                  << s.method << ".cf_mean=" << fmt(s.cf.mean) << '\n'
                  << s.method << ".dp_mean=" << fmt(s.dp.mean) << '\n';
    }
    std::cout << "rows=" << args.out << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactually fair post-processing of regression scores"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a post-processing model");
    fit_cmd->add_option("--input", fit_args.input, "calibration CSV")->required();
    fit_cmd->add_option("--out", fit_args.out, "model output path");
    fit_cmd->add_option("--L", fit_args.l, "interval count or 'auto'");
    fit_cmd->add_option("--alpha", fit_args.alpha, "fixed relaxation in [0,1]");
    fit_cmd->add_option("--budget", fit_args.budget, "unfairness budget B");
    fit_cmd->add_option("--min-cell", fit_args.min_cell, "per-cell sample floor");
    fit_cmd->add_option("--probe-l", fit_args.probe_l, "L_cdf probe cells");
    fit_cmd->add_option("--lcdf-grid", fit_args.lcdf_grid, "L_cdf threshold grid");
    fit_cmd->add_option("--seed", fit_args.seed, "fold-split seed");
    fit_cmd->add_option("--interp", fit_args.interp, "step|linear");
    fit_cmd->add_flag("--pooled", fit_args.pooled,
                      "estimate folds from the full cell sample");
    fit_cmd->add_flag("--jsonl", fit_args.jsonl, "input is JSON lines");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Apply a fitted model");
    predict_cmd->add_option("--model", predict_args.model, "model JSON")->required();
    predict_cmd->add_option("--input", predict_args.input, "records CSV")->required();
    predict_cmd->add_option("--out", predict_args.out, "predictions output");
    predict_cmd->add_flag("--jsonl", predict_args.jsonl, "input is JSON lines");

    EvaluateArgs evaluate_args;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions");
    evaluate_cmd->add_option("--input", evaluate_args.input, "predictions CSV")
        ->required();
    evaluate_cmd->add_option("--out", evaluate_args.out, "report JSON path");
    evaluate_cmd->add_option("--baseline", evaluate_args.baseline,
                             "baseline report JSON for relative metrics");
    evaluate_cmd->add_option("--pred-col", evaluate_args.pred_col,
                             "prediction column name");
    evaluate_cmd->add_option("--grid", evaluate_args.grid, "CF grid points");
    evaluate_cmd->add_option("--window", evaluate_args.window, "CF window half-width");
    evaluate_cmd->add_option("--min-per-group", evaluate_args.min_per_group,
                             "CF per-group window floor");
    evaluate_cmd->add_flag("--uniform-weights", evaluate_args.uniform_weights,
                           "weight groups uniformly");
    evaluate_cmd->add_flag("--jsonl", evaluate_args.jsonl, "input is JSON lines");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "L or alpha diagnostic curves");
    sweep_cmd->add_option("--input", sweep_args.input, "training CSV")->required();
    sweep_cmd->add_option("--test", sweep_args.test, "held-out CSV")->required();
    sweep_cmd->add_option("--mode", sweep_args.mode, "L|alpha");
    sweep_cmd->add_option("--out", sweep_args.out, "curve CSV path");
    sweep_cmd->add_option("--l-values", sweep_args.l_values, "comma list of L");
    sweep_cmd->add_option("--alphas", sweep_args.alphas, "comma list of alpha");
    sweep_cmd->add_option("--L", sweep_args.l, "fit L for alpha mode");
    sweep_cmd->add_option("--seed", sweep_args.seed, "fold-split seed");
    sweep_cmd->add_option("--min-cell", sweep_args.min_cell, "per-cell floor");
    sweep_cmd->add_option("--grid", sweep_args.grid, "CF grid points");
    sweep_cmd->add_option("--window", sweep_args.window, "CF window half-width");
    sweep_cmd->add_option("--min-per-group", sweep_args.min_per_group,
                          "CF per-group window floor");
    sweep_cmd->add_flag("--pooled", sweep_args.pooled,
                        "estimate folds from the full cell sample");
    sweep_cmd->add_flag("--jsonl", sweep_args.jsonl, "inputs are JSON lines");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic datasets");
    synth_cmd->add_flag("--binary", synth_args.binary, "two-group generator");
    synth_cmd->add_option("--multigroup", synth_args.multigroup,
                          "K-group generator");
    synth_cmd->add_option("--n-train", synth_args.n_train, "train rows");
    synth_cmd->add_option("--n-test", synth_args.n_test, "test rows");
    synth_cmd->add_option("--eps-x", synth_args.eps_x, "feature noise half-width");
    synth_cmd->add_option("--eps-y", synth_args.eps_y, "outcome noise half-width");
    synth_cmd->add_option("--v-noise", synth_args.v_noise,
                          "gaussian proxy perturbation scale");
    synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
    synth_cmd->add_option("--out-train", synth_args.out_train, "train CSV path");
    synth_cmd->add_option("--out-test", synth_args.out_test, "test CSV path");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Seeded benchmark harness");
    bench_cmd->add_option("--repeats", bench_args.repeats, "repetitions");
    bench_cmd->add_option("--methods", bench_args.methods, "comma list");
    bench_cmd->add_option("--budget", bench_args.budget,
                          "budget for ours_relaxed");
    bench_cmd->add_option("--multigroup", bench_args.multigroup,
                          "use the K-group generator");
    bench_cmd->add_option("--n-train", bench_args.n_train, "train rows");
    bench_cmd->add_option("--n-test", bench_args.n_test, "test rows");
    bench_cmd->add_option("--v-noise", bench_args.v_noise,
                          "gaussian proxy perturbation scale");
    bench_cmd->add_option("--seed", bench_args.seed, "base seed");
    bench_cmd->add_option("--out", bench_args.out, "per-seed rows CSV");
    bench_cmd->add_option("--summary-out", bench_args.summary_out,
                          "summary CSV path");
    bench_cmd->add_option("--grid", bench_args.grid, "CF grid points");
    bench_cmd->add_option("--window", bench_args.window, "CF window half-width");
    bench_cmd->add_option("--min-per-group", bench_args.min_per_group,
                          "CF per-group window floor");
    bench_cmd->add_flag("--pooled", bench_args.pooled,
                        "fit post-processors on pooled cell samples");
    bench_cmd->add_flag("--timings", bench_args.timings,
                        "record wall times (breaks byte-determinism)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit_args);
        if (predict_cmd->parsed()) return cmd_predict(predict_args);
        if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate_args);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (bench_cmd->parsed()) return cmd_bench(bench_args);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
