#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "otfair/postprocess.hpp"

namespace otfair {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json dist_to_json(const EmpiricalDist& d) {
    return json(std::vector<double>(d.values().begin(), d.values().end()));
}

EmpiricalDist dist_from_json(const json& j) {
    return EmpiricalDist::from_sorted(j.get<std::vector<double>>());
}

std::string interp_name(Interp interp) {
    return interp == Interp::kStep ? "step" : "linear";
}

Interp interp_from_name(const std::string& name) {
    if (name == "step") return Interp::kStep;
    if (name == "linear") return Interp::kLinear;
    throw std::runtime_error("model: unknown interpolation mode '" + name + "'");
}

}  // namespace

std::string to_json(const FairModel& model) {
    json j;
    j["format"] = "otfair-model";
    j["version"] = kFormatVersion;
    j["num_groups"] = model.num_groups;
    j["num_cells"] = model.num_cells;
    j["weights"] = model.weights;
    j["alpha"] = model.alpha;
    j["m_hat"] = model.m_hat;
    j["lcdf_hat"] = model.lcdf_hat;
    j["lcdf_estimated"] = model.lcdf_estimated;
    j["l_star"] = model.l_star;
    j["delta_star"] = model.delta_star;
    j["u_hat_bb"] = model.u_hat_bb;
    j["seed"] = model.seed;
    j["interp"] = interp_name(model.interp);
    j["group_labels"] = model.group_labels;

    json config;
    config["l"] = model.config.l ? json(*model.config.l) : json("auto");
    config["alpha"] = model.config.alpha ? json(*model.config.alpha) : json();
    config["budget"] = model.config.budget ? json(*model.config.budget) : json();
    config["min_cell"] = model.config.min_cell;
    config["probe_l"] = model.config.probe_l;
    config["lcdf_grid"] = model.config.lcdf_grid;
    config["seed"] = model.config.seed;
    config["interp"] = interp_name(model.config.interp);
    config["pooled"] = model.config.pooled;
    j["config"] = std::move(config);

    json cells = json::array();
    for (const CellModel& cell : model.cells) {
        json jc;
        jc["fallback"] = cell.fallback;
        json groups = json::array();
        for (int s = 0; s < model.num_groups; ++s) {
            json jg;
            jg["quantile_fold"] = dist_to_json(cell.quantile_fold[s]);
            jg["cdf_fold"] = dist_to_json(cell.cdf_fold[s]);
            groups.push_back(std::move(jg));
        }
        jc["groups"] = std::move(groups);
        jc["bary_grid"] = cell.bary.grid;
        jc["bary_q"] = cell.bary.q;
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    return j.dump();
}

FairModel model_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format", "") != "otfair-model") {
        throw std::runtime_error("model: not an otfair model document");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
        throw std::runtime_error("model: unsupported version");
    }
    FairModel model;
    model.num_groups = j.at("num_groups").get<int>();
    model.num_cells = j.at("num_cells").get<int>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.alpha = j.at("alpha").get<double>();
    model.m_hat = j.at("m_hat").get<double>();
    model.lcdf_hat = j.at("lcdf_hat").get<double>();
    model.lcdf_estimated = j.at("lcdf_estimated").get<bool>();
    model.l_star = j.at("l_star").get<int>();
    model.delta_star = j.at("delta_star").get<double>();
    model.u_hat_bb = j.at("u_hat_bb").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.interp = interp_from_name(j.at("interp").get<std::string>());
    model.group_labels = j.at("group_labels").get<std::vector<std::string>>();

    const json& config = j.at("config");
    if (config.at("l").is_number_integer()) {
        model.config.l = config.at("l").get<int>();
    }
    if (!config.at("alpha").is_null()) {
        model.config.alpha = config.at("alpha").get<double>();
    }
    if (!config.at("budget").is_null()) {
        model.config.budget = config.at("budget").get<double>();
    }
    model.config.min_cell = config.at("min_cell").get<int>();
    model.config.probe_l = config.at("probe_l").get<int>();
    model.config.lcdf_grid = config.at("lcdf_grid").get<int>();
    model.config.seed = config.at("seed").get<std::uint64_t>();
    model.config.interp = interp_from_name(config.at("interp").get<std::string>());
    model.config.pooled = config.at("pooled").get<bool>();

    for (const json& jc : j.at("cells")) {
        CellModel cell;
        cell.fallback = jc.at("fallback").get<std::vector<int>>();
        for (const json& jg : jc.at("groups")) {
            cell.quantile_fold.push_back(dist_from_json(jg.at("quantile_fold")));
            cell.cdf_fold.push_back(dist_from_json(jg.at("cdf_fold")));
        }
        cell.bary = QuantileTable(jc.at("bary_grid").get<std::vector<double>>(),
                                  jc.at("bary_q").get<std::vector<double>>());
        model.cells.push_back(std::move(cell));
    }
    if (static_cast<int>(model.cells.size()) != model.num_cells) {
        throw std::runtime_error("model: cell count mismatch");
    }
    model.finalize();
    return model;
}

void save_model(const FairModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << to_json(model);
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

FairModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace otfair
