#include "otfair/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "otfair/rng.hpp"

namespace otfair {

namespace {

constexpr double kLcdfFloor = 1e-6;

int infer_num_groups(const std::vector<Record>& records) {
    int max_s = -1;
    for (const Record& r : records) max_s = std::max(max_s, r.s);
    return max_s + 1;
}

// Nearest cell (ties toward lower index) accepted by `ok`; -1 if none.
template <class Pred>
int nearest_cell(int from, int num_cells, Pred ok) {
    for (int d = 0; d < num_cells; ++d) {
        if (from - d >= 0 && ok(from - d)) return from - d;
        if (from + d < num_cells && ok(from + d)) return from + d;
    }
    return -1;
}

}  // namespace

int FairModel::degenerate_cells() const {
    int count = 0;
    for (int l = 0; l < num_cells; ++l) {
        for (int s = 0; s < num_groups; ++s) {
            if (cells[l].fallback[s] != l) ++count;
        }
    }
    return count;
}

void FairModel::finalize() {
    for (int l = 0; l < num_cells; ++l) {
        CellModel& cell = cells[l];
        cell.pred.assign(num_groups, {});
        for (int s = 0; s < num_groups; ++s) {
            const EmpiricalDist& source = cells[cell.fallback[s]].cdf_fold[s];
            const std::size_t n = source.size();
            if (n == 0) continue;
            std::vector<double>& table = cell.pred[s];
            table.resize(n + 1);
            std::size_t gi = 0;
            for (std::size_t j = 0; j <= n; ++j) {
                const double u =
                    static_cast<double>(j) / static_cast<double>(n);
                while (gi < cell.bary.grid.size() && cell.bary.grid[gi] < u) {
                    ++gi;
                }
                table[j] = gi < cell.bary.q.size() ? cell.bary.q[gi]
                                                   : cell.bary.q.back();
            }
        }
    }
}

QuantileTable FairModel::group_quantile_table(int cell, int group) const {
    const CellModel& c = cells[cell];
    const EmpiricalDist& d = cells[c.fallback[group]].quantile_fold[group];
    std::vector<double> q(c.bary.grid.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        q[k] = d.quantile(c.bary.grid[k]);
    }
    return QuantileTable(c.bary.grid, std::move(q));
}

double estimate_lcdf(const std::vector<Record>& records, int probe_l,
                     int grid_size) {
    if (probe_l < 2) {
        throw std::invalid_argument("estimate_lcdf: probe_l must be >= 2");
    }
    if (grid_size < 2) {
        throw std::invalid_argument("estimate_lcdf: grid_size must be >= 2");
    }
    const int num_groups = infer_num_groups(records);
    if (records.size() < 2 * static_cast<std::size_t>(num_groups) *
                             static_cast<std::size_t>(probe_l)) {
        throw std::invalid_argument(
            "estimate_lcdf: need at least 2*K*probe_l records");
    }
    double m_hat = 0.0;
    for (const Record& r : records) m_hat = std::max(m_hat, std::abs(r.score));
    if (m_hat == 0.0) return kLcdfFloor;

    const Partition partition(probe_l);
    const auto cells = assign(partition, records, num_groups);
    std::vector<std::vector<EmpiricalDist>> dists(
        probe_l, std::vector<EmpiricalDist>(num_groups));
    for (int l = 0; l < probe_l; ++l) {
        for (int s = 0; s < num_groups; ++s) {
            std::vector<double> scores;
            scores.reserve(cells[l][s].size());
            for (std::size_t i : cells[l][s]) scores.push_back(records[i].score);
            dists[l][s] = EmpiricalDist::from_unsorted(std::move(scores));
        }
    }

    constexpr std::size_t kMinPairSamples = 10;
    double max_diff = 0.0;
    bool any_pair = false;
    for (int s = 0; s < num_groups; ++s) {
        for (int l = 0; l + 1 < probe_l; ++l) {
            if (dists[l][s].size() < kMinPairSamples ||
                dists[l + 1][s].size() < kMinPairSamples) {
                continue;
            }
            any_pair = true;
            for (int j = 0; j < grid_size; ++j) {
                const double t =
                    -m_hat + 2.0 * m_hat * j / static_cast<double>(grid_size - 1);
                max_diff = std::max(
                    max_diff, std::abs(dists[l][s].cdf(t) - dists[l + 1][s].cdf(t)));
            }
        }
    }
    if (!any_pair) {
        throw std::runtime_error(
            "estimate_lcdf: no adjacent cell pair with enough samples; "
            "use a smaller probe_l");
    }
    return std::max(max_diff * probe_l, kLcdfFloor);
}

int select_l_star(std::size_t n, int num_groups, double lcdf_hat,
                  int min_cell) {
    if (n < 2 || num_groups < 1 || !(lcdf_hat > 0.0) || min_cell < 1) {
        throw std::invalid_argument("select_l_star: invalid arguments");
    }
    const double k = static_cast<double>(num_groups);
    const double nn = static_cast<double>(n);
    const double formula =
        std::floor(std::cbrt(8.0 * lcdf_hat * lcdf_hat * nn /
                             (k * std::log(2.0 * k * nn))));
    const double cap = std::floor(nn / (k * static_cast<double>(min_cell)));
    return std::max(1, static_cast<int>(std::min(formula, cap)));
}

double compute_delta_star(std::size_t n, int num_groups, double lcdf_hat,
                          double m_hat) {
    if (n < 2) {
        throw std::invalid_argument("compute_delta_star: n must be >= 2");
    }
    const double k = static_cast<double>(num_groups);
    const double nn = static_cast<double>(n);
    return 40.0 * m_hat * m_hat *
           std::cbrt(lcdf_hat * k * std::log(2.0 * k)) *
           std::cbrt(std::log(nn) / nn);
}

double calibrate_alpha(double budget, double delta, double u_hat) {
    if (budget < 0.0) {
        throw std::invalid_argument("calibrate_alpha: budget must be >= 0");
    }
    if (delta >= budget) return 0.0;
    if (u_hat <= 0.0) return 1.0;
    const double root = (budget - delta) / (2.0 * u_hat);
    return std::min(1.0, root * root);
}

namespace {

// Weighted barycenter dispersion per cell, mixed by cell mass. Empty
// cell-groups borrow the nearest cell holding samples of that group.
double unfairness_over_cells(const std::vector<std::vector<EmpiricalDist>>& dists,
                             const std::vector<double>& p_cell,
                             const std::vector<double>& weights,
                             int num_groups) {
    const int num_cells = static_cast<int>(dists.size());
    double total = 0.0;
    for (int l = 0; l < num_cells; ++l) {
        if (p_cell[l] == 0.0) continue;
        std::vector<EmpiricalDist> group_dists(num_groups);
        for (int s = 0; s < num_groups; ++s) {
            if (!dists[l][s].empty()) {
                group_dists[s] = dists[l][s];
                continue;
            }
            const int donor = nearest_cell(
                l, num_cells, [&](int c) { return !dists[c][s].empty(); });
            if (donor < 0) {
                throw std::runtime_error("empirical unfairness: group " +
                                         std::to_string(s) + " has no samples");
            }
            group_dists[s] = dists[donor][s];
        }
        const QuantileTable bary = barycenter_quantiles(
            group_dists, weights, merged_rank_grid(group_dists));
        double cell_unfairness = 0.0;
        for (int s = 0; s < num_groups; ++s) {
            cell_unfairness += weights[s] * w2_squared_to_table(group_dists[s], bary);
        }
        total += p_cell[l] * cell_unfairness;
    }
    return total;
}

EmpiricalDist merge_sorted(const EmpiricalDist& a, const EmpiricalDist& b) {
    std::vector<double> merged(a.size() + b.size());
    std::merge(a.values().begin(), a.values().end(), b.values().begin(),
               b.values().end(), merged.begin());
    return EmpiricalDist::from_sorted(std::move(merged));
}

}  // namespace

double empirical_unfairness_bb(const std::vector<Record>& records,
                               const Partition& partition,
                               const std::vector<double>& weights,
                               int num_groups) {
    const auto cells = assign(partition, records, num_groups);
    const CellCounts counts = tally(cells, num_groups);
    const int num_cells = partition.num_cells();

    std::vector<std::vector<EmpiricalDist>> dists(
        num_cells, std::vector<EmpiricalDist>(num_groups));
    for (int l = 0; l < num_cells; ++l) {
        for (int s = 0; s < num_groups; ++s) {
            std::vector<double> scores;
            scores.reserve(cells[l][s].size());
            for (std::size_t i : cells[l][s]) scores.push_back(records[i].score);
            dists[l][s] = EmpiricalDist::from_unsorted(std::move(scores));
        }
    }
    return unfairness_over_cells(dists, counts.p_cell, weights, num_groups);
}

FairModel fit(const std::vector<Record>& records, const FitConfig& config) {
    if (records.empty()) {
        throw std::invalid_argument("fit: no records");
    }
    if (config.alpha && config.budget) {
        throw std::invalid_argument("fit: alpha and budget are mutually exclusive");
    }
    if (config.alpha && !(*config.alpha >= 0.0 && *config.alpha <= 1.0)) {
        throw std::invalid_argument("fit: alpha must lie in [0,1]");
    }
    if (config.budget && !(*config.budget >= 0.0)) {
        throw std::invalid_argument("fit: budget must be >= 0");
    }
    if (config.l && *config.l < 1) {
        throw std::invalid_argument("fit: L must be >= 1");
    }
    const int num_groups = infer_num_groups(records);
    std::vector<std::size_t> per_group(num_groups, 0);
    for (const Record& r : records) {
        if (!std::isfinite(r.score)) {
            throw std::invalid_argument("fit: non-finite score");
        }
        ++per_group[r.s];
    }
    for (int s = 0; s < num_groups; ++s) {
        if (per_group[s] == 0) {
            throw std::runtime_error("fit: group " + std::to_string(s) +
                                     " absent from the calibration data");
        }
        if (per_group[s] < 2) {
            throw std::runtime_error("fit: group " + std::to_string(s) +
                                     " needs at least 2 records");
        }
    }

    FairModel model;
    model.num_groups = num_groups;
    model.seed = config.seed;
    model.interp = config.interp;
    model.config = config;
    for (const Record& r : records) {
        model.m_hat = std::max(model.m_hat, std::abs(r.score));
    }

    // The plug-in Lipschitz constant is required to choose L* and to compute
    // a meaningful delta* for budget calibration; otherwise it is best-effort.
    const bool lcdf_required = !config.l.has_value() || config.budget.has_value();
    try {
        model.lcdf_hat = estimate_lcdf(records, config.probe_l, config.lcdf_grid);
        model.lcdf_estimated = true;
    } catch (const std::exception&) {
        if (lcdf_required) throw;
        model.lcdf_hat = 0.0;
        model.lcdf_estimated = false;
    }

    const std::size_t n = records.size();
    model.l_star = model.lcdf_estimated
                       ? select_l_star(n, num_groups, model.lcdf_hat,
                                       config.min_cell)
                       : 1;
    model.num_cells = config.l ? *config.l : model.l_star;
    model.delta_star =
        compute_delta_star(n, num_groups, model.lcdf_hat, model.m_hat);

    const Partition partition(model.num_cells);
    const auto cell_indices = assign(partition, records, num_groups);
    const CellCounts counts = tally(cell_indices, num_groups);
    model.weights = counts.w_group;

    // Build both folds per (cell, group). A cell-group with fewer than two
    // samples cannot populate both folds and is served by the nearest cell
    // that can (ties toward the lower index). Pooled mode estimates both
    // folds from the full cell sample.
    model.cells.resize(model.num_cells);
    for (int l = 0; l < model.num_cells; ++l) {
        CellModel& cell = model.cells[l];
        cell.quantile_fold.resize(num_groups);
        cell.cdf_fold.resize(num_groups);
        cell.fallback.assign(num_groups, -1);
        for (int s = 0; s < num_groups; ++s) {
            if (counts.n[l][s] < 2) continue;
            if (config.pooled) {
                std::vector<double> scores;
                scores.reserve(cell_indices[l][s].size());
                for (std::size_t i : cell_indices[l][s]) {
                    scores.push_back(records[i].score);
                }
                cell.quantile_fold[s] =
                    EmpiricalDist::from_unsorted(std::move(scores));
                cell.cdf_fold[s] = cell.quantile_fold[s];
            } else {
                const auto [fold0, fold1] = split_folds(
                    cell_indices[l][s],
                    derive_seed(config.seed, stream::kFoldSplit,
                                static_cast<std::uint64_t>(l),
                                static_cast<std::uint64_t>(s)));
                std::vector<double> q_scores, c_scores;
                q_scores.reserve(fold0.size());
                c_scores.reserve(fold1.size());
                for (std::size_t i : fold0) q_scores.push_back(records[i].score);
                for (std::size_t i : fold1) c_scores.push_back(records[i].score);
                cell.quantile_fold[s] =
                    EmpiricalDist::from_unsorted(std::move(q_scores));
                cell.cdf_fold[s] =
                    EmpiricalDist::from_unsorted(std::move(c_scores));
            }
            cell.fallback[s] = l;
        }
    }
    for (int l = 0; l < model.num_cells; ++l) {
        for (int s = 0; s < num_groups; ++s) {
            if (model.cells[l].fallback[s] == l) continue;
            const int donor = nearest_cell(l, model.num_cells, [&](int c) {
                return model.cells[c].fallback[s] == c;
            });
            if (donor < 0) {
                throw std::runtime_error(
                    "fit: group " + std::to_string(s) +
                    " has no cell with 2+ samples; use a smaller L");
            }
            model.cells[l].fallback[s] = donor;
        }
    }
    for (int l = 0; l < model.num_cells; ++l) {
        CellModel& cell = model.cells[l];
        std::vector<EmpiricalDist> effective(num_groups);
        for (int s = 0; s < num_groups; ++s) {
            effective[s] = model.cells[cell.fallback[s]].quantile_fold[s];
        }
        cell.bary = barycenter_quantiles(effective, model.weights,
                                         merged_rank_grid(effective));
    }

    // The black-box unfairness needs the full per-cell samples; those are
    // the two sorted folds merged (or the pooled sample directly).
    {
        std::vector<std::vector<EmpiricalDist>> full(
            model.num_cells, std::vector<EmpiricalDist>(num_groups));
        for (int l = 0; l < model.num_cells; ++l) {
            for (int s = 0; s < num_groups; ++s) {
                if (model.cells[l].fallback[s] == l) {
                    full[l][s] =
                        config.pooled
                            ? model.cells[l].quantile_fold[s]
                            : merge_sorted(model.cells[l].quantile_fold[s],
                                           model.cells[l].cdf_fold[s]);
                } else if (counts.n[l][s] > 0) {
                    std::vector<double> scores;
                    for (std::size_t i : cell_indices[l][s]) {
                        scores.push_back(records[i].score);
                    }
                    full[l][s] = EmpiricalDist::from_unsorted(std::move(scores));
                }
            }
        }
        model.u_hat_bb =
            unfairness_over_cells(full, counts.p_cell, model.weights, num_groups);
    }

    if (config.budget) {
        model.alpha =
            calibrate_alpha(*config.budget, model.delta_star, model.u_hat_bb);
    } else if (config.alpha) {
        model.alpha = *config.alpha;
    }
    model.finalize();
    return model;
}

double predict_with_alpha(const FairModel& model, double v, int s,
                          double score, double alpha) {
    if (s < 0 || s >= model.num_groups) {
        throw std::invalid_argument("predict: unknown group index " +
                                    std::to_string(s));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("predict: alpha must lie in [0,1]");
    }
    const int l = model.partition().cell_index(v);
    const CellModel& cell = model.cells[l];
    const EmpiricalDist& source = model.cells[cell.fallback[s]].cdf_fold[s];
    const double clipped = std::clamp(score, -model.m_hat, model.m_hat);
    double fair;
    if (model.interp == Interp::kStep &&
        static_cast<std::size_t>(s) < cell.pred.size() &&
        !cell.pred[s].empty()) {
        fair = cell.pred[s][source.rank_leq(clipped)];
    } else {
        fair = transport_to_barycenter(source, cell.bary, clipped, model.interp);
    }
    const double root = std::sqrt(alpha);
    return root * score + (1.0 - root) * fair;
}

double predict(const FairModel& model, double v, int s, double score) {
    return predict_with_alpha(model, v, s, score, model.alpha);
}

}  // namespace otfair
