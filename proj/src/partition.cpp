#include "otfair/partition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "otfair/rng.hpp"

namespace otfair {

Partition::Partition(int num_cells) : num_cells_(num_cells) {
    if (num_cells < 1) {
        throw std::invalid_argument("Partition: need at least one cell");
    }
}

int Partition::cell_index(double v) const {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("Partition: proxy value outside [0,1]");
    }
    const int idx = static_cast<int>(std::floor(v * num_cells_));
    return idx >= num_cells_ ? num_cells_ - 1 : idx;
}

std::vector<std::vector<std::vector<std::size_t>>> assign(
    const Partition& partition, const std::vector<Record>& records,
    int num_groups) {
    std::vector<std::vector<std::vector<std::size_t>>> cells(
        partition.num_cells(),
        std::vector<std::vector<std::size_t>>(num_groups));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Record& r = records[i];
        if (!(r.v >= 0.0 && r.v <= 1.0)) {
            throw std::invalid_argument("record " + std::to_string(i) +
                                        ": proxy value outside [0,1]");
        }
        if (r.s < 0 || r.s >= num_groups) {
            throw std::invalid_argument("record " + std::to_string(i) +
                                        ": group index out of range");
        }
        cells[partition.cell_index(r.v)][r.s].push_back(i);
    }
    return cells;
}

CellCounts tally(const std::vector<std::vector<std::vector<std::size_t>>>& cells,
                 int num_groups) {
    CellCounts counts;
    counts.n.assign(cells.size(), std::vector<std::size_t>(num_groups, 0));
    counts.p_cell.assign(cells.size(), 0.0);
    counts.w_group.assign(num_groups, 0.0);
    std::size_t total = 0;
    for (std::size_t l = 0; l < cells.size(); ++l) {
        for (int s = 0; s < num_groups; ++s) {
            counts.n[l][s] = cells[l][s].size();
            total += counts.n[l][s];
        }
    }
    if (total == 0) return counts;
    for (std::size_t l = 0; l < cells.size(); ++l) {
        std::size_t in_cell = 0;
        for (int s = 0; s < num_groups; ++s) {
            in_cell += counts.n[l][s];
            counts.w_group[s] += static_cast<double>(counts.n[l][s]);
        }
        counts.p_cell[l] = static_cast<double>(in_cell) / static_cast<double>(total);
    }
    for (double& w : counts.w_group) w /= static_cast<double>(total);
    return counts;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_folds(
    const std::vector<std::size_t>& indices, std::uint64_t seed) {
    std::vector<std::size_t> shuffled = indices;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const std::size_t half = (shuffled.size() + 1) / 2;  // larger half -> quantile fold
    std::vector<std::size_t> fold0(shuffled.begin(), shuffled.begin() + half);
    std::vector<std::size_t> fold1(shuffled.begin() + half, shuffled.end());
    return {std::move(fold0), std::move(fold1)};
}

}  // namespace otfair
