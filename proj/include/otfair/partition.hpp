#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace otfair {

/// One calibration/test observation. The proxy v lives in [0,1], the group
/// index s in [0, K), the score is the black-box prediction; y is the true
/// outcome when known.
struct Record {
    double v = 0.0;
    int s = 0;
    double score = 0.0;
    std::optional<double> y;
};

/// Uniform partition of [0,1] into L half-open intervals [l/L, (l+1)/L),
/// the last one closed so v = 1 belongs to the last cell.
class Partition {
public:
    explicit Partition(int num_cells);

    int num_cells() const { return num_cells_; }

    /// 0-based cell index; v must lie in [0,1].
    int cell_index(double v) const;

private:
    int num_cells_;
};

/// Per-cell, per-group membership and the derived empirical frequencies.
struct CellCounts {
    std::vector<std::vector<std::size_t>> n;  // n[cell][group]
    std::vector<double> p_cell;               // empirical P(V in I_l)
    std::vector<double> w_group;              // empirical P(S = s)
};

/// Groups record indices by (cell, group). Throws std::invalid_argument
/// naming the offending record index if some v is outside [0,1] or some
/// group index is outside [0, num_groups). Deterministic in input order.
std::vector<std::vector<std::vector<std::size_t>>> assign(
    const Partition& partition, const std::vector<Record>& records,
    int num_groups);

/// Counts and empirical weights for an assignment.
CellCounts tally(const std::vector<std::vector<std::vector<std::size_t>>>& cells,
                 int num_groups);

/// Seeded uniform shuffle of the index set, then a ceil/floor halving.
/// fold0 (size ceil(N/2)) estimates quantiles, fold1 (size floor(N/2))
/// estimates CDFs. Deterministic given seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_folds(
    const std::vector<std::size_t>& indices, std::uint64_t seed);

}  // namespace otfair
