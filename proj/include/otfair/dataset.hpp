#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otfair/partition.hpp"

namespace otfair {

/// A loaded tabular dataset. Rows keep their original cells so commands can
/// pass columns through untouched; records hold the parsed (v, s, score, y)
/// with s mapped to indices in first-appearance order of the label.
struct Dataset {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<Record> records;
    std::vector<std::string> group_labels;

    int column_index(const std::string& name) const;
};

/// Thrown on malformed input; `row` is 1-based (0 = header/file level).
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& message, std::size_t row_number = 0)
        : std::runtime_error(message), row(row_number) {}
    std::size_t row;
};

struct LoadOptions {
    bool jsonl = false;
    /// Column holding the value to analyze; cmd_evaluate points this at the
    /// prediction column.
    std::string score_column = "score";
    bool require_score = true;
    int max_groups = 64;
};

Dataset load_dataset(const std::string& path, const LoadOptions& options = {});

/// Writes the dataset plus extra columns, atomically (temp file + rename).
void write_table(const std::string& path,
                 const std::vector<std::string>& columns,
                 const std::vector<std::vector<std::string>>& rows);

}  // namespace otfair
