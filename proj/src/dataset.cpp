#include "otfair/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace otfair {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& text, const char* what,
                    std::size_t row) {
    try {
        std::size_t pos = 0;
        const double value = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw SchemaError(std::string("row ") + std::to_string(row) +
                              ": cannot parse " + what + " value '" + text + "'",
                          row);
    }
}

int group_index(Dataset& data, const std::string& label, int max_groups,
                std::size_t row) {
    auto it = std::find(data.group_labels.begin(), data.group_labels.end(), label);
    if (it != data.group_labels.end()) {
        return static_cast<int>(it - data.group_labels.begin());
    }
    if (static_cast<int>(data.group_labels.size()) >= max_groups) {
        throw SchemaError("row " + std::to_string(row) + ": more than " +
                              std::to_string(max_groups) + " group labels",
                          row);
    }
    data.group_labels.push_back(label);
    return static_cast<int>(data.group_labels.size()) - 1;
}

Record parse_record(Dataset& data, const std::string& v_text,
                    const std::string& s_text, const std::string& score_text,
                    const std::optional<std::string>& y_text,
                    const LoadOptions& options, std::size_t row) {
    Record r;
    r.v = parse_double(v_text, "v", row);
    if (!(r.v >= 0.0 && r.v <= 1.0)) {
        throw SchemaError("row " + std::to_string(row) + ": v = " + v_text +
                              " outside [0,1]",
                          row);
    }
    r.s = group_index(data, s_text, options.max_groups, row);
    if (!score_text.empty()) {
        r.score = parse_double(score_text, options.score_column.c_str(), row);
        if (!std::isfinite(r.score)) {
            throw SchemaError("row " + std::to_string(row) + ": non-finite " +
                                  options.score_column,
                              row);
        }
    } else if (options.require_score) {
        throw SchemaError("row " + std::to_string(row) + ": empty " +
                              options.score_column + " value",
                          row);
    }
    if (y_text && !y_text->empty()) {
        r.y = parse_double(*y_text, "y", row);
    }
    return r;
}

Dataset load_csv(std::istream& in, const LoadOptions& options) {
    Dataset data;
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("empty input file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    data.columns = split_csv_line(line);

    const auto find_col = [&](const std::string& name) {
        auto it = std::find(data.columns.begin(), data.columns.end(), name);
        return it == data.columns.end()
                   ? -1
                   : static_cast<int>(it - data.columns.begin());
    };
    const int v_col = find_col("v");
    const int s_col = find_col("s");
    const int score_col = find_col(options.score_column);
    const int y_col = find_col("y");
    if (v_col < 0) throw SchemaError("missing required column 'v'");
    if (s_col < 0) throw SchemaError("missing required column 's'");
    if (score_col < 0 && options.require_score) {
        throw SchemaError("missing required column '" + options.score_column + "'");
    }

    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != data.columns.size()) {
            throw SchemaError("row " + std::to_string(row_number) + ": has " +
                                  std::to_string(cells.size()) +
                                  " cells, header has " +
                                  std::to_string(data.columns.size()),
                              row_number);
        }
        std::optional<std::string> y_text;
        if (y_col >= 0) y_text = cells[y_col];
        data.records.push_back(parse_record(
            data, cells[v_col], cells[s_col],
            score_col >= 0 ? cells[score_col] : std::string(), y_text, options,
            row_number));
        data.rows.push_back(std::move(cells));
    }
    return data;
}

Dataset load_jsonl(std::istream& in, const LoadOptions& options) {
    Dataset data;
    data.columns = {"v", "s", options.score_column, "y"};
    std::string line;
    std::size_t row_number = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw SchemaError("row " + std::to_string(row_number) +
                                  ": invalid JSON: " + e.what(),
                              row_number);
        }
        const auto text_of = [&](const char* key) -> std::string {
            if (!j.contains(key)) return {};
            const auto& value = j.at(key);
            if (value.is_string()) return value.get<std::string>();
            return value.dump();
        };
        if (!j.contains("v") || !j.contains("s")) {
            throw SchemaError("row " + std::to_string(row_number) +
                                  ": needs 'v' and 's' keys",
                              row_number);
        }
        std::optional<std::string> y_text;
        if (j.contains("y")) y_text = text_of("y");
        data.records.push_back(parse_record(data, text_of("v"), text_of("s"),
                                            text_of(options.score_column.c_str()),
                                            y_text, options, row_number));
        data.rows.push_back({text_of("v"), text_of("s"),
                             text_of(options.score_column.c_str()),
                             y_text.value_or("")});
    }
    if (data.records.empty()) throw SchemaError("empty input file");
    return data;
}

}  // namespace

int Dataset::column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path);
    return options.jsonl ? load_jsonl(in, options) : load_csv(in, options);
}

void write_table(const std::string& path,
                 const std::vector<std::string>& columns,
                 const std::vector<std::vector<std::string>>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (j) out << ',';
            out << columns[j];
        }
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (j) out << ',';
                out << row[j];
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

}  // namespace otfair
