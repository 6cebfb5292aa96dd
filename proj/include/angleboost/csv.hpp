#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/dataset.hpp"
#include "angleboost/format.hpp"
#include "angleboost/matrix.hpp"

namespace angleboost {

/// Raw comma-separated table: first row is the header, cells kept as text.
/// Quoted fields may contain commas and doubled quotes; embedded newlines are
/// not supported. A cell is missing when empty or the literal NA.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw std::invalid_argument("column '" + name + "' not found in CSV header");
    }

    bool has_column(const std::string& name) const {
        return std::find(header.begin(), header.end(), name) != header.end();
    }
};

inline bool csv_cell_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"' && cell.empty()) {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    if (quoted)
        throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": unterminated quote");
    cells.push_back(std::move(cell));
    return cells;
}

inline std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

inline bool parse_numeric_cell(const std::string& cell, double& out) {
    try {
        std::size_t pos = 0;
        std::size_t begin = 0;
        while (begin < cell.size() && std::isspace(static_cast<unsigned char>(cell[begin]))) ++begin;
        const std::string body = cell.substr(begin);
        if (body.empty()) return false;
        out = std::stod(body, &pos);
        while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
        return pos == body.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace detail

inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            table.header = detail::split_csv_line(line, line_no);
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells = detail::split_csv_line(line, line_no);
        if (cells.size() != table.header.size())
            throw std::invalid_argument(path + ": row " + std::to_string(line_no - 1) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw std::invalid_argument(path + " is empty");
    if (table.rows.empty()) throw std::invalid_argument(path + " contains no data rows");
    return table;
}

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// Numeric when every observed cell parses as a number; categorical otherwise.
inline std::vector<ColumnSchema> infer_schema(const CsvTable& table,
                                              const std::string& label_column) {
    std::vector<ColumnSchema> schema;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (table.header[j] == label_column) continue;
        bool numeric = true;
        bool seen = false;
        for (const auto& row : table.rows) {
            if (csv_cell_missing(row[j])) continue;
            seen = true;
            double value = 0.0;
            if (!detail::parse_numeric_cell(row[j], value)) {
                numeric = false;
                break;
            }
        }
        schema.push_back({table.header[j], (numeric && seen) ? ColumnKind::numeric
                                                             : ColumnKind::categorical});
    }
    return schema;
}

/// Fitted column transforms: numeric columns impute the training mean;
/// categorical columns impute the training mode and expand to one indicator
/// per observed category. Unseen categories at encode time map to all zeros.
class FeatureEncoder {
public:
    struct Source {
        std::string name;
        ColumnKind kind = ColumnKind::numeric;
        double impute_value = 0.0;        // numeric
        std::string impute_category;      // categorical
        std::vector<std::string> categories;
    };

    std::vector<Source> sources;

    std::size_t encoded_dim() const {
        std::size_t d = 0;
        for (const Source& s : sources)
            d += s.kind == ColumnKind::numeric ? 1 : s.categories.size();
        return d;
    }

    std::vector<std::string> feature_names() const {
        std::vector<std::string> names;
        for (const Source& s : sources) {
            if (s.kind == ColumnKind::numeric) {
                names.push_back(s.name);
            } else {
                for (const std::string& cat : s.categories) names.push_back(s.name + "=" + cat);
            }
        }
        return names;
    }

    std::vector<bool> continuous_mask() const {
        std::vector<bool> mask;
        for (const Source& s : sources) {
            if (s.kind == ColumnKind::numeric) mask.push_back(true);
            else mask.insert(mask.end(), s.categories.size(), false);
        }
        return mask;
    }

    Matrix encode(const CsvTable& table) const {
        std::vector<std::size_t> column_of(sources.size());
        for (std::size_t s = 0; s < sources.size(); ++s)
            column_of[s] = table.column_index(sources[s].name);

        Matrix x(table.rows.size(), encoded_dim());
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            std::size_t out = 0;
            for (std::size_t s = 0; s < sources.size(); ++s) {
                const Source& src = sources[s];
                const std::string& cell = table.rows[i][column_of[s]];
                if (src.kind == ColumnKind::numeric) {
                    double value = src.impute_value;
                    if (!csv_cell_missing(cell) && !detail::parse_numeric_cell(cell, value))
                        throw std::invalid_argument("unparseable numeric cell at row " +
                                                    std::to_string(i + 1) + ", column '" +
                                                    src.name + "'");
                    x(i, out++) = value;
                } else {
                    const std::string& value = csv_cell_missing(cell) ? src.impute_category : cell;
                    for (const std::string& cat : src.categories) x(i, out++) = (value == cat) ? 1.0 : 0.0;
                }
            }
        }
        return x;
    }
};

inline FeatureEncoder fit_encoder(const CsvTable& table, const std::string& label_column,
                                  const std::vector<ColumnSchema>& schema) {
    FeatureEncoder encoder;
    for (const ColumnSchema& col : schema) {
        if (col.name == label_column)
            throw std::invalid_argument("label column '" + col.name + "' cannot be a feature");
        const std::size_t j = table.column_index(col.name);
        FeatureEncoder::Source src;
        src.name = col.name;
        src.kind = col.kind;
        if (col.kind == ColumnKind::numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < table.rows.size(); ++i) {
                const std::string& cell = table.rows[i][j];
                if (csv_cell_missing(cell)) continue;
                double value = 0.0;
                if (!detail::parse_numeric_cell(cell, value))
                    throw std::invalid_argument("unparseable numeric cell at row " +
                                                std::to_string(i + 1) + ", column '" + col.name +
                                                "'");
                sum += value;
                ++count;
            }
            if (count == 0)
                throw std::invalid_argument("column '" + col.name + "' has no observed values");
            src.impute_value = sum / static_cast<double>(count);
        } else {
            std::map<std::string, std::size_t> counts;
            for (const auto& row : table.rows)
                if (!csv_cell_missing(row[j])) ++counts[row[j]];
            if (counts.empty())
                throw std::invalid_argument("column '" + col.name + "' has no observed values");
            src.categories.reserve(counts.size());
            for (const auto& [cat, cnt] : counts) src.categories.push_back(cat);
            std::size_t best = 0;
            for (const auto& [cat, cnt] : counts)
                if (cnt > best) best = cnt;
            for (const auto& [cat, cnt] : counts)
                if (cnt == best) {
                    src.impute_category = cat;  // std::map order: ties take the smallest
                    break;
                }
        }
        encoder.sources.push_back(std::move(src));
    }
    return encoder;
}

/// Label values mapped to {1..K} by sorted distinct order.
struct LabelMap {
    std::string column;
    std::vector<std::string> classes;

    int k() const { return static_cast<int>(classes.size()); }

    int index_of(const std::string& value) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == value) return static_cast<int>(i) + 1;
        throw std::invalid_argument("label value '" + value + "' not seen during training");
    }
};

inline LabelMap fit_label_map(const CsvTable& table, const std::string& label_column) {
    const std::size_t j = table.column_index(label_column);
    std::map<std::string, bool> distinct;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string& cell = table.rows[i][j];
        if (csv_cell_missing(cell))
            throw std::invalid_argument("missing label at row " + std::to_string(i + 1));
        distinct[cell] = true;
    }
    if (distinct.size() < 2)
        throw std::invalid_argument("label column '" + label_column + "' needs >= 2 classes");
    if (distinct.size() > 50)
        throw std::invalid_argument("label column '" + label_column + "' has " +
                                    std::to_string(distinct.size()) + " distinct values (max 50)");
    LabelMap map;
    map.column = label_column;
    for (const auto& [value, seen] : distinct) map.classes.push_back(value);
    return map;
}

struct LoadedCsv {
    Dataset dataset;
    FeatureEncoder encoder;
    LabelMap labels;
};

inline LoadedCsv load_csv_full(const std::string& path, const std::string& label_column,
                               const std::vector<ColumnSchema>& schema) {
    const CsvTable table = read_csv_table(path);
    LoadedCsv out;
    out.labels = fit_label_map(table, label_column);
    out.encoder = fit_encoder(table, label_column, schema);
    out.dataset.x = out.encoder.encode(table);
    out.dataset.k = out.labels.k();
    out.dataset.feature_names = out.encoder.feature_names();
    out.dataset.continuous = out.encoder.continuous_mask();
    const std::size_t j = table.column_index(label_column);
    out.dataset.y.reserve(table.rows.size());
    for (const auto& row : table.rows) out.dataset.y.push_back(out.labels.index_of(row[j]));
    out.dataset.validate();
    return out;
}

inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::vector<ColumnSchema>& schema) {
    return load_csv_full(path, label_column, schema).dataset;
}

/// Writes the dataset back out as CSV, label column last.
inline void export_csv(std::ostream& out, const Dataset& ds, const std::string& label_name = "label") {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        const std::string name = ds.feature_names.empty() ? "x" + std::to_string(j + 1)
                                                          : ds.feature_names[j];
        out << detail::csv_quote(name) << ',';
    }
    out << detail::csv_quote(label_name) << '\n';
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) out << detail::format_double(ds.x(i, j)) << ',';
        out << ds.y[i] << '\n';
    }
}

}  // namespace angleboost
