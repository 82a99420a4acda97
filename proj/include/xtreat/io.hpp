#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace xtreat {

using json = nlohmann::ordered_json;

// %.17g round-trips every finite double
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& tok, std::size_t line_no, const std::string& col) {
    if (tok.empty())
        throw std::runtime_error("line " + std::to_string(line_no) + ": empty value in column '" +
                                 col + "'");
    const char* begin = tok.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end != begin + tok.size() || errno == ERANGE)
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric value '" +
                                 tok + "' in column '" + col + "'");
    if (!std::isfinite(v))
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite value in column '" +
                                 col + "'");
    return v;
}

}  // namespace detail

// CSV schema: header row naming columns {t, y[, x1..xr][, weight]} in any
// order; '#' lines are comments (so files written with a parameter header
// block read back cleanly).
inline Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;

    // header
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        header = detail::split_csv_line(t);
        break;
    }
    if (header.empty()) throw std::runtime_error("empty input: no header row");

    int t_col = -1, y_col = -1, w_col = -1;
    std::vector<std::pair<int, int>> x_cols;  // (covariate index, column)
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == "t") {
            if (t_col >= 0) throw std::runtime_error("duplicate column 't'");
            t_col = static_cast<int>(c);
        } else if (name == "y") {
            if (y_col >= 0) throw std::runtime_error("duplicate column 'y'");
            y_col = static_cast<int>(c);
        } else if (name == "weight") {
            if (w_col >= 0) throw std::runtime_error("duplicate column 'weight'");
            w_col = static_cast<int>(c);
        } else if (name.size() > 1 && name.front() == 'x') {
            int idx = 0;
            for (std::size_t p = 1; p < name.size(); ++p) {
                if (!std::isdigit(static_cast<unsigned char>(name[p])))
                    throw std::runtime_error("unknown column '" + name + "'");
                idx = idx * 10 + (name[p] - '0');
            }
            if (idx < 1) throw std::runtime_error("unknown column '" + name + "'");
            x_cols.emplace_back(idx, static_cast<int>(c));
        } else {
            throw std::runtime_error("unknown column '" + name + "'");
        }
    }
    if (t_col < 0) throw std::runtime_error("missing required column 't'");
    if (y_col < 0) throw std::runtime_error("missing required column 'y'");
    std::sort(x_cols.begin(), x_cols.end());
    for (std::size_t i = 0; i < x_cols.size(); ++i) {
        if (x_cols[i].first != static_cast<int>(i) + 1)
            throw std::runtime_error("covariate columns must be named x1..xr without gaps");
    }

    Dataset ds;
    ds.r = static_cast<int>(x_cols.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const std::vector<std::string> tok = detail::split_csv_line(trimmed);
        if (tok.size() != header.size())
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(tok.size()));
        Observation o;
        o.t = detail::parse_double(tok[t_col], line_no, "t");
        o.y = detail::parse_double(tok[y_col], line_no, "y");
        o.x.reserve(x_cols.size());
        for (const auto& [idx, col] : x_cols)
            o.x.push_back(detail::parse_double(tok[col], line_no, header[col]));
        if (w_col >= 0) o.weight = detail::parse_double(tok[w_col], line_no, "weight");
        ds.obs.push_back(std::move(o));
    }
    if (ds.obs.empty()) throw std::runtime_error("no data rows");
    ds.validate();
    return ds;
}

inline Dataset read_dataset_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    out << "t";
    for (int j = 1; j <= ds.r; ++j) out << ",x" << j;
    out << ",y";
    const bool has_w = !ds.obs.empty() && ds.obs.front().weight.has_value();
    if (has_w) out << ",weight";
    out << "\n";
    for (const Observation& o : ds.obs) {
        out << format_double(o.t);
        for (double x : o.x) out << "," << format_double(x);
        out << "," << format_double(o.y);
        if (has_w) out << "," << format_double(*o.weight);
        out << "\n";
    }
}

inline void write_dataset_csv_file(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_dataset_csv(out, ds);
}

// Ordered key/value block recording every effective parameter of a run;
// rendered as '# key = value' comment lines atop CSV outputs and as an
// object in JSON outputs.
class Params {
public:
    void add(const std::string& key, const std::string& value) { kv_.emplace_back(key, value); }
    void add(const std::string& key, const char* value) { kv_.emplace_back(key, value); }
    void add(const std::string& key, double value) { kv_.emplace_back(key, format_double(value)); }
    void add(const std::string& key, int value) { kv_.emplace_back(key, std::to_string(value)); }
    void add(const std::string& key, std::size_t value) {
        kv_.emplace_back(key, std::to_string(value));
    }
    void add(const std::string& key, bool value) {
        kv_.emplace_back(key, value ? "true" : "false");
    }
    const std::vector<std::pair<std::string, std::string>>& items() const { return kv_; }

private:
    std::vector<std::pair<std::string, std::string>> kv_;
};

// Rectangular output table: named columns, json-typed cells (double or string).
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    std::vector<json>& add_row() {
        rows.emplace_back();
        rows.back().reserve(columns.size());
        return rows.back();
    }
};

inline void write_table_csv(std::ostream& out, const Params& params, const Table& table) {
    for (const auto& [k, v] : params.items()) out << "# " << k << " = " << v << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
    out << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::logic_error("table row width does not match the column count");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ",";
            const json& cell = row[c];
            if (cell.is_number_float())
                out << format_double(cell.get<double>());
            else if (cell.is_string())
                out << cell.get<std::string>();
            else
                out << cell.dump();
        }
        out << "\n";
    }
}

inline void write_table_json(std::ostream& out, const Params& params, const Table& table) {
    json doc;
    json p = json::object();
    for (const auto& [k, v] : params.items()) p[k] = v;
    doc["params"] = std::move(p);
    json rows = json::array();
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::logic_error("table row width does not match the column count");
        json obj = json::object();
        for (std::size_t c = 0; c < row.size(); ++c) obj[table.columns[c]] = row[c];
        rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    out << doc.dump(2) << "\n";
}

inline void write_table_csv_file(const std::string& path, const Params& params,
                                 const Table& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_table_csv(out, params, table);
}

inline void write_table_json_file(const std::string& path, const Params& params,
                                  const Table& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_table_json(out, params, table);
}

}  // namespace xtreat
