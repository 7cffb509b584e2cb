#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ridgeless/errors.hpp"

namespace ridgeless {

/// Rectangular table of reals with free-form metadata (config echo, version,
/// wall-clock, diagnostics).
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json metadata = nlohmann::json::object();

    void add_row(std::vector<double> row) {
        if (row.size() != columns.size()) {
            throw InputError("ResultTable: row has " + std::to_string(row.size()) + " values, expected " +
                             std::to_string(columns.size()));
        }
        rows.push_back(std::move(row));
    }

    [[nodiscard]] std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw InputError("ResultTable: no column named '" + name + "'");
    }

    [[nodiscard]] std::vector<double> column(const std::string& name) const {
        const std::size_t c = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

/// Shortest round-trip decimal representation, locale independent.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// RFC-4180 field quoting: fields containing a comma, quote or line break are
/// wrapped in quotes with embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string to_csv(const ResultTable& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ',';
        out += csv_field(t.columns[i]);
    }
    out += "\r\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_real(row[i]);
        }
        out += "\r\n";
    }
    return out;
}

inline nlohmann::json to_json(const ResultTable& t) {
    nlohmann::json j;
    j["columns"] = t.columns;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row = nlohmann::json::array();
        for (const double v : r) {
            row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_real(v)));
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    j["metadata"] = t.metadata;
    return j;
}

/// Writes <dir>/<stem>.csv and, when json is set, <dir>/<stem>.json. Creates
/// the directory if needed. Returns the CSV path.
inline std::filesystem::path write_table(const ResultTable& t, const std::filesystem::path& dir, const std::string& stem,
                                         bool json = true) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / (stem + ".csv");
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw InputError("cannot write " + csv_path.string());
        out << to_csv(t);
    }
    if (json) {
        std::ofstream out(dir / (stem + ".json"), std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir / (stem + ".json")).string());
        out << to_json(t).dump(2) << "\n";
    }
    return csv_path;
}

}  // namespace ridgeless
