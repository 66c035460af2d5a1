#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "skmfc/errors.hpp"

namespace skmfc {

/// Tabular result of one command: named numeric columns plus summary scalars.
/// All cells are doubles (flags are 0/1) so CSV and JSON emissions can be
/// compared field by field. `meta` travels to a sidecar file next to every
/// emission; nothing in it or in the table may depend on wall-clock time.
struct Report {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, double>> scalars;
    nlohmann::json meta;

    void add_scalar(const std::string& key, double value) { scalars.emplace_back(key, value); }

    double scalar(const std::string& key) const {
        for (const auto& [k, v] : scalars)
            if (k == key) return v;
        throw ConfigError("report has no scalar \"" + key + "\"");
    }

    bool has_scalar(const std::string& key) const {
        for (const auto& [k, v] : scalars)
            if (k == key) return true;
        return false;
    }
};

namespace detail {

inline std::string format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << body;
    if (!out) throw ConfigError("short write on " + path.string());
}

}  // namespace detail

inline std::string report_to_csv(const Report& r) {
    std::string body;
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
        if (c) body += ',';
        body += r.columns[c];
    }
    body += '\n';
    for (const auto& row : r.rows) {
        if (row.size() != r.columns.size())
            throw ConfigError("report row width does not match header");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) body += ',';
            body += detail::format_cell(row[c]);
        }
        body += '\n';
    }
    return body;
}

inline nlohmann::json report_to_json(const Report& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["columns"] = r.columns;
    j["rows"] = r.rows;
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [k, v] : r.scalars) s[k] = v;
    j["scalars"] = s;
    j["meta"] = r.meta;
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    try {
        r.name = j.at("name").get<std::string>();
        r.columns = j.at("columns").get<std::vector<std::string>>();
        r.rows = j.at("rows").get<std::vector<std::vector<double>>>();
        for (auto it = j.at("scalars").begin(); it != j.at("scalars").end(); ++it)
            r.scalars.emplace_back(it.key(), it.value().get<double>());
        r.meta = j.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report json: ") + e.what());
    }
    return r;
}

/// Write the report under `dir` in the requested format ("csv", "json" or
/// "both"), always accompanied by a `<name>.meta.json` sidecar. Returns the
/// paths written. Two-column plot data is emitted when `plot_columns` names
/// an (x, y) pair present in the table.
inline std::vector<std::string> emit_report(const Report& r, const std::string& format,
                                            const std::string& dir,
                                            std::pair<std::string, std::string> plot_columns = {}) {
    if (format != "csv" && format != "json" && format != "both")
        throw ConfigError("emit_report: format must be csv, json, or both");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());

    std::vector<std::string> written;
    const std::filesystem::path base = std::filesystem::path(dir) / r.name;

    if (format == "csv" || format == "both") {
        auto p = base;
        p += ".csv";
        detail::write_text_file(p, report_to_csv(r));
        written.push_back(p.string());
    }
    if (format == "json" || format == "both") {
        auto p = base;
        p += ".json";
        detail::write_text_file(p, report_to_json(r).dump(2) + "\n");
        written.push_back(p.string());
    }
    {
        auto p = base;
        p += ".meta.json";
        detail::write_text_file(p, r.meta.dump(2) + "\n");
        written.push_back(p.string());
    }
    if (!plot_columns.first.empty()) {
        std::size_t xi = r.columns.size(), yi = r.columns.size();
        for (std::size_t c = 0; c < r.columns.size(); ++c) {
            if (r.columns[c] == plot_columns.first) xi = c;
            if (r.columns[c] == plot_columns.second) yi = c;
        }
        if (xi == r.columns.size() || yi == r.columns.size())
            throw ConfigError("plot columns not present in report");
        std::string body = "# " + plot_columns.first + " " + plot_columns.second + "\n";
        for (const auto& row : r.rows)
            body += detail::format_cell(row[xi]) + " " + detail::format_cell(row[yi]) + "\n";
        auto p = base;
        p += "." + plot_columns.first + "_vs_" + plot_columns.second + ".dat";
        detail::write_text_file(p, body);
        written.push_back(p.string());
    }
    return written;
}

}  // namespace skmfc
