#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simengine/state.hpp"
#include "simengine/value.hpp"

namespace simengine {

/// Column-named rows of scalars, printable as aligned text or CSV.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Scalar>> rows;
    /// Side remarks (e.g. excluded values) that do not belong in a cell.
    std::vector<std::string> notes;

    std::optional<std::size_t> index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    }

    const Scalar& at(std::size_t row, std::string_view column) const {
        auto i = index(column);
        if (!i) throw NotFoundError("no column '" + std::string(column) + "'");
        return rows.at(row)[*i];
    }

    std::optional<double> number(std::size_t row, std::string_view column) const { return at(row, column).to_number(); }
};

namespace detail {

inline std::string text_cell(const Scalar& v) {
    if (auto d = std::get_if<double>(&v.storage()); d && std::isfinite(*d)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.7g", *d);
        return buf;
    }
    return v.display();
}

inline std::string csv_cell(const Scalar& v) {
    if (v.is_missing()) return "NA";
    std::string s = v.display();
    if (v.is_text() && s.find_first_of(",\"\n\r") != std::string::npos) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + '"';
    }
    return s;
}

}  // namespace detail

/// Right-aligned columns, like a printed data frame (numbers to 7
/// significant digits).
inline std::string render_text(const Table& t) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back(t.columns);
    for (const auto& row : t.rows) {
        std::vector<std::string> line;
        for (const auto& v : row) line.push_back(detail::text_cell(v));
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(t.columns.size(), 0);
    for (const auto& line : cells)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    std::string out;
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (i) out += ' ';
            out.append(width[i] - line[i].size(), ' ');
            out += line[i];
        }
        out += '\n';
    }
    return out;
}

/// Full-precision CSV (shortest round-trip numbers, NA for missing).
inline std::string render_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ',';
        out += detail::csv_cell(Scalar(t.columns[i]));
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += detail::csv_cell(row[i]);
        }
        out += '\n';
    }
    return out;
}

// ---- views of the state tables ---------------------------------------------

namespace detail {

inline void identity_columns(const SimulationState& s, Table& t) {
    t.columns = {"sim_uid", "level_id", "rep_id"};
    if (s.config.return_batch_id) t.columns.push_back("batch_id");
    for (const auto& n : s.schema.names()) t.columns.push_back(n);
    t.columns.push_back("runtime");
}

inline std::vector<Scalar> identity_cells(const SimulationState& s, const ReplicateId& id, double runtime) {
    std::vector<Scalar> row{id.sim_uid, id.level_id, id.rep_id};
    if (s.config.return_batch_id) row.emplace_back(id.batch_id);
    for (const auto& [name, value] : s.plan.combo(id.level_id).assignments) row.push_back(value.column_value());
    row.emplace_back(runtime);
    return row;
}

inline void check_level_filter(const SimulationState& s, std::optional<std::uint64_t> level_id) {
    if (level_id && !s.plan.has_level(*level_id))
        throw NotFoundError("unknown level id " + std::to_string(*level_id));
}

}  // namespace detail

/// Results as printed: identity, batch_id when return_batch_id is set, level
/// columns, runtime, then outputs in first-seen order.
inline Table results_table(const SimulationState& s, std::optional<std::uint64_t> level_id = std::nullopt) {
    detail::check_level_filter(s, level_id);
    Table t;
    detail::identity_columns(s, t);
    const std::size_t fixed = t.columns.size();
    for (const auto& r : s.results)
        for (const auto& [name, value] : r.outputs)
            if (std::find(t.columns.begin() + static_cast<std::ptrdiff_t>(fixed), t.columns.end(), name) == t.columns.end())
                t.columns.push_back(name);
    for (const auto& r : s.results) {
        if (level_id && r.id.level_id != *level_id) continue;
        auto row = detail::identity_cells(s, r.id, r.runtime);
        for (std::size_t c = fixed; c < t.columns.size(); ++c) {
            const Scalar* v = r.find(t.columns[c]);
            row.push_back(v ? *v : Scalar{});
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table messages_table(const SimulationState& s, const std::vector<MessageRow>& rows,
                            std::optional<std::uint64_t> level_id = std::nullopt) {
    detail::check_level_filter(s, level_id);
    Table t;
    detail::identity_columns(s, t);
    t.columns.push_back("message");
    t.columns.push_back("call");
    for (const auto& r : rows) {
        if (level_id && r.id.level_id != *level_id) continue;
        auto row = detail::identity_cells(s, r.id, r.runtime);
        row.emplace_back(r.message);
        row.emplace_back(r.call);
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table errors_table(const SimulationState& s, std::optional<std::uint64_t> level_id = std::nullopt) {
    return messages_table(s, s.errors, level_id);
}

inline Table warnings_table(const SimulationState& s, std::optional<std::uint64_t> level_id = std::nullopt) {
    return messages_table(s, s.warnings, level_id);
}

}  // namespace simengine
