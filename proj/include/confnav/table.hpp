#pragma once
// Schema-versioned CSV tables. First line carries the schema tag, second the
// column names. Fields are comma-free by construction here, so no quoting.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "confnav/grid.hpp"

namespace confnav {

struct Table {
    std::string schema;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;  // emitted as leading '#' comment lines

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size()) {
            throw std::invalid_argument("table row width mismatch for schema " + schema);
        }
        rows.push_back(std::move(row));
    }
};

inline std::string format_double(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline std::string render_table(const Table& table) {
    std::ostringstream out;
    out << "# schema=" << table.schema << '\n';
    for (const auto& note : table.notes) out << "# " << note << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out << table.columns[i] << (i + 1 == table.columns.size() ? '\n' : ',');
    }
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << row[i] << (i + 1 == row.size() ? '\n' : ',');
        }
    }
    return out.str();
}

inline void write_table(const Table& table, const std::string& path) {
    write_text_atomic(path, render_table(table));
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace detail

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table: " + path);
    Table table;
    std::string line;
    int line_no = 0;
    bool have_schema = false;
    bool have_columns = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string schema_prefix = "# schema=";
            if (line.rfind(schema_prefix, 0) == 0) {
                table.schema = line.substr(schema_prefix.size());
                have_schema = true;
            } else {
                table.notes.push_back(line.size() > 2 ? line.substr(2) : "");
            }
            continue;
        }
        if (!have_columns) {
            table.columns = detail::split_csv(line);
            have_columns = true;
            continue;
        }
        auto row = detail::split_csv(line);
        if (row.size() != table.columns.size()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": row width does not match header");
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_schema) throw std::runtime_error(path + ": missing '# schema=' header");
    if (!have_columns) throw std::runtime_error(path + ": missing column header");
    return table;
}

inline std::size_t column_index(const Table& table, const std::string& name) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (table.columns[i] == name) return i;
    }
    throw std::runtime_error("table " + table.schema + " has no column '" + name + "'");
}

}  // namespace confnav
