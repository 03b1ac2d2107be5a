#include "sun/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "sun/error.hpp"

namespace sun {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

bool value_less(const Value& a, const Value& b) {
    if (a.index() != b.index()) return a.index() < b.index();
    if (is_number(a)) return std::get<double>(a) < std::get<double>(b);
    return std::get<std::string>(a) < std::get<std::string>(b);
}

std::size_t SchemaDef::num_columns() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
}

std::size_t SchemaDef::flat_col(std::size_t table, std::size_t col) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < table; ++i) off += tables[i].columns.size();
    return off + col;
}

std::size_t SchemaDef::col_table(std::size_t flat) const {
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (flat < tables[i].columns.size()) return i;
        flat -= tables[i].columns.size();
    }
    throw data_error("column index out of schema range: schema '" + id + "'");
}

std::size_t SchemaDef::col_within_table(std::size_t flat) const {
    for (const auto& t : tables) {
        if (flat < t.columns.size()) return flat;
        flat -= t.columns.size();
    }
    throw data_error("column index out of schema range: schema '" + id + "'");
}

const ColumnDef& SchemaDef::column(std::size_t flat) const {
    return tables[col_table(flat)].columns[col_within_table(flat)];
}

std::size_t SchemaDef::table_index(const std::string& name) const {
    const std::string needle = lower(name);
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (lower(tables[i].name) == needle) return i;
    }
    throw data_error("unknown table '" + name + "' in schema '" + id + "'");
}

std::size_t SchemaDef::find_column(const std::string& table_name, const std::string& col_name) const {
    const std::string needle = lower(col_name);
    if (!table_name.empty()) {
        const std::size_t t = table_index(table_name);
        for (std::size_t c = 0; c < tables[t].columns.size(); ++c) {
            if (lower(tables[t].columns[c].name) == needle) return flat_col(t, c);
        }
        throw data_error("unknown column '" + col_name + "' in table '" + table_name + "'");
    }
    for (std::size_t t = 0; t < tables.size(); ++t) {
        for (std::size_t c = 0; c < tables[t].columns.size(); ++c) {
            if (lower(tables[t].columns[c].name) == needle) return flat_col(t, c);
        }
    }
    throw data_error("unknown column '" + col_name + "' in schema '" + id + "'");
}

void SchemaDef::validate() const {
    if (tables.empty()) throw data_error("schema '" + id + "' has no tables");
    std::set<std::string> tnames;
    for (const auto& t : tables) {
        if (t.columns.empty()) throw data_error("table '" + t.name + "' has no columns");
        if (!tnames.insert(lower(t.name)).second) {
            throw data_error("duplicate table name '" + t.name + "' in schema '" + id + "'");
        }
        std::set<std::string> cnames;
        for (const auto& c : t.columns) {
            if (c.name.empty()) throw data_error("empty column name in table '" + t.name + "'");
            if (!cnames.insert(lower(c.name)).second) {
                throw data_error("duplicate column '" + c.name + "' in table '" + t.name + "'");
            }
        }
    }
    for (const auto& fk : foreign_keys) {
        const std::size_t t = table_index(fk.table);
        const std::size_t rt = table_index(fk.ref_table);
        const std::size_t c = find_column(fk.table, fk.column);
        const std::size_t rc = find_column(fk.ref_table, fk.ref_column);
        (void)t;
        (void)rt;
        if (column(c).type != column(rc).type) {
            throw data_error("foreign key type mismatch: " + fk.table + "." + fk.column + " -> " +
                             fk.ref_table + "." + fk.ref_column + " in schema '" + id + "'");
        }
    }
}

void DatabaseInstance::validate(const SchemaDef& schema) const {
    if (rows.size() != schema.tables.size()) {
        throw data_error("database for schema '" + schema.id + "' has " + std::to_string(rows.size()) +
                         " tables, schema declares " + std::to_string(schema.tables.size()));
    }
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const auto& cols = schema.tables[t].columns;
        for (const auto& row : rows[t]) {
            if (row.size() != cols.size()) {
                throw data_error("row arity mismatch in table '" + schema.tables[t].name + "'");
            }
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (value_type(row[c]) != cols[c].type) {
                    throw data_error("cell type mismatch in table '" + schema.tables[t].name +
                                     "' column '" + cols[c].name + "'");
                }
                if (is_number(row[c]) && !std::isfinite(std::get<double>(row[c]))) {
                    throw data_error("non-finite number in table '" + schema.tables[t].name + "'");
                }
            }
        }
    }
}

}  // namespace sun
