#pragma once

#include <string>
#include <variant>
#include <vector>

namespace sun {

enum class ColType { text, number };

// A literal or cell value. Numbers are f64; the toy domain has no NULLs.
using Value = std::variant<double, std::string>;

inline bool is_number(const Value& v) { return v.index() == 0; }
inline ColType value_type(const Value& v) { return is_number(v) ? ColType::number : ColType::text; }

// Total order on values: numbers before texts, then by value. Keeps executor
// output ordering deterministic.
bool value_less(const Value& a, const Value& b);

struct ColumnDef {
    std::string name;
    ColType type;
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;
};

struct ForeignKey {
    std::string table;
    std::string column;
    std::string ref_table;
    std::string ref_column;
};

// Tables with typed columns. Columns are addressed by a flat index across the
// schema (tables in declaration order).
struct SchemaDef {
    std::string id;
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;

    std::size_t num_columns() const;
    std::size_t flat_col(std::size_t table, std::size_t col) const;
    std::size_t col_table(std::size_t flat) const;
    std::size_t col_within_table(std::size_t flat) const;
    const ColumnDef& column(std::size_t flat) const;
    std::size_t table_index(const std::string& name) const;  // throws data_error
    // Case-insensitive column lookup, optionally restricted to one table.
    std::size_t find_column(const std::string& table_name, const std::string& col_name) const;

    // Uniqueness and foreign-key consistency; throws data_error naming the violation.
    void validate() const;
};

// Rows per table, aligned with the schema's table order.
struct DatabaseInstance {
    std::string schema_id;
    std::vector<std::vector<std::vector<Value>>> rows;  // [table][row][col]

    void validate(const SchemaDef& schema) const;
};

}  // namespace sun
