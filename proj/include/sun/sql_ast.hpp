#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sun/schema.hpp"

namespace sun {

enum class AggFn { none, count, sum, avg, min, max };
enum class CmpOp { eq, ne, gt, lt };
enum class SortDir { asc, desc };

// An aggregate-or-column expression. fn == none means a bare column.
// star is only legal under count.
struct AggExpr {
    AggFn fn = AggFn::none;
    bool star = false;
    std::size_t col = 0;  // flat schema column index; unused when star

    bool operator==(const AggExpr&) const = default;
};

struct JoinClause {
    std::size_t table = 0;      // joined table index
    std::size_t left_col = 0;   // flat index, column of from_table
    std::size_t right_col = 0;  // flat index, column of the joined table

    bool operator==(const JoinClause&) const = default;
};

struct WherePred {
    std::size_t col = 0;
    CmpOp op = CmpOp::eq;
    Value lit;

    bool operator==(const WherePred&) const = default;
};

struct OrderClause {
    AggExpr key;
    SortDir dir = SortDir::asc;
    std::optional<std::uint32_t> limit;

    bool operator==(const OrderClause&) const = default;
};

struct SqlAst {
    std::vector<AggExpr> select;  // nonempty
    std::size_t from_table = 0;
    std::optional<JoinClause> join;
    std::vector<WherePred> where;  // AND-joined
    std::optional<std::size_t> group_by;
    std::optional<OrderClause> order_by;

    bool operator==(const SqlAst&) const = default;
};

enum class Difficulty { easy, medium, hard, extra };
const char* difficulty_name(Difficulty d);

// Structural validity against the schema; throws data_error on violations.
void validate_ast(const SqlAst& ast, const SchemaDef& schema);

// Sorted WHERE conjuncts, normalized JOIN ON orientation; idempotent.
SqlAst canonicalize(const SqlAst& ast, const SchemaDef& schema);

// Spider-style component count bucketed into four levels.
Difficulty difficulty(const SqlAst& ast);

}  // namespace sun
