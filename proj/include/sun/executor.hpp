#pragma once

#include <vector>

#include "sun/schema.hpp"
#include "sun/sql_ast.hpp"

namespace sun {

using ResultRow = std::vector<Value>;
using ResultTable = std::vector<ResultRow>;

// Bag-semantics evaluation: filter, inner equi-join, group, aggregate,
// order/limit. Without ORDER BY the final rows are sorted lexicographically so
// result comparison is order-insensitive. Deterministic and total on valid
// inputs.
ResultTable execute(const SqlAst& ast, const DatabaseInstance& db, const SchemaDef& schema);

bool results_equal(const ResultTable& a, const ResultTable& b);

}  // namespace sun
