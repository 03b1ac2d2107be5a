#pragma once

#include <string>

#include "sun/schema.hpp"
#include "sun/sql_ast.hpp"

namespace sun {

// Uppercase keywords, lowercase aggregate names, table.column refs when a
// join is present, single-quoted text literals.
std::string render_sql(const SqlAst& ast, const SchemaDef& schema);

// Recursive-descent parser for the toy grammar; parse(render(ast)) == ast.
// Throws parse_error with the failing character position.
SqlAst parse_sql(const std::string& text, const SchemaDef& schema);

}  // namespace sun
