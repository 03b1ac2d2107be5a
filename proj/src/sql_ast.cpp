#include "sun/sql_ast.hpp"

#include <algorithm>
#include <tuple>

#include "sun/error.hpp"

namespace sun {

const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
        case Difficulty::extra: return "extra";
    }
    return "?";
}

namespace {

bool in_scope(const SqlAst& ast, const SchemaDef& schema, std::size_t flat_col) {
    const std::size_t t = schema.col_table(flat_col);
    if (t == ast.from_table) return true;
    return ast.join && t == ast.join->table;
}

void validate_agg_expr(const AggExpr& e, const SqlAst& ast, const SchemaDef& schema,
                       const char* where) {
    if (e.star) {
        if (e.fn != AggFn::count) {
            throw data_error(std::string(where) + ": star is only legal under count");
        }
        return;
    }
    if (e.col >= schema.num_columns() || !in_scope(ast, schema, e.col)) {
        throw data_error(std::string(where) + ": column " + std::to_string(e.col) +
                         " not in scope");
    }
    if ((e.fn == AggFn::sum || e.fn == AggFn::avg) && schema.column(e.col).type != ColType::number) {
        throw data_error(std::string(where) + ": sum/avg over non-number column '" +
                         schema.column(e.col).name + "'");
    }
}

}  // namespace

void validate_ast(const SqlAst& ast, const SchemaDef& schema) {
    if (ast.select.empty()) throw data_error("select list is empty");
    if (ast.from_table >= schema.tables.size()) throw data_error("from table out of range");
    if (ast.join) {
        if (ast.join->table >= schema.tables.size() || ast.join->table == ast.from_table) {
            throw data_error("join table out of range or equal to from table");
        }
        if (schema.col_table(ast.join->left_col) != ast.from_table) {
            throw data_error("join ON left column must belong to the from table");
        }
        if (schema.col_table(ast.join->right_col) != ast.join->table) {
            throw data_error("join ON right column must belong to the joined table");
        }
        if (schema.column(ast.join->left_col).type != schema.column(ast.join->right_col).type) {
            throw data_error("join ON columns type-incompatible");
        }
    }

    bool has_agg = false, has_bare = false;
    for (const auto& item : ast.select) {
        validate_agg_expr(item, ast, schema, "select");
        (item.fn == AggFn::none ? has_bare : has_agg) = true;
    }
    if (has_agg && has_bare && !ast.group_by) {
        throw data_error("select mixes aggregates and bare columns without group by");
    }
    if (ast.group_by) {
        if (!in_scope(ast, schema, *ast.group_by)) throw data_error("group by column not in scope");
        for (const auto& item : ast.select) {
            if (item.fn == AggFn::none && item.col != *ast.group_by) {
                throw data_error("bare select column '" + schema.column(item.col).name +
                                 "' is not the group by column");
            }
        }
    }

    for (const auto& pred : ast.where) {
        if (!in_scope(ast, schema, pred.col)) throw data_error("where column not in scope");
        const ColType ct = schema.column(pred.col).type;
        if (value_type(pred.lit) != ct) {
            throw data_error("where literal type does not match column '" +
                             schema.column(pred.col).name + "'");
        }
        if ((pred.op == CmpOp::gt || pred.op == CmpOp::lt) && ct != ColType::number) {
            throw data_error("ordering comparison on text column '" +
                             schema.column(pred.col).name + "'");
        }
    }

    if (ast.order_by) {
        const AggExpr& key = ast.order_by->key;
        validate_agg_expr(key, ast, schema, "order by");
        const bool agg_context = has_agg || ast.group_by.has_value();
        if (key.fn == AggFn::none) {
            if (agg_context) {
                if (!ast.group_by || key.col != *ast.group_by) {
                    throw data_error("order by bare column must be the group by column");
                }
            }
        } else {
            if (!ast.group_by) throw data_error("order by aggregate requires group by");
        }
        if (ast.order_by->limit && *ast.order_by->limit == 0) {
            throw data_error("limit must be positive");
        }
    }
}

SqlAst canonicalize(const SqlAst& ast, const SchemaDef& schema) {
    SqlAst out = ast;
    if (out.join && schema.col_table(out.join->left_col) != out.from_table) {
        std::swap(out.join->left_col, out.join->right_col);
    }
    auto pred_key = [](const WherePred& p) {
        return std::tuple<std::size_t, int, int, double, std::string>(
            p.col, static_cast<int>(p.op), static_cast<int>(p.lit.index()),
            is_number(p.lit) ? std::get<double>(p.lit) : 0.0,
            is_number(p.lit) ? std::string() : std::get<std::string>(p.lit));
    };
    std::sort(out.where.begin(), out.where.end(),
              [&](const WherePred& a, const WherePred& b) { return pred_key(a) < pred_key(b); });
    return out;
}

Difficulty difficulty(const SqlAst& ast) {
    std::size_t aggs = 0;
    for (const auto& item : ast.select)
        if (item.fn != AggFn::none) ++aggs;
    if (ast.order_by && ast.order_by->key.fn != AggFn::none) ++aggs;
    const std::size_t c = (ast.select.size() - 1) + ast.where.size() + (ast.join ? 1 : 0) +
                          (ast.group_by ? 1 : 0) + (ast.order_by ? 1 : 0) + aggs;
    if (c <= 1) return Difficulty::easy;
    if (c <= 3) return Difficulty::medium;
    if (c <= 5) return Difficulty::hard;
    return Difficulty::extra;
}

}  // namespace sun
