#include "sun/grammar.hpp"

#include <algorithm>
#include <set>

#include "sun/error.hpp"

namespace sun {

const std::vector<Value>& literal_pool() {
    static const std::vector<Value> pool = {
        Value{1.0},     Value{2.0},     Value{3.0},      Value{5.0},
        Value{10.0},    Value{20.0},    Value{"red"},    Value{"blue"},
        Value{"green"}, Value{"london"}, Value{"paris"}, Value{"tokyo"},
    };
    return pool;
}

std::string rule_name(std::size_t rule) {
    static const char* names[] = {
        "query",      "join_none",  "join_some",  "sel_plain_1", "sel_plain_2", "sel_agg_1",
        "sel_agg_2",  "sel_mixed",  "count_star", "count",       "sum",         "avg",
        "min",        "max",        "where_none", "where_1",     "where_2",     "op_eq",
        "op_ne",      "op_gt",      "op_lt",      "group_none",  "group_some",  "order_none",
        "order_col",  "order_agg",  "dir_asc",    "dir_desc",    "limit_none",  "limit_1",
        "limit_2",    "limit_3",    "limit_5",    "limit_10",
    };
    if (rule < rule_lit_base) return names[rule];
    if (rule < kRuleCount) return "lit_" + std::to_string(rule - rule_lit_base);
    return "invalid_rule_" + std::to_string(rule);
}

std::string action_str(const Action& a, const SchemaDef& schema) {
    switch (a.kind) {
        case Action::Kind::apply_rule:
            return "rule:" + rule_name(a.index);
        case Action::Kind::select_table:
            if (a.index >= schema.tables.size()) return "table:#" + std::to_string(a.index);
            return "table:" + schema.tables[a.index].name;
        case Action::Kind::select_column:
            if (a.index >= schema.num_columns()) return "column:#" + std::to_string(a.index);
            return "column:" + schema.tables[schema.col_table(a.index)].name + "." +
                   schema.column(a.index).name;
    }
    return "?";
}

namespace {

AggFn rule_to_agg(std::size_t rule) {
    switch (rule) {
        case rule_agg_count_star:
        case rule_agg_count: return AggFn::count;
        case rule_agg_sum: return AggFn::sum;
        case rule_agg_avg: return AggFn::avg;
        case rule_agg_min: return AggFn::min;
        case rule_agg_max: return AggFn::max;
        default: throw data_error("rule " + rule_name(rule) + " is not an aggregate");
    }
}

std::size_t agg_to_rule(AggFn fn, bool star) {
    switch (fn) {
        case AggFn::count: return star ? rule_agg_count_star : rule_agg_count;
        case AggFn::sum: return rule_agg_sum;
        case AggFn::avg: return rule_agg_avg;
        case AggFn::min: return rule_agg_min;
        case AggFn::max: return rule_agg_max;
        default: throw data_error("bare column is not an aggregate rule");
    }
}

std::uint32_t limit_rule_value(std::size_t rule) {
    switch (rule) {
        case rule_limit_1: return 1;
        case rule_limit_2: return 2;
        case rule_limit_3: return 3;
        case rule_limit_5: return 5;
        case rule_limit_10: return 10;
        default: throw data_error("rule " + rule_name(rule) + " is not a limit");
    }
}

std::size_t limit_value_rule(std::uint32_t v) {
    switch (v) {
        case 1: return rule_limit_1;
        case 2: return rule_limit_2;
        case 3: return rule_limit_3;
        case 5: return rule_limit_5;
        case 10: return rule_limit_10;
        default:
            throw data_error("limit " + std::to_string(v) + " is outside the published inventory");
    }
}

std::size_t pool_index(const Value& v) {
    const auto& pool = literal_pool();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i] == v) return i;
    }
    throw data_error("literal is outside the published pool");
}

}  // namespace

AstBuilder::AstBuilder(const SchemaDef& schema) : schema_(schema) {
    stack_.push_back(Slot::query);
}

bool AstBuilder::done() const { return stack_.empty(); }

const SqlAst& AstBuilder::ast() const {
    if (!done()) throw data_error("AST requested from incomplete action sequence");
    return ast_;
}

std::vector<std::size_t> AstBuilder::scope_columns() const {
    std::vector<std::size_t> cols;
    auto add_table = [&](std::size_t t) {
        for (std::size_t c = 0; c < schema_.tables[t].columns.size(); ++c) {
            cols.push_back(schema_.flat_col(t, c));
        }
    };
    add_table(ast_.from_table);
    if (ast_.join) add_table(ast_.join->table);
    return cols;
}

bool AstBuilder::scope_has_number() const {
    for (std::size_t c : scope_columns()) {
        if (schema_.column(c).type == ColType::number) return true;
    }
    return false;
}

bool AstBuilder::join_feasible(std::size_t from, std::size_t* with_table) const {
    for (std::size_t t = 0; t < schema_.tables.size(); ++t) {
        if (t == from) continue;
        for (const auto& a : schema_.tables[from].columns) {
            for (const auto& b : schema_.tables[t].columns) {
                if (a.type == b.type) {
                    if (with_table) *with_table = t;
                    return true;
                }
            }
        }
    }
    return false;
}

std::vector<Action> AstBuilder::admissible_for(Slot slot) const {
    std::vector<Action> out;
    const auto& pool = literal_pool();
    switch (slot) {
        case Slot::query:
            out.push_back(apply_rule(rule_query));
            break;
        case Slot::from_table:
            for (std::size_t t = 0; t < schema_.tables.size(); ++t) out.push_back(select_table(t));
            break;
        case Slot::join_opt:
            out.push_back(apply_rule(rule_join_none));
            if (join_feasible(ast_.from_table, nullptr)) out.push_back(apply_rule(rule_join_some));
            break;
        case Slot::join_table:
            for (std::size_t t = 0; t < schema_.tables.size(); ++t) {
                if (t == ast_.from_table) continue;
                bool compatible = false;
                for (const auto& a : schema_.tables[ast_.from_table].columns) {
                    for (const auto& b : schema_.tables[t].columns) {
                        if (a.type == b.type) compatible = true;
                    }
                }
                if (compatible) out.push_back(select_table(t));
            }
            break;
        case Slot::join_left_col: {
            const auto& join_cols = schema_.tables[ast_.join->table].columns;
            for (std::size_t c = 0; c < schema_.tables[ast_.from_table].columns.size(); ++c) {
                const ColType ct = schema_.tables[ast_.from_table].columns[c].type;
                if (std::any_of(join_cols.begin(), join_cols.end(),
                                [&](const ColumnDef& jc) { return jc.type == ct; })) {
                    out.push_back(select_column(schema_.flat_col(ast_.from_table, c)));
                }
            }
            break;
        }
        case Slot::join_right_col: {
            const ColType lt = schema_.column(ast_.join->left_col).type;
            const std::size_t jt = ast_.join->table;
            for (std::size_t c = 0; c < schema_.tables[jt].columns.size(); ++c) {
                if (schema_.tables[jt].columns[c].type == lt) {
                    out.push_back(select_column(schema_.flat_col(jt, c)));
                }
            }
            break;
        }
        case Slot::select_shape:
            out.push_back(apply_rule(rule_sel_plain_1));
            out.push_back(apply_rule(rule_sel_plain_2));
            out.push_back(apply_rule(rule_sel_agg_1));
            out.push_back(apply_rule(rule_sel_agg_2));
            out.push_back(apply_rule(rule_sel_mixed));
            break;
        case Slot::plain_col:
        case Slot::pred_col:
            for (std::size_t c : scope_columns()) out.push_back(select_column(c));
            break;
        case Slot::agg_fn:
        case Slot::order_agg_fn:
            out.push_back(apply_rule(rule_agg_count_star));
            out.push_back(apply_rule(rule_agg_count));
            if (scope_has_number()) {
                out.push_back(apply_rule(rule_agg_sum));
                out.push_back(apply_rule(rule_agg_avg));
            }
            out.push_back(apply_rule(rule_agg_min));
            out.push_back(apply_rule(rule_agg_max));
            break;
        case Slot::agg_col:
        case Slot::order_agg_col:
            for (std::size_t c : scope_columns()) {
                if ((pending_agg_ == AggFn::sum || pending_agg_ == AggFn::avg) &&
                    schema_.column(c).type != ColType::number) {
                    continue;
                }
                out.push_back(select_column(c));
            }
            break;
        case Slot::where_shape:
            out.push_back(apply_rule(rule_where_none));
            out.push_back(apply_rule(rule_where_1));
            out.push_back(apply_rule(rule_where_2));
            break;
        case Slot::pred_op:
            out.push_back(apply_rule(rule_op_eq));
            out.push_back(apply_rule(rule_op_ne));
            if (pred_type_ == ColType::number) {
                out.push_back(apply_rule(rule_op_gt));
                out.push_back(apply_rule(rule_op_lt));
            }
            break;
        case Slot::pred_lit:
            for (std::size_t k = 0; k < pool.size(); ++k) {
                if (value_type(pool[k]) == pred_type_) out.push_back(apply_rule(rule_lit_base + k));
            }
            break;
        case Slot::group_opt: {
            bool has_agg = false;
            std::set<std::size_t> bare;
            for (const auto& item : ast_.select) {
                if (item.fn == AggFn::none) bare.insert(item.col);
                else has_agg = true;
            }
            if (bare.size() >= 2) {
                out.push_back(apply_rule(rule_group_none));
            } else if (has_agg && bare.size() == 1) {
                out.push_back(apply_rule(rule_group_some));  // grouping is forced
            } else {
                out.push_back(apply_rule(rule_group_none));
                out.push_back(apply_rule(rule_group_some));
            }
            break;
        }
        case Slot::group_col: {
            std::set<std::size_t> bare;
            for (const auto& item : ast_.select) {
                if (item.fn == AggFn::none) bare.insert(item.col);
            }
            if (bare.size() == 1) {
                out.push_back(select_column(*bare.begin()));
            } else {
                for (std::size_t c : scope_columns()) out.push_back(select_column(c));
            }
            break;
        }
        case Slot::order_opt: {
            const bool has_agg = std::any_of(ast_.select.begin(), ast_.select.end(),
                                             [](const AggExpr& e) { return e.fn != AggFn::none; });
            const bool agg_context = has_agg || ast_.group_by.has_value();
            out.push_back(apply_rule(rule_order_none));
            if (!agg_context || ast_.group_by) out.push_back(apply_rule(rule_order_col));
            if (ast_.group_by) out.push_back(apply_rule(rule_order_agg));
            break;
        }
        case Slot::order_col: {
            const bool has_agg = std::any_of(ast_.select.begin(), ast_.select.end(),
                                             [](const AggExpr& e) { return e.fn != AggFn::none; });
            if (has_agg || ast_.group_by) {
                out.push_back(select_column(*ast_.group_by));
            } else {
                for (std::size_t c : scope_columns()) out.push_back(select_column(c));
            }
            break;
        }
        case Slot::order_dir:
            out.push_back(apply_rule(rule_dir_asc));
            out.push_back(apply_rule(rule_dir_desc));
            break;
        case Slot::limit_opt:
            out.push_back(apply_rule(rule_limit_none));
            out.push_back(apply_rule(rule_limit_1));
            out.push_back(apply_rule(rule_limit_2));
            out.push_back(apply_rule(rule_limit_3));
            out.push_back(apply_rule(rule_limit_5));
            out.push_back(apply_rule(rule_limit_10));
            break;
    }
    return out;
}

std::vector<Action> AstBuilder::admissible() const {
    if (done()) return {};
    return admissible_for(stack_.back());
}

bool AstBuilder::is_admissible(const Action& a) const {
    const auto options = admissible();
    return std::find(options.begin(), options.end(), a) != options.end();
}

void AstBuilder::apply(const Action& a) {
    if (!is_admissible(a)) {
        throw parse_error("inadmissible action " + action_str(a, schema_), applied_);
    }
    const Slot slot = stack_.back();
    stack_.pop_back();
    switch (slot) {
        case Slot::query:
            stack_.push_back(Slot::order_opt);
            stack_.push_back(Slot::group_opt);
            stack_.push_back(Slot::where_shape);
            stack_.push_back(Slot::select_shape);
            stack_.push_back(Slot::join_opt);
            stack_.push_back(Slot::from_table);
            break;
        case Slot::from_table:
            ast_.from_table = a.index;
            has_from_ = true;
            break;
        case Slot::join_opt:
            if (a.index == rule_join_some) {
                ast_.join.emplace();
                stack_.push_back(Slot::join_right_col);
                stack_.push_back(Slot::join_left_col);
                stack_.push_back(Slot::join_table);
            }
            break;
        case Slot::join_table:
            ast_.join->table = a.index;
            break;
        case Slot::join_left_col:
            ast_.join->left_col = a.index;
            break;
        case Slot::join_right_col:
            ast_.join->right_col = a.index;
            break;
        case Slot::select_shape:
            switch (a.index) {
                case rule_sel_plain_1:
                    stack_.push_back(Slot::plain_col);
                    break;
                case rule_sel_plain_2:
                    stack_.push_back(Slot::plain_col);
                    stack_.push_back(Slot::plain_col);
                    break;
                case rule_sel_agg_1:
                    stack_.push_back(Slot::agg_fn);
                    break;
                case rule_sel_agg_2:
                    stack_.push_back(Slot::agg_fn);
                    stack_.push_back(Slot::agg_fn);
                    break;
                case rule_sel_mixed:
                    stack_.push_back(Slot::agg_fn);
                    stack_.push_back(Slot::plain_col);
                    break;
            }
            break;
        case Slot::plain_col:
            ast_.select.push_back(AggExpr{AggFn::none, false, a.index});
            break;
        case Slot::agg_fn:
            if (a.index == rule_agg_count_star) {
                ast_.select.push_back(AggExpr{AggFn::count, true, 0});
            } else {
                pending_agg_ = rule_to_agg(a.index);
                stack_.push_back(Slot::agg_col);
            }
            break;
        case Slot::agg_col:
            ast_.select.push_back(AggExpr{pending_agg_, false, a.index});
            pending_agg_ = AggFn::none;
            break;
        case Slot::where_shape:
            if (a.index == rule_where_1) {
                stack_.push_back(Slot::pred_col);
            } else if (a.index == rule_where_2) {
                stack_.push_back(Slot::pred_col);
                stack_.push_back(Slot::pred_col);
            }
            break;
        case Slot::pred_col:
            ast_.where.push_back(WherePred{a.index, CmpOp::eq, Value{}});
            pred_type_ = schema_.column(a.index).type;
            stack_.push_back(Slot::pred_lit);
            stack_.push_back(Slot::pred_op);
            break;
        case Slot::pred_op:
            switch (a.index) {
                case rule_op_eq: ast_.where.back().op = CmpOp::eq; break;
                case rule_op_ne: ast_.where.back().op = CmpOp::ne; break;
                case rule_op_gt: ast_.where.back().op = CmpOp::gt; break;
                case rule_op_lt: ast_.where.back().op = CmpOp::lt; break;
            }
            break;
        case Slot::pred_lit:
            ast_.where.back().lit = literal_pool()[a.index - rule_lit_base];
            break;
        case Slot::group_opt:
            if (a.index == rule_group_some) stack_.push_back(Slot::group_col);
            break;
        case Slot::group_col:
            ast_.group_by = a.index;
            break;
        case Slot::order_opt:
            if (a.index == rule_order_col) {
                ast_.order_by.emplace();
                stack_.push_back(Slot::limit_opt);
                stack_.push_back(Slot::order_dir);
                stack_.push_back(Slot::order_col);
            } else if (a.index == rule_order_agg) {
                ast_.order_by.emplace();
                stack_.push_back(Slot::limit_opt);
                stack_.push_back(Slot::order_dir);
                stack_.push_back(Slot::order_agg_fn);
            }
            break;
        case Slot::order_col:
            ast_.order_by->key = AggExpr{AggFn::none, false, a.index};
            break;
        case Slot::order_agg_fn:
            if (a.index == rule_agg_count_star) {
                ast_.order_by->key = AggExpr{AggFn::count, true, 0};
            } else {
                pending_agg_ = rule_to_agg(a.index);
                stack_.push_back(Slot::order_agg_col);
            }
            break;
        case Slot::order_agg_col:
            ast_.order_by->key = AggExpr{pending_agg_, false, a.index};
            pending_agg_ = AggFn::none;
            break;
        case Slot::order_dir:
            ast_.order_by->dir = a.index == rule_dir_asc ? SortDir::asc : SortDir::desc;
            break;
        case Slot::limit_opt:
            if (a.index != rule_limit_none) ast_.order_by->limit = limit_rule_value(a.index);
            break;
    }
    ++applied_;
}

ActionSequence ast_to_actions(const SqlAst& ast, const SchemaDef& schema) {
    validate_ast(ast, schema);
    ActionSequence seq;
    seq.push_back(apply_rule(rule_query));
    seq.push_back(select_table(ast.from_table));

    if (ast.join) {
        seq.push_back(apply_rule(rule_join_some));
        seq.push_back(select_table(ast.join->table));
        seq.push_back(select_column(ast.join->left_col));
        seq.push_back(select_column(ast.join->right_col));
    } else {
        seq.push_back(apply_rule(rule_join_none));
    }

    std::vector<const AggExpr*> bare, aggs;
    for (const auto& item : ast.select) {
        (item.fn == AggFn::none ? bare : aggs).push_back(&item);
    }
    auto emit_agg = [&](const AggExpr& e) {
        seq.push_back(apply_rule(agg_to_rule(e.fn, e.star)));
        if (!e.star) seq.push_back(select_column(e.col));
    };
    if (aggs.empty() && bare.size() == 1) {
        seq.push_back(apply_rule(rule_sel_plain_1));
        seq.push_back(select_column(bare[0]->col));
    } else if (aggs.empty() && bare.size() == 2) {
        seq.push_back(apply_rule(rule_sel_plain_2));
        seq.push_back(select_column(bare[0]->col));
        seq.push_back(select_column(bare[1]->col));
    } else if (bare.empty() && aggs.size() == 1) {
        seq.push_back(apply_rule(rule_sel_agg_1));
        emit_agg(*aggs[0]);
    } else if (bare.empty() && aggs.size() == 2) {
        seq.push_back(apply_rule(rule_sel_agg_2));
        emit_agg(*aggs[0]);
        emit_agg(*aggs[1]);
    } else if (bare.size() == 1 && aggs.size() == 1 && ast.select[0].fn == AggFn::none) {
        seq.push_back(apply_rule(rule_sel_mixed));
        seq.push_back(select_column(bare[0]->col));
        emit_agg(*aggs[0]);
    } else {
        throw data_error("select list shape is outside the published grammar");
    }

    if (ast.where.empty()) {
        seq.push_back(apply_rule(rule_where_none));
    } else if (ast.where.size() <= 2) {
        seq.push_back(apply_rule(ast.where.size() == 1 ? rule_where_1 : rule_where_2));
        for (const auto& pred : ast.where) {
            seq.push_back(select_column(pred.col));
            switch (pred.op) {
                case CmpOp::eq: seq.push_back(apply_rule(rule_op_eq)); break;
                case CmpOp::ne: seq.push_back(apply_rule(rule_op_ne)); break;
                case CmpOp::gt: seq.push_back(apply_rule(rule_op_gt)); break;
                case CmpOp::lt: seq.push_back(apply_rule(rule_op_lt)); break;
            }
            seq.push_back(apply_rule(rule_lit_base + pool_index(pred.lit)));
        }
    } else {
        throw data_error("more than two WHERE conjuncts are outside the published grammar");
    }

    if (ast.group_by) {
        seq.push_back(apply_rule(rule_group_some));
        seq.push_back(select_column(*ast.group_by));
    } else {
        seq.push_back(apply_rule(rule_group_none));
    }

    if (!ast.order_by) {
        seq.push_back(apply_rule(rule_order_none));
    } else {
        const auto& key = ast.order_by->key;
        if (key.fn == AggFn::none) {
            seq.push_back(apply_rule(rule_order_col));
            seq.push_back(select_column(key.col));
        } else {
            seq.push_back(apply_rule(rule_order_agg));
            emit_agg(key);
        }
        seq.push_back(apply_rule(ast.order_by->dir == SortDir::asc ? rule_dir_asc : rule_dir_desc));
        seq.push_back(apply_rule(ast.order_by->limit ? limit_value_rule(*ast.order_by->limit)
                                                     : rule_limit_none));
    }
    return seq;
}

SqlAst actions_to_ast(const ActionSequence& seq, const SchemaDef& schema) {
    AstBuilder builder(schema);
    for (const auto& a : seq) {
        if (builder.done()) {
            throw parse_error("trailing action after a complete sequence", builder.position());
        }
        builder.apply(a);
    }
    if (!builder.done()) {
        throw parse_error("action sequence is incomplete", seq.size());
    }
    return builder.ast();
}

std::vector<Action> admissible_actions(const ActionSequence& prefix, const SchemaDef& schema) {
    AstBuilder builder(schema);
    for (const auto& a : prefix) builder.apply(a);
    return builder.admissible();
}

SqlAst random_walk_ast(const SchemaDef& schema, Rng& rng) {
    AstBuilder builder(schema);
    while (!builder.done()) {
        const auto options = builder.admissible();
        builder.apply(options[rng.bounded(options.size())]);
    }
    return builder.ast();
}

}  // namespace sun
