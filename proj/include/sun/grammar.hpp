#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sun/rng.hpp"
#include "sun/schema.hpp"
#include "sun/sql_ast.hpp"

namespace sun {

// One decoding step: expand a grammar rule or choose a schema item.
struct Action {
    enum class Kind { apply_rule, select_table, select_column };
    Kind kind = Kind::apply_rule;
    std::size_t index = 0;

    bool operator==(const Action&) const = default;
};

using ActionSequence = std::vector<Action>;

inline Action apply_rule(std::size_t rule) { return {Action::Kind::apply_rule, rule}; }
inline Action select_table(std::size_t t) { return {Action::Kind::select_table, t}; }
inline Action select_column(std::size_t c) { return {Action::Kind::select_column, c}; }

// Published rule inventory. Literal rules pick entries of a fixed global pool
// so the inventory is identical for every schema.
enum Rule : std::size_t {
    rule_query = 0,
    rule_join_none,
    rule_join_some,
    rule_sel_plain_1,
    rule_sel_plain_2,
    rule_sel_agg_1,
    rule_sel_agg_2,
    rule_sel_mixed,
    rule_agg_count_star,
    rule_agg_count,
    rule_agg_sum,
    rule_agg_avg,
    rule_agg_min,
    rule_agg_max,
    rule_where_none,
    rule_where_1,
    rule_where_2,
    rule_op_eq,
    rule_op_ne,
    rule_op_gt,
    rule_op_lt,
    rule_group_none,
    rule_group_some,
    rule_order_none,
    rule_order_col,
    rule_order_agg,
    rule_dir_asc,
    rule_dir_desc,
    rule_limit_none,
    rule_limit_1,
    rule_limit_2,
    rule_limit_3,
    rule_limit_5,
    rule_limit_10,
    rule_lit_base,  // rule_lit_base + k selects literal_pool()[k]
};

constexpr std::size_t kLiteralPoolSize = 12;
constexpr std::size_t kRuleCount = rule_lit_base + kLiteralPoolSize;

const std::vector<Value>& literal_pool();
std::string rule_name(std::size_t rule);
std::string action_str(const Action& a, const SchemaDef& schema);

// Incremental AST construction with exact admissibility: an action is offered
// iff the prefix extended by it still completes to some valid AST.
class AstBuilder {
 public:
    explicit AstBuilder(const SchemaDef& schema);

    bool done() const;
    std::size_t position() const { return applied_; }
    std::vector<Action> admissible() const;
    bool is_admissible(const Action& a) const;
    // Throws parse_error at the current position for inadmissible actions.
    void apply(const Action& a);
    // Complete AST; throws data_error when not done.
    const SqlAst& ast() const;

 private:
    enum class Slot {
        query,
        from_table,
        join_opt,
        join_table,
        join_left_col,
        join_right_col,
        select_shape,
        plain_col,
        agg_fn,
        agg_col,
        where_shape,
        pred_col,
        pred_op,
        pred_lit,
        group_opt,
        group_col,
        order_opt,
        order_col,
        order_agg_fn,
        order_agg_col,
        order_dir,
        limit_opt,
    };

    std::vector<Action> admissible_for(Slot slot) const;
    std::vector<std::size_t> scope_columns() const;
    bool scope_has_number() const;
    bool join_feasible(std::size_t from, std::size_t* with_table) const;

    const SchemaDef& schema_;
    std::vector<Slot> stack_;  // top at back
    SqlAst ast_;
    std::size_t applied_ = 0;
    bool has_from_ = false;
    // context while filling a pending aggregate / predicate
    AggFn pending_agg_ = AggFn::none;
    ColType pred_type_ = ColType::number;
};

// Deterministic depth-first serialization of a valid AST.
ActionSequence ast_to_actions(const SqlAst& ast, const SchemaDef& schema);

// Inverse of ast_to_actions; throws parse_error with the failing position.
SqlAst actions_to_ast(const ActionSequence& seq, const SchemaDef& schema);

// Admissible continuations of a valid prefix (empty prefix allowed).
std::vector<Action> admissible_actions(const ActionSequence& prefix, const SchemaDef& schema);

// Uniform random admissible walk to completion; used by tests and by the
// corpus generator to sample intents.
SqlAst random_walk_ast(const SchemaDef& schema, Rng& rng);

}  // namespace sun
