#include "sun/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "sun/error.hpp"

namespace sun {

namespace {

Tensor as_row(const Tensor& v) { return reshape(v, {1, v.numel()}); }
Tensor as_vec(const Tensor& m) { return reshape(m, {m.numel()}); }

constexpr std::size_t kTablePickRow = kRuleCount;
constexpr std::size_t kColumnPickRow = kRuleCount + 1;
constexpr std::size_t kStartRow = kRuleCount + 2;

}  // namespace

Decoder::Decoder(const Tensor& u, const SerializedInput& input, const SchemaDef& schema,
                 const ParamStore& params)
    : u_(u), schema_(schema), params_(params) {
    if (input.table_spans.size() != schema.tables.size() ||
        input.column_spans.size() != schema.num_columns()) {
        throw dimension_error("decoder: serialized spans do not match the schema");
    }
    for (const auto& span : input.table_spans) {
        table_means_.push_back(mean_over_rows(slice_rows(u_, span.begin, span.end)));
    }
    for (const auto& span : input.column_spans) {
        column_means_.push_back(mean_over_rows(slice_rows(u_, span.begin, span.end)));
    }
}

Decoder::State Decoder::initial() const {
    // h0 folded through the cell with the learned start symbol as the
    // previous action
    State s;
    s.hidden = params_.get("dec.h0");
    s.step = 0;
    return cell_update(s, as_vec(embedding_rows(params_.get("dec.action_emb"), {kStartRow})));
}

Tensor Decoder::attention(const Tensor& hidden) const {
    Tensor weights = softmax_rows(matmul_nt(as_row(hidden), u_));
    return as_vec(matmul(weights, u_));
}

Tensor Decoder::action_embedding(const Action& chosen) const {
    const Tensor& table = params_.get("dec.action_emb");
    switch (chosen.kind) {
        case Action::Kind::apply_rule:
            return as_vec(embedding_rows(table, {chosen.index}));
        case Action::Kind::select_table:
            return add(as_vec(embedding_rows(table, {kTablePickRow})), table_means_[chosen.index]);
        case Action::Kind::select_column:
            return add(as_vec(embedding_rows(table, {kColumnPickRow})), column_means_[chosen.index]);
    }
    throw data_error("unknown action kind");
}

Decoder::State Decoder::cell_update(const State& state, const Tensor& prev_embedding) const {
    Tensor ctx = attention(state.hidden);
    Tensor inp = as_row(concat_vec({state.hidden, prev_embedding, ctx}));
    Tensor gate =
        sigmoid(affine(inp, params_.get("dec.cell.w_gate"), params_.get("dec.cell.b_gate")));
    Tensor cand = tanh(affine(inp, params_.get("dec.cell.w_cand"), params_.get("dec.cell.b_cand")));
    // gate (.) hidden + (1 - gate) (.) candidate
    Tensor next = add(as_vec(cand), as_vec(mul(gate, sub(as_row(state.hidden), cand))));
    return State{next, state.step + 1};
}

Decoder::State Decoder::advance(const State& state, const Action& chosen) const {
    return cell_update(state, action_embedding(chosen));
}

Tensor Decoder::scores(const State& state, const std::vector<Action>& candidates) const {
    if (candidates.empty()) throw data_error("decoder: empty candidate set");
    bool need_rules = false, need_tables = false, need_columns = false;
    for (const auto& a : candidates) {
        switch (a.kind) {
            case Action::Kind::apply_rule: need_rules = true; break;
            case Action::Kind::select_table: need_tables = true; break;
            case Action::Kind::select_column: need_columns = true; break;
        }
    }
    Tensor h_row = as_row(state.hidden);
    Tensor rule_scores, table_scores, column_scores;
    if (need_rules) {
        rule_scores = as_vec(affine(h_row, params_.get("dec.rule_w"), params_.get("dec.rule_b")));
    }
    if (need_tables) {
        Tensor hw = matmul(h_row, params_.get("dec.ptr_table"));
        std::vector<Tensor> per_table;
        for (const auto& m : table_means_) per_table.push_back(as_vec(matmul_nt(hw, as_row(m))));
        table_scores = stack_scalars(per_table);
    }
    if (need_columns) {
        Tensor hw = matmul(h_row, params_.get("dec.ptr_col"));
        std::vector<Tensor> per_col;
        for (const auto& m : column_means_) per_col.push_back(as_vec(matmul_nt(hw, as_row(m))));
        column_scores = stack_scalars(per_col);
    }
    std::vector<Tensor> picked;
    picked.reserve(candidates.size());
    for (const auto& a : candidates) {
        switch (a.kind) {
            case Action::Kind::apply_rule: picked.push_back(pick(rule_scores, a.index)); break;
            case Action::Kind::select_table: picked.push_back(pick(table_scores, a.index)); break;
            case Action::Kind::select_column: picked.push_back(pick(column_scores, a.index)); break;
        }
    }
    return stack_scalars(picked);
}

std::vector<Action> Decoder::full_inventory() const {
    std::vector<Action> out;
    for (std::size_t r = 0; r < kRuleCount; ++r) out.push_back(apply_rule(r));
    for (std::size_t t = 0; t < schema_.tables.size(); ++t) out.push_back(select_table(t));
    for (std::size_t c = 0; c < schema_.num_columns(); ++c) out.push_back(select_column(c));
    return out;
}

Tensor t2s_loss(const Tensor& u, const SerializedInput& input, const ActionSequence& gold,
                const SchemaDef& schema, const ParamStore& params) {
    if (gold.empty()) throw data_error("t2s_loss: empty gold sequence");
    Decoder decoder(u, input, schema, params);
    AstBuilder builder(schema);
    Decoder::State state = decoder.initial();

    std::vector<Tensor> step_losses;
    for (std::size_t t = 0; t < gold.size(); ++t) {
        if (builder.done()) {
            throw data_error("t2s_loss: gold continues after completion at step " +
                             std::to_string(t));
        }
        const std::vector<Action> admissible = builder.admissible();
        const auto it = std::find(admissible.begin(), admissible.end(), gold[t]);
        if (it == admissible.end()) {
            throw data_error("t2s_loss: gold action " + action_str(gold[t], schema) +
                             " inadmissible at step " + std::to_string(t) +
                             " (grammar/corpus drift)");
        }
        const std::size_t gold_idx = static_cast<std::size_t>(it - admissible.begin());
        Tensor step_scores = decoder.scores(state, admissible);
        step_losses.push_back(sub(logsumexp(step_scores), pick(step_scores, gold_idx)));
        builder.apply(gold[t]);
        state = decoder.advance(state, gold[t]);
    }
    if (!builder.done()) throw data_error("t2s_loss: gold sequence is incomplete");
    return scale(sum_all(stack_scalars(step_losses)), 1.0 / static_cast<double>(step_losses.size()));
}

namespace {

struct Hypothesis {
    Decoder::State state;
    AstBuilder builder;
    ActionSequence actions;
    double score = 0.0;
    // the pure-greedy chain is never pruned, so a wider beam can only match
    // or beat the greedy score
    bool greedy = false;
};

}  // namespace

DecodeResult decode(const Tensor& u, const SerializedInput& input, const SchemaDef& schema,
                    const ParamStore& params, std::size_t beam_width, bool constrained,
                    std::size_t max_steps) {
    if (beam_width == 0) throw config_error("beam width must be at least 1");
    if (max_steps == 0) throw config_error("max_steps must be at least 1");
    NoGradGuard guard;

    Decoder decoder(u, input, schema, params);
    const std::vector<Action> inventory = decoder.full_inventory();

    std::vector<Hypothesis> beam;
    beam.push_back(Hypothesis{decoder.initial(), AstBuilder(schema), {}, 0.0, true});
    std::vector<Hypothesis> completed;
    std::vector<Hypothesis> abandoned;  // unconstrained hypotheses that left the grammar

    for (std::size_t step = 0; step < max_steps && !beam.empty(); ++step) {
        struct Extension {
            std::size_t hyp;
            Action action;
            double score;
        };
        std::vector<Extension> extensions;
        for (std::size_t h = 0; h < beam.size(); ++h) {
            const std::vector<Action> candidates =
                constrained ? beam[h].builder.admissible() : inventory;
            Tensor raw = decoder.scores(beam[h].state, candidates);
            const double lse = logsumexp(raw).item();
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                extensions.push_back({h, candidates[c], beam[h].score + raw.at(c) - lse});
            }
        }
        std::stable_sort(extensions.begin(), extensions.end(),
                         [](const Extension& a, const Extension& b) { return a.score > b.score; });

        // the first extension of the greedy hypothesis is its argmax
        std::size_t greedy_ext = extensions.size();
        for (std::size_t i = 0; i < extensions.size(); ++i) {
            if (beam[extensions[i].hyp].greedy) {
                greedy_ext = i;
                break;
            }
        }

        std::vector<Hypothesis> next;
        auto take = [&](std::size_t i) {
            Hypothesis hyp = beam[extensions[i].hyp];
            hyp.greedy = i == greedy_ext;
            hyp.score = extensions[i].score;
            hyp.actions.push_back(extensions[i].action);
            if (!hyp.builder.is_admissible(extensions[i].action)) {
                abandoned.push_back(std::move(hyp));
                return;
            }
            hyp.builder.apply(extensions[i].action);
            hyp.state = decoder.advance(hyp.state, extensions[i].action);
            if (hyp.builder.done()) {
                completed.push_back(std::move(hyp));
            } else {
                next.push_back(std::move(hyp));
            }
        };
        for (std::size_t i = 0; i < extensions.size() && next.size() < beam_width; ++i) take(i);
        if (greedy_ext < extensions.size() && next.size() >= beam_width) {
            bool kept = false;
            for (const auto& hyp : next) kept = kept || hyp.greedy;
            for (const auto& hyp : completed) kept = kept || hyp.greedy;
            for (const auto& hyp : abandoned) kept = kept || hyp.greedy;
            if (!kept) take(greedy_ext);
        }
        beam = std::move(next);
        if (completed.size() >= beam_width && !std::any_of(beam.begin(), beam.end(),
                                                           [](const Hypothesis& h) { return h.greedy; })) {
            break;
        }
    }

    DecodeResult result;
    result.constrained = constrained;
    if (!completed.empty()) {
        const auto best = std::max_element(
            completed.begin(), completed.end(),
            [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; });
        result.actions = best->actions;
        result.score = best->score;
        result.ast = best->builder.ast();
        result.valid = true;
        return result;
    }
    const std::vector<Hypothesis>& pool = beam.empty() ? abandoned : beam;
    if (!pool.empty()) {
        const auto best =
            std::max_element(pool.begin(), pool.end(), [](const Hypothesis& a, const Hypothesis& b) {
                return a.score < b.score;
            });
        result.actions = best->actions;
        result.score = best->score;
    }
    result.valid = false;
    return result;
}

}  // namespace sun
