#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sun/encoder.hpp"
#include "sun/grammar.hpp"
#include "sun/model.hpp"
#include "sun/param_store.hpp"
#include "sun/schema.hpp"
#include "sun/tensor.hpp"

namespace sun {

// Grammar-action decoder over a fused (or contextual) encoding. A single
// gated recurrent cell with dot-product attention over the encoding rows;
// ApplyRule scored by an affine head, schema items by bilinear match against
// their span means.
class Decoder {
 public:
    Decoder(const Tensor& u, const SerializedInput& input, const SchemaDef& schema,
            const ParamStore& params);

    struct State {
        Tensor hidden;  // [d]
        std::size_t step = 0;
    };

    State initial() const;
    State advance(const State& state, const Action& chosen) const;

    // Unnormalized scores aligned with `candidates`; empty candidate sets are
    // a contract error.
    Tensor scores(const State& state, const std::vector<Action>& candidates) const;

    // Every action in the inventory: all rules, tables, columns.
    std::vector<Action> full_inventory() const;

 private:
    Tensor attention(const Tensor& hidden) const;
    Tensor action_embedding(const Action& chosen) const;
    State cell_update(const State& state, const Tensor& prev_embedding) const;

    const Tensor& u_;
    const SchemaDef& schema_;
    const ParamStore& params_;
    std::vector<Tensor> table_means_;   // [d] per table
    std::vector<Tensor> column_means_;  // [d] per flat column
};

// Teacher-forced mean step loss with normalization over the admissible set.
// Throws data_error naming the step when the gold action is inadmissible.
Tensor t2s_loss(const Tensor& u, const SerializedInput& input, const ActionSequence& gold,
                const SchemaDef& schema, const ParamStore& params);

struct DecodeResult {
    ActionSequence actions;
    std::optional<SqlAst> ast;
    double score = 0.0;
    bool constrained = false;
    bool valid = false;
};

// beam_width 1 is greedy. Constrained decoding restricts every step to the
// admissible set and always yields a valid AST; unconstrained scores the full
// inventory and may fail to parse.
DecodeResult decode(const Tensor& u, const SerializedInput& input, const SchemaDef& schema,
                    const ParamStore& params, std::size_t beam_width, bool constrained,
                    std::size_t max_steps = 100);

}  // namespace sun
