#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sun/corpus.hpp"
#include "sun/model.hpp"
#include "sun/param_store.hpp"
#include "sun/tensor.hpp"

namespace sun {

// Token table with reserved indices, built from the train split's question
// tokens plus every schema's name tokens.
class Vocab {
 public:
    static constexpr std::size_t pad = 0;
    static constexpr std::size_t unk = 1;
    static constexpr std::size_t sep_q = 2;
    static constexpr std::size_t sep_t = 3;
    static constexpr std::size_t sep_c = 4;

    static Vocab build(const Corpus& corpus);

    std::size_t lookup(const std::string& token) const;
    std::size_t size() const { return tokens_.size(); }
    const std::string& token_at(std::size_t i) const { return tokens_[i]; }

 private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ItemSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // half-open over name tokens
};

// Flattened question + schema layout:
// [SEP_Q] q... ([SEP_T] table-tokens ([SEP_C] column-tokens)*)*, PAD-extended
// to the widest conv window.
struct SerializedInput {
    std::vector<std::size_t> ids;
    std::vector<std::size_t> type_ids;           // 0 question, 1 table, 2 column
    std::vector<ItemSpan> table_spans;           // by table index
    std::vector<ItemSpan> column_spans;          // by flat column index
    std::size_t length() const { return ids.size(); }
};

std::vector<std::string> split_name_tokens(const std::string& name);

SerializedInput serialize_input(const ExampleRecord& record, const SchemaDef& schema,
                                const Vocab& vocab);

// Token-level contextual representation, [n x d].
Tensor encode_context(const SerializedInput& input, const ParamStore& params,
                      const ModelDims& dims, std::uint64_t dropout_seed, bool training);

// Pooled global representation, [d]: conv over windows {3,4,5}, max pooling,
// concatenation projected back to d.
Tensor global_rep(const Tensor& x, const ParamStore& params);

}  // namespace sun
