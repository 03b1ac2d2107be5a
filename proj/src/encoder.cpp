#include "sun/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sun/error.hpp"
#include "sun/rng.hpp"

namespace sun {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr std::size_t kMaxConvWindow = 5;

}  // namespace

std::vector<std::string> split_name_tokens(const std::string& name) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : name) {
        if (c == '_' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocab Vocab::build(const Corpus& corpus) {
    std::set<std::string> words;
    for (const auto& schema : corpus.schemas) {
        for (const auto& table : schema.tables) {
            for (const auto& tok : split_name_tokens(table.name)) words.insert(tok);
            for (const auto& col : table.columns) {
                for (const auto& tok : split_name_tokens(col.name)) words.insert(tok);
            }
        }
    }
    for (const auto& e : corpus.examples) {
        if (e.split != "train") continue;
        for (const auto& tok : e.question) words.insert(tok);
    }

    Vocab v;
    v.tokens_ = {"<pad>", "<unk>", "<sep_q>", "<sep_t>", "<sep_c>"};
    for (const auto& w : words) v.tokens_.push_back(w);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = i;
    return v;
}

std::size_t Vocab::lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk : it->second;
}

SerializedInput serialize_input(const ExampleRecord& record, const SchemaDef& schema,
                                const Vocab& vocab) {
    if (record.schema_id != schema.id) {
        throw data_error("record '" + record.id + "' does not belong to schema '" + schema.id + "'");
    }
    SerializedInput out;
    auto push = [&](std::size_t id, std::size_t type) {
        out.ids.push_back(id);
        out.type_ids.push_back(type);
    };

    push(Vocab::sep_q, 0);
    for (const auto& tok : record.question) push(vocab.lookup(tok), 0);

    out.column_spans.resize(schema.num_columns());
    for (std::size_t t = 0; t < schema.tables.size(); ++t) {
        push(Vocab::sep_t, 1);
        ItemSpan tspan{out.ids.size(), 0};
        for (const auto& tok : split_name_tokens(schema.tables[t].name)) {
            push(vocab.lookup(tok), 1);
        }
        tspan.end = out.ids.size();
        out.table_spans.push_back(tspan);
        for (std::size_t c = 0; c < schema.tables[t].columns.size(); ++c) {
            push(Vocab::sep_c, 2);
            ItemSpan cspan{out.ids.size(), 0};
            for (const auto& tok : split_name_tokens(schema.tables[t].columns[c].name)) {
                push(vocab.lookup(tok), 2);
            }
            cspan.end = out.ids.size();
            out.column_spans[schema.flat_col(t, c)] = cspan;
        }
    }

    while (out.ids.size() < kMaxConvWindow) push(Vocab::pad, 0);
    return out;
}

Tensor encode_context(const SerializedInput& input, const ParamStore& params,
                      const ModelDims& dims, std::uint64_t dropout_seed, bool training) {
    if (input.ids.empty()) throw data_error("cannot encode an empty input");
    const std::size_t n = input.ids.size();
    if (n > dims.max_positions) {
        throw data_error("input of length " + std::to_string(n) +
                         " exceeds the position table (" + std::to_string(dims.max_positions) + ")");
    }
    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;

    Tensor x = add(add(embedding_rows(params.get("embed.token"), input.ids),
                       embedding_rows(params.get("embed.pos"), positions)),
                   embedding_rows(params.get("embed.type"), input.type_ids));

    const std::size_t dk = dims.d / dims.heads;
    const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t layer = 0; layer < dims.layers; ++layer) {
        const std::string prefix = "enc.L" + std::to_string(layer) + ".";
        Tensor q = matmul(x, params.get(prefix + "attn.wq"));
        Tensor k = matmul(x, params.get(prefix + "attn.wk"));
        Tensor v = matmul(x, params.get(prefix + "attn.wv"));
        std::vector<Tensor> heads;
        for (std::size_t h = 0; h < dims.heads; ++h) {
            Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
            Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
            Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
            Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), scale_factor));
            heads.push_back(matmul(attn, vh));
        }
        Tensor attn_out =
            affine(concat_cols(heads), params.get(prefix + "attn.wo"), params.get(prefix + "attn.bo"));
        attn_out = dropout(attn_out, dims.dropout_rate, derive_seed(dropout_seed, layer, 0), training)
                       .value;
        x = layer_norm(add(x, attn_out), kLayerNormEps);

        Tensor hidden = relu(affine(x, params.get(prefix + "ffn.w1"), params.get(prefix + "ffn.b1")));
        Tensor ffn = affine(hidden, params.get(prefix + "ffn.w2"), params.get(prefix + "ffn.b2"));
        ffn = dropout(ffn, dims.dropout_rate, derive_seed(dropout_seed, layer, 1), training).value;
        x = layer_norm(add(x, ffn), kLayerNormEps);
    }
    return x;
}

Tensor global_rep(const Tensor& x, const ParamStore& params) {
    Tensor pooled = conv_maxpool(x, {3, 4, 5},
                                 {params.get("conv.w3"), params.get("conv.w4"), params.get("conv.w5")},
                                 {params.get("conv.b3"), params.get("conv.b4"), params.get("conv.b5")});
    Tensor projected = affine(reshape(pooled, {1, pooled.numel()}), params.get("conv.proj_w"),
                              params.get("conv.proj_b"));
    return reshape(projected, {projected.numel()});
}

}  // namespace sun
