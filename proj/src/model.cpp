#include "sun/model.hpp"

#include <cmath>

#include "sun/error.hpp"
#include "sun/grammar.hpp"
#include "sun/rng.hpp"

namespace sun {

namespace {

Tensor xavier(Shape shape, Rng& rng) {
    const double fan_in = static_cast<double>(shape[0]);
    const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : shape[0]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::size_t n = 1;
    for (auto dim : shape) n *= dim;
    std::vector<double> values(n);
    for (auto& v : values) v = limit * (2.0 * rng.uniform01() - 1.0);
    return Tensor::from_data(std::move(shape), std::move(values), true);
}

Tensor small_normal(Shape shape, Rng& rng, double sigma = 0.2) {
    std::size_t n = 1;
    for (auto dim : shape) n *= dim;
    std::vector<double> values(n);
    for (auto& v : values) v = sigma * rng.normal();
    return Tensor::from_data(std::move(shape), std::move(values), true);
}

Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor scaled(Tensor t, double factor) {
    auto data = t.mutable_data();
    for (auto& v : data) v *= factor;
    return t;
}

}  // namespace

ParamStore init_params(const ModelDims& dims, std::size_t vocab_size, std::uint64_t seed) {
    if (dims.d % dims.heads != 0) {
        throw config_error("model width " + std::to_string(dims.d) +
                           " is not divisible by head count " + std::to_string(dims.heads));
    }
    if (dims.d_dec != dims.d) {
        // dot-product attention between decoder state and fused rows needs equal widths
        throw config_error("d_dec must equal d in this decoder");
    }
    const std::size_t d = dims.d;
    ParamStore params(seed);
    Rng rng(derive_seed(seed, 0xA11CE));

    params.add("embed.token", small_normal({vocab_size, d}, rng));
    params.add("embed.pos", small_normal({dims.max_positions, d}, rng));
    params.add("embed.type", small_normal({3, d}, rng));

    for (std::size_t layer = 0; layer < dims.layers; ++layer) {
        const std::string prefix = "enc.L" + std::to_string(layer) + ".";
        params.add(prefix + "attn.wq", xavier({d, d}, rng));
        params.add(prefix + "attn.wk", xavier({d, d}, rng));
        params.add(prefix + "attn.wv", xavier({d, d}, rng));
        params.add(prefix + "attn.wo", xavier({d, d}, rng));
        params.add(prefix + "attn.bo", zeros({d}));
        params.add(prefix + "ffn.w1", xavier({d, 4 * d}, rng));
        params.add(prefix + "ffn.b1", zeros({4 * d}));
        params.add(prefix + "ffn.w2", xavier({4 * d, d}, rng));
        params.add(prefix + "ffn.b2", zeros({d}));
    }

    for (std::size_t w : {std::size_t{3}, std::size_t{4}, std::size_t{5}}) {
        params.add("conv.w" + std::to_string(w), xavier({w * d, d}, rng));
        params.add("conv.b" + std::to_string(w), zeros({d}));
    }
    params.add("conv.proj_w", xavier({3 * d, d}, rng));
    params.add("conv.proj_b", zeros({d}));

    // small latent head: keeps the initial pairwise KL near zero so the DU
    // term starts as a gentle pull rather than a cliff
    params.add("latent.w_mu", scaled(xavier({d, d}, rng), 0.05));
    params.add("latent.b_mu", zeros({d}));
    params.add("latent.w_sigma", zeros({d, d}));
    params.add("latent.b_sigma", zeros({d}));

    params.add("fuse.w_z", xavier({d, d}, rng));
    params.add("fuse.w_x", xavier({d, d}, rng));

    // decoder: rule embeddings plus generic table-pick / column-pick rows and
    // the start symbol
    params.add("dec.action_emb", small_normal({kRuleCount + 3, d}, rng));
    params.add("dec.h0", small_normal({d}, rng));
    params.add("dec.cell.w_gate", xavier({3 * d, d}, rng));
    params.add("dec.cell.b_gate", zeros({d}));
    params.add("dec.cell.w_cand", xavier({3 * d, d}, rng));
    params.add("dec.cell.b_cand", zeros({d}));
    params.add("dec.rule_w", xavier({d, kRuleCount}, rng));
    params.add("dec.rule_b", zeros({kRuleCount}));
    params.add("dec.ptr_table", xavier({d, d}, rng));
    params.add("dec.ptr_col", xavier({d, d}, rng));

    return params;
}

}  // namespace sun
