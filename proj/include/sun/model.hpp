#pragma once

#include <cstdint>

#include "sun/param_store.hpp"

namespace sun {

struct ModelDims {
    std::size_t d = 64;
    std::size_t d_dec = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t max_positions = 192;
    double dropout_rate = 0.2;
};

// Builds every trainable tensor of the full model in a stable order.
// Xavier-uniform weights, zero biases, small-normal embeddings.
ParamStore init_params(const ModelDims& dims, std::size_t vocab_size, std::uint64_t seed);

}  // namespace sun
