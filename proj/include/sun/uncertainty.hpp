#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sun/corpus.hpp"
#include "sun/encoder.hpp"
#include "sun/model.hpp"
#include "sun/param_store.hpp"
#include "sun/tensor.hpp"

namespace sun {

// Diagonal Gaussian over the latent semantic variable, [d] each.
struct GaussianParams {
    Tensor mu;
    Tensor log_var;
};

struct LatentSample {
    Tensor z;
    Tensor eps;
};

struct FusedEncoding {
    Tensor u;     // [n x d], rows layer-normalized
    Tensor gate;  // [n x d], strictly in (0,1)
};

struct LossBreakdown {
    double t2s = 0.0;
    double du = 0.0;
    double mu_loss = 0.0;
    double total = 0.0;
};

// mu = h.W_mu + b_mu, log_var = h.W_sigma + b_sigma; the same weights serve
// every input.
GaussianParams latent_head(const Tensor& h, const ParamStore& params);

// Reparameterized draw z = mu + exp(log_var/2) (.) eps. Inference is
// deterministic: eps = 0 and z = mu exactly. log_var is clamped to [-8, 8]
// before exponentiation.
LatentSample sample_latent(const GaussianParams& p, std::uint64_t seed, bool training);

// KL(N(mu_bar, var_bar) || N(mu, var)) in closed form, summed over
// coordinates; always >= 0.
Tensor kl_du(const GaussianParams& p_bar, const GaussianParams& p);

// Mean over items of -log( e^{s(z1_i, z2_i)} / (e^{s(z1_i, z2_i)} +
// sum_{j != i} e^{s(z1_i, z1_j)}) ) with cosine similarity s; negatives come
// from the first view only. Exactly 0 for a single item.
Tensor mu_contrastive(const std::vector<Tensor>& z1, const std::vector<Tensor>& z2);

// Per-token gate g = sigmoid(z.W_z + X.W_x); U = LayerNorm(g.z + (1-g).X).
FusedEncoding gated_fusion(const LatentSample& z, const Tensor& x, const ParamStore& params);

struct TwoViewLatents {
    LatentSample first;
    LatentSample second;
    Tensor x_first;  // contextual encoding of the first pass, reused for decoding
    GaussianParams gauss_first;
};

// Two full encoder passes with independent dropout masks and eps draws.
TwoViewLatents two_view_latents(const SerializedInput& input, const ParamStore& params,
                                const ModelDims& dims, std::pair<std::uint64_t, std::uint64_t> dropout_seeds,
                                std::pair<std::uint64_t, std::uint64_t> eps_seeds);

// Single SUN forward: encode, pool, latent head, sample, fuse.
struct RecordForward {
    Tensor x;
    GaussianParams gauss;
    LatentSample z;
    FusedEncoding fused;
};
RecordForward forward_record(const SerializedInput& input, const ParamStore& params,
                             const ModelDims& dims, std::uint64_t dropout_seed,
                             std::uint64_t eps_seed, bool training);

// Collected graph pieces of one batch, reduced by joint_loss.
struct BatchForward {
    std::vector<Tensor> item_t2s;     // every decoded record contributes one
    std::vector<Tensor> pair_kls;     // one per paired item
    std::vector<Tensor> singleton_z1; // two-view latents of singleton items
    std::vector<Tensor> singleton_z2;
};

struct JointLoss {
    Tensor total;
    LossBreakdown breakdown;
};

// total = t2s + du + mu with unit default weights; disabled or absent
// components contribute an exact 0.
JointLoss joint_loss(const BatchForward& forward, bool enable_du, bool enable_mu,
                     double du_weight = 1.0, double mu_weight = 1.0);

}  // namespace sun
