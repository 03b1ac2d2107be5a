#include "sun/uncertainty.hpp"

#include <cmath>

#include "sun/error.hpp"
#include "sun/rng.hpp"

namespace sun {

namespace {

constexpr double kLogVarClamp = 8.0;
constexpr double kLayerNormEps = 1e-5;

Tensor as_row(const Tensor& v) { return reshape(v, {1, v.numel()}); }
Tensor as_vec(const Tensor& m) { return reshape(m, {m.numel()}); }

}  // namespace

GaussianParams latent_head(const Tensor& h, const ParamStore& params) {
    Tensor row = as_row(h);
    GaussianParams out;
    out.mu = as_vec(affine(row, params.get("latent.w_mu"), params.get("latent.b_mu")));
    out.log_var = as_vec(affine(row, params.get("latent.w_sigma"), params.get("latent.b_sigma")));
    return out;
}

LatentSample sample_latent(const GaussianParams& p, std::uint64_t seed, bool training) {
    const std::size_t d = p.mu.numel();
    LatentSample out;
    if (!training) {
        out.eps = Tensor::zeros({d});
        out.z = p.mu;
        return out;
    }
    Rng rng(seed);
    std::vector<double> eps(d);
    for (auto& e : eps) e = rng.normal();
    out.eps = Tensor::from_data({d}, std::move(eps));
    Tensor std_dev = exp(scale(clamp(p.log_var, -kLogVarClamp, kLogVarClamp), 0.5));
    out.z = add(p.mu, mul(std_dev, out.eps));
    return out;
}

Tensor kl_du(const GaussianParams& p_bar, const GaussianParams& p) {
    if (p_bar.mu.shape() != p.mu.shape() || p_bar.log_var.shape() != p.log_var.shape()) {
        throw dimension_error("kl_du: mismatched Gaussian dimensions " +
                              shape_str(p_bar.mu.shape()) + " vs " + shape_str(p.mu.shape()));
    }
    const double d = static_cast<double>(p.mu.numel());
    Tensor lv_bar = clamp(p_bar.log_var, -kLogVarClamp, kLogVarClamp);
    Tensor lv = clamp(p.log_var, -kLogVarClamp, kLogVarClamp);
    Tensor diff = sub(p_bar.mu, p.mu);
    Tensor term1 = scale(sub(lv, lv_bar), 0.5);
    Tensor ratio = mul(add(exp(lv_bar), mul(diff, diff)), exp(scale(lv, -1.0)));
    Tensor summed = sum_all(add(term1, scale(ratio, 0.5)));
    return add_const(summed, -0.5 * d);
}

Tensor mu_contrastive(const std::vector<Tensor>& z1, const std::vector<Tensor>& z2) {
    if (z1.size() != z2.size() || z1.empty()) {
        throw dimension_error("mu_contrastive: view sizes disagree or are empty");
    }
    const std::size_t n = z1.size();
    if (n == 1) return Tensor::scalar(0.0);  // empty negative sum

    auto safe_cos = [](const Tensor& a, const Tensor& b, std::size_t i) {
        try {
            return cosine_sim(a, b);
        } catch (const std::domain_error&) {
            throw std::domain_error("mu_contrastive: zero-norm latent at index " +
                                    std::to_string(i));
        }
    };

    std::vector<Tensor> losses;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor positive = safe_cos(z1[i], z2[i], i);
        std::vector<Tensor> logits = {positive};
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            logits.push_back(safe_cos(z1[i], z1[j], j));
        }
        losses.push_back(sub(logsumexp(stack_scalars(logits)), positive));
    }
    return scale(sum_all(stack_scalars(losses)), 1.0 / static_cast<double>(n));
}

FusedEncoding gated_fusion(const LatentSample& z, const Tensor& x, const ParamStore& params) {
    if (x.rank() != 2 || z.z.rank() != 1 || z.z.dim(0) != x.dim(1)) {
        throw dimension_error("gated_fusion: latent " + shape_str(z.z.shape()) +
                              " does not match encoding " + shape_str(x.shape()));
    }
    Tensor zb = broadcast_row(z.z, x.dim(0));
    Tensor gate = sigmoid(add(matmul(zb, params.get("fuse.w_z")), matmul(x, params.get("fuse.w_x"))));
    // g.z + (1-g).x == x + g.(z - x)
    Tensor blended = add(x, mul(gate, sub(zb, x)));
    return {layer_norm(blended, kLayerNormEps), gate};
}

TwoViewLatents two_view_latents(const SerializedInput& input, const ParamStore& params,
                                const ModelDims& dims,
                                std::pair<std::uint64_t, std::uint64_t> dropout_seeds,
                                std::pair<std::uint64_t, std::uint64_t> eps_seeds) {
    if (dropout_seeds.first == dropout_seeds.second) {
        throw config_error("two_view_latents: the views need distinct dropout seeds");
    }
    TwoViewLatents out;
    out.x_first = encode_context(input, params, dims, dropout_seeds.first, true);
    out.gauss_first = latent_head(global_rep(out.x_first, params), params);
    out.first = sample_latent(out.gauss_first, eps_seeds.first, true);

    Tensor x2 = encode_context(input, params, dims, dropout_seeds.second, true);
    GaussianParams g2 = latent_head(global_rep(x2, params), params);
    out.second = sample_latent(g2, eps_seeds.second, true);
    return out;
}

RecordForward forward_record(const SerializedInput& input, const ParamStore& params,
                             const ModelDims& dims, std::uint64_t dropout_seed,
                             std::uint64_t eps_seed, bool training) {
    RecordForward out;
    out.x = encode_context(input, params, dims, dropout_seed, training);
    out.gauss = latent_head(global_rep(out.x, params), params);
    out.z = sample_latent(out.gauss, eps_seed, training);
    out.fused = gated_fusion(out.z, out.x, params);
    return out;
}

JointLoss joint_loss(const BatchForward& forward, bool enable_du, bool enable_mu,
                     double du_weight, double mu_weight) {
    if (forward.item_t2s.empty()) {
        throw data_error("joint_loss: batch contributed no decoder losses");
    }
    Tensor t2s = scale(sum_all(stack_scalars(forward.item_t2s)),
                       1.0 / static_cast<double>(forward.item_t2s.size()));

    Tensor du = Tensor::scalar(0.0);
    if (enable_du && !forward.pair_kls.empty()) {
        du = scale(sum_all(stack_scalars(forward.pair_kls)),
                   du_weight / static_cast<double>(forward.pair_kls.size()));
    }

    Tensor mu = Tensor::scalar(0.0);
    if (enable_mu && forward.singleton_z1.size() >= 2) {
        mu = scale(mu_contrastive(forward.singleton_z1, forward.singleton_z2), mu_weight);
    }

    JointLoss out;
    out.total = add(add(t2s, du), mu);
    out.breakdown.t2s = t2s.item();
    out.breakdown.du = du.item();
    out.breakdown.mu_loss = mu.item();
    out.breakdown.total = (out.breakdown.t2s + out.breakdown.du) + out.breakdown.mu_loss;
    return out;
}

}  // namespace sun
