#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sun/corpus.hpp"
#include "sun/encoder.hpp"
#include "sun/error.hpp"
#include "sun/gradcheck.hpp"
#include "sun/model.hpp"
#include "sun/rng.hpp"
#include "sun/uncertainty.hpp"

using namespace sun;

namespace {

GaussianParams make_gauss(std::vector<double> mu, std::vector<double> log_var) {
    GaussianParams p;
    const std::size_t d = mu.size();
    p.mu = Tensor::from_data({d}, std::move(mu));
    p.log_var = Tensor::from_data({d}, std::move(log_var));
    return p;
}

GaussianParams random_gauss(std::size_t d, Rng& rng) {
    std::vector<double> mu(d), lv(d);
    for (auto& v : mu) v = 4.0 * rng.uniform01() - 2.0;
    for (auto& v : lv) v = 2.0 * rng.uniform01() - 1.0;
    return make_gauss(std::move(mu), std::move(lv));
}

// Monte-Carlo estimate of KL(p_bar || p) with standard error.
std::pair<double, double> kl_monte_carlo(const GaussianParams& p_bar, const GaussianParams& p,
                                         std::size_t samples, std::uint64_t seed) {
    const std::size_t d = p_bar.mu.numel();
    Rng rng(seed);
    auto log_density = [&](const std::vector<double>& z, const GaussianParams& g) {
        double lp = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double lv = g.log_var.at(k);
            const double diff = z[k] - g.mu.at(k);
            lp += -0.5 * std::log(2.0 * 3.14159265358979323846) - 0.5 * lv -
                  0.5 * diff * diff / std::exp(lv);
        }
        return lp;
    };
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> z(d);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < d; ++k) {
            z[k] = p_bar.mu.at(k) + std::exp(0.5 * p_bar.log_var.at(k)) * rng.normal();
        }
        const double ratio = log_density(z, p_bar) - log_density(z, p);
        sum += ratio;
        sum_sq += ratio * ratio;
    }
    const double mean = sum / static_cast<double>(samples);
    const double var = sum_sq / static_cast<double>(samples) - mean * mean;
    return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(samples))};
}

ModelDims tiny_dims() {
    ModelDims dims;
    dims.d = 8;
    dims.d_dec = 8;
    dims.layers = 1;
    dims.heads = 2;
    dims.dropout_rate = 0.2;
    return dims;
}

}  // namespace

TEST_CASE("latent_head zero propagation and weight sharing") {
    ModelDims dims = tiny_dims();
    ParamStore params = init_params(dims, 16, 1);
    Tensor zero_h = Tensor::zeros({dims.d});
    GaussianParams p = latent_head(zero_h, params);
    for (std::size_t i = 0; i < dims.d; ++i) {
        CHECK(p.mu.at(i) == 0.0);       // zero bias at init
        CHECK(p.log_var.at(i) == 0.0);  // unit variance at init
    }

    Rng rng(3);
    std::vector<double> hv(dims.d);
    for (auto& v : hv) v = rng.uniform01();
    Tensor h1 = Tensor::from_data({dims.d}, hv);
    Tensor h2 = Tensor::from_data({dims.d}, hv);
    GaussianParams a = latent_head(h1, params);
    GaussianParams b = latent_head(h2, params);
    for (std::size_t i = 0; i < dims.d; ++i) {
        CHECK(a.mu.at(i) == b.mu.at(i));
        CHECK(a.log_var.at(i) == b.log_var.at(i));
    }
}

TEST_CASE("latent_head d=2 hand case") {
    ParamStore params;
    params.add("latent.w_mu", Tensor::from_data({2, 2}, {1, 2, 3, 4}, true));
    params.add("latent.b_mu", Tensor::from_data({2}, {1, -1}, true));
    params.add("latent.w_sigma", Tensor::from_data({2, 2}, {2, 0, 0, 2}, true));
    params.add("latent.b_sigma", Tensor::from_data({2}, {0, 1}, true));
    Tensor h = Tensor::from_data({2}, {1.0, 2.0});
    GaussianParams p = latent_head(h, params);
    // mu = h.W + b = [1*1+2*3+1, 1*2+2*4-1] = [8, 9]
    CHECK(p.mu.at(0) == 8.0);
    CHECK(p.mu.at(1) == 9.0);
    // log_var = [2, 5]
    CHECK(p.log_var.at(0) == 2.0);
    CHECK(p.log_var.at(1) == 5.0);
}

TEST_CASE("sample_latent contract: inference identity, clamped variance, reconstruction") {
    GaussianParams p = make_gauss({0.5, -1.0}, {0.0, 0.4});
    LatentSample inference = sample_latent(p, 7, false);
    CHECK(inference.z.at(0) == 0.5);
    CHECK(inference.z.at(1) == -1.0);
    CHECK(inference.eps.at(0) == 0.0);

    // log_var -> -inf limit: clamping floors the std at exp(-4)
    GaussianParams tiny_var = make_gauss({1.0}, {-500.0});
    LatentSample s = sample_latent(tiny_var, 3, true);
    CHECK(std::abs(s.z.at(0) - 1.0) <= 5.0 * std::exp(-4.0));
    CHECK(s.z.at(0) == 1.0 + std::exp(-4.0) * s.eps.at(0));

    // reconstruction identity z = mu + exp(log_var/2) (.) eps, exactly
    GaussianParams q = make_gauss({0.3, 0.7, -0.2}, {0.1, -0.5, 0.9});
    LatentSample t = sample_latent(q, 11, true);
    for (std::size_t i = 0; i < 3; ++i) {
        const double expect = q.mu.at(i) + std::exp(0.5 * q.log_var.at(i)) * t.eps.at(i);
        CHECK(t.z.at(i) == expect);
    }
}

TEST_CASE("sample_latent statistics: standard normal draws") {
    GaussianParams p = make_gauss(std::vector<double>(1, 0.0), std::vector<double>(1, 0.0));
    const std::size_t n = 100000;
    double sum = 0.0;
    Rng seed_gen(12);
    // one long stream through repeated draws
    LatentSample s = sample_latent(make_gauss(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)),
                                   2024, true);
    for (std::size_t i = 0; i < n; ++i) sum += s.z.at(i);
    const double mean = sum / n;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
    (void)p;
    (void)seed_gen;
}

TEST_CASE("kl_du closed-form fixtures") {
    // identical distributions
    GaussianParams p = make_gauss({0.2, -0.7}, {0.3, -0.1});
    CHECK(kl_du(p, p).item() == doctest::Approx(0.0).epsilon(1e-12));

    // d=1, mu_bar=1, mu=0, both unit variance -> 1/2
    CHECK(kl_du(make_gauss({1.0}, {0.0}), make_gauss({0.0}, {0.0})).item() ==
          doctest::Approx(0.5).epsilon(1e-12));

    // d=1, equal means, var_bar=1, var=4 -> ln(4)/2 + 1/8 - 1/2
    const double expect = std::log(4.0) / 2.0 + 1.0 / 8.0 - 0.5;
    CHECK(kl_du(make_gauss({0.0}, {0.0}), make_gauss({0.0}, {std::log(4.0)})).item() ==
          doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS(kl_du(make_gauss({0.0}, {0.0}), make_gauss({0.0, 1.0}, {0.0, 0.0})),
                    dimension_error);
}

TEST_CASE("kl_du agrees with the Monte-Carlo oracle on the d=1 fixtures") {
    auto [mc1, se1] = kl_monte_carlo(make_gauss({1.0}, {0.0}), make_gauss({0.0}, {0.0}), 200000, 9);
    CHECK(std::abs(0.5 - mc1) <= 3.0 * se1);
    auto [mc2, se2] =
        kl_monte_carlo(make_gauss({0.0}, {0.0}), make_gauss({0.0}, {std::log(4.0)}), 200000, 10);
    const double closed = std::log(4.0) / 2.0 + 1.0 / 8.0 - 0.5;
    CHECK(std::abs(closed - mc2) <= 3.0 * se2);
}

TEST_CASE("kl_du properties: non-negative, asymmetric, Monte-Carlo match on random pairs") {
    Rng rng(77);
    for (int t = 0; t < 1000; ++t) {
        GaussianParams a = random_gauss(4, rng);
        GaussianParams b = random_gauss(4, rng);
        CHECK(kl_du(a, b).item() >= -1e-12);
        CHECK(kl_du(a, a).item() == doctest::Approx(0.0).epsilon(1e-12));
    }

    // exhibit asymmetry
    GaussianParams a = make_gauss({0.0}, {0.0});
    GaussianParams b = make_gauss({0.0}, {std::log(4.0)});
    CHECK(kl_du(a, b).item() != doctest::Approx(kl_du(b, a).item()).epsilon(1e-6));

    // 20 random pairs against the sampling oracle
    for (int t = 0; t < 20; ++t) {
        GaussianParams pb = random_gauss(3, rng);
        GaussianParams p = random_gauss(3, rng);
        const double closed = kl_du(pb, p).item();
        auto [mc, se] = kl_monte_carlo(pb, p, 100000, 100 + t);
        CHECK(std::abs(closed - mc) <= 3.0 * se);
    }
}

TEST_CASE("mu_contrastive fixtures") {
    Tensor e1 = Tensor::from_data({2}, {1.0, 0.0});
    Tensor e2 = Tensor::from_data({2}, {0.0, 1.0});

    // single item: empty negative sum
    CHECK(mu_contrastive({e1}, {e1}).item() == 0.0);

    // two orthogonal items, positives at cosine 1, cross-view firsts at 0
    const double got = mu_contrastive({e1, e2}, {e1, e2}).item();
    CHECK(got == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

    Tensor zero = Tensor::zeros({2});
    CHECK_THROWS_AS(mu_contrastive({e1, zero}, {e1, e2}), std::domain_error);
}

TEST_CASE("mu_contrastive monotonicity: raising the positive similarity lowers the loss") {
    Rng rng(5);
    for (int probe = 0; probe < 20; ++probe) {
        Tensor a1 = Tensor::from_data({3}, {1.0, 0.0, 0.0});
        Tensor a2 = Tensor::from_data({3}, {0.0, 1.0, 0.0});
        double prev = 1e300;
        for (double t : {0.0, 0.3, 0.6, 0.9, 0.99}) {
            // view-2 partner of item 0 rotates toward it as t grows
            const double angle_scale = 0.05 + 0.9 * rng.uniform01();
            (void)angle_scale;
            Tensor pos = Tensor::from_data({3}, {t, std::sqrt(1.0 - t * t), 0.0});
            const double loss = mu_contrastive({a1, a2}, {pos, a2}).item();
            CHECK(loss < prev);
            prev = loss;
        }
    }
}

TEST_CASE("mu_contrastive is invariant under a common permutation of both views") {
    Rng rng(8);
    std::vector<Tensor> z1, z2;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = rng.uniform01() + 0.1;
        for (auto& v : b) v = rng.uniform01() + 0.1;
        z1.push_back(Tensor::from_data({4}, a));
        z2.push_back(Tensor::from_data({4}, b));
    }
    const double base = mu_contrastive(z1, z2).item();
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<Tensor> p1, p2;
    for (std::size_t i : perm) {
        p1.push_back(z1[i]);
        p2.push_back(z2[i]);
    }
    CHECK(mu_contrastive(p1, p2).item() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gated_fusion: neutral gate at zero weights, shape and row contracts") {
    ModelDims dims = tiny_dims();
    ParamStore params = init_params(dims, 16, 3);
    for (const char* name : {"fuse.w_z", "fuse.w_x"}) {
        auto data = params.get(name).mutable_data();
        std::fill(data.begin(), data.end(), 0.0);
    }
    Rng rng(21);
    std::vector<double> xv(6 * dims.d), zv(dims.d);
    for (auto& v : xv) v = 2.0 * rng.uniform01() - 1.0;
    for (auto& v : zv) v = 2.0 * rng.uniform01() - 1.0;
    Tensor x = Tensor::from_data({6, dims.d}, xv);
    LatentSample z{Tensor::from_data({dims.d}, zv), Tensor::zeros({dims.d})};

    FusedEncoding fused = gated_fusion(z, x, params);
    CHECK(fused.u.shape() == x.shape());
    for (std::size_t i = 0; i < fused.gate.numel(); ++i) CHECK(fused.gate.at(i) == 0.5);

    // U = layer_norm((z + x) / 2) row-wise
    Tensor mid = layer_norm(scale(add(broadcast_row(z.z, 6), x), 0.5), 1e-5);
    for (std::size_t i = 0; i < mid.numel(); ++i) {
        CHECK(fused.u.at(i) == doctest::Approx(mid.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("gated_fusion d=2 single-token hand trace") {
    ParamStore params;
    params.add("fuse.w_z", Tensor::from_data({2, 2}, {0.5, 0.0, 0.0, 0.5}, true));
    params.add("fuse.w_x", Tensor::from_data({2, 2}, {0.25, 0.0, 0.0, -0.25}, true));
    Tensor x = Tensor::from_data({1, 2}, {1.0, -2.0});
    LatentSample z{Tensor::from_data({2}, {2.0, 4.0}), Tensor::zeros({2})};
    FusedEncoding fused = gated_fusion(z, x, params);

    const double g0 = 1.0 / (1.0 + std::exp(-(2.0 * 0.5 + 1.0 * 0.25)));
    const double g1 = 1.0 / (1.0 + std::exp(-(4.0 * 0.5 + (-2.0) * (-0.25))));
    CHECK(fused.gate.at(0) == doctest::Approx(g0).epsilon(1e-14));
    CHECK(fused.gate.at(1) == doctest::Approx(g1).epsilon(1e-14));
    const double u0 = g0 * 2.0 + (1.0 - g0) * 1.0;
    const double u1 = g1 * 4.0 + (1.0 - g1) * (-2.0);
    const double mean = (u0 + u1) / 2.0;
    const double var = ((u0 - mean) * (u0 - mean) + (u1 - mean) * (u1 - mean)) / 2.0;
    CHECK(fused.u.at(0) == doctest::Approx((u0 - mean) / std::sqrt(var + 1e-5)).epsilon(1e-12));
    CHECK(fused.u.at(1) == doctest::Approx((u1 - mean) / std::sqrt(var + 1e-5)).epsilon(1e-12));
}

TEST_CASE("fusion contract over random encodings: gate in (0,1), rows zero-mean") {
    ModelDims dims = tiny_dims();
    ParamStore params = init_params(dims, 16, 9);
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 3 + rng.bounded(8);
        std::vector<double> xv(n * dims.d), zv(dims.d);
        for (auto& v : xv) v = 4.0 * rng.uniform01() - 2.0;
        for (auto& v : zv) v = 4.0 * rng.uniform01() - 2.0;
        Tensor x = Tensor::from_data({n, dims.d}, xv);
        LatentSample z{Tensor::from_data({dims.d}, zv), Tensor::zeros({dims.d})};
        FusedEncoding fused = gated_fusion(z, x, params);
        CHECK(fused.u.shape() == x.shape());
        for (std::size_t i = 0; i < fused.gate.numel(); ++i) {
            CHECK(fused.gate.at(i) > 0.0);
            CHECK(fused.gate.at(i) < 1.0);
        }
        for (std::size_t r = 0; r < n; ++r) {
            double mean = 0.0;
            for (std::size_t j = 0; j < dims.d; ++j) mean += fused.u.at(r * dims.d + j);
            CHECK(std::abs(mean / dims.d) <= 1e-9);
        }
    }
}

TEST_CASE("two_view_latents: dropout-off views coincide, dropout-on views differ") {
    Corpus corpus = [] {
        GeneratorProfile p;
        p.num_schemas = 1;
        p.groups_per_schema = 8;
        p.rows_per_table = 5;
        return generate_corpus(71, p);
    }();
    Vocab vocab = Vocab::build(corpus);
    ModelDims dims = tiny_dims();
    ParamStore params = init_params(dims, vocab.size(), 4);
    const auto& e = corpus.examples[0];
    SerializedInput si = serialize_input(e, corpus.schema_by_id(e.schema_id), vocab);

    ModelDims no_drop = dims;
    no_drop.dropout_rate = 0.0;
    TwoViewLatents same =
        two_view_latents(si, params, no_drop, {1, 2}, {5, 5});  // same eps seeds, no dropout
    for (std::size_t i = 0; i < dims.d; ++i) CHECK(same.first.z.at(i) == same.second.z.at(i));

    TwoViewLatents differ = two_view_latents(si, params, dims, {1, 2}, {5, 6});
    bool any_diff = false;
    for (std::size_t i = 0; i < dims.d; ++i) {
        if (differ.first.z.at(i) != differ.second.z.at(i)) any_diff = true;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(two_view_latents(si, params, dims, {3, 3}, {5, 6}), config_error);
}

TEST_CASE("duplicated records with dropout off give a degenerate-positive collapse canary") {
    Corpus corpus = [] {
        GeneratorProfile p;
        p.num_schemas = 1;
        p.groups_per_schema = 8;
        p.rows_per_table = 5;
        return generate_corpus(72, p);
    }();
    Vocab vocab = Vocab::build(corpus);
    ModelDims dims = tiny_dims();
    dims.dropout_rate = 0.0;
    ParamStore params = init_params(dims, vocab.size(), 8);
    const auto& e = corpus.examples[0];
    SerializedInput si = serialize_input(e, corpus.schema_by_id(e.schema_id), vocab);

    // identical records, identical views: all similarities are 1, so each item
    // sees one positive at 1 and N-1 negatives at 1
    std::vector<Tensor> z1, z2;
    for (int i = 0; i < 4; ++i) {
        TwoViewLatents v = two_view_latents(si, params, dims, {10, 20}, {7, 7});
        z1.push_back(v.first.z);
        z2.push_back(v.second.z);
    }
    const double loss = mu_contrastive(z1, z2).item();
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-9));  // -log(e/(4e)) = ln 4
}

TEST_CASE("joint_loss routing and exact additivity") {
    Tensor t2s_a = Tensor::scalar(1.25);
    Tensor t2s_b = Tensor::scalar(0.75);
    Tensor kl = Tensor::scalar(0.5);
    Rng rng(2);
    std::vector<Tensor> z1, z2;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = rng.uniform01() + 0.05;
        for (auto& v : b) v = rng.uniform01() + 0.05;
        z1.push_back(Tensor::from_data({4}, a));
        z2.push_back(Tensor::from_data({4}, b));
    }

    BatchForward only_pairs;
    only_pairs.item_t2s = {t2s_a, t2s_b};
    only_pairs.pair_kls = {kl};
    JointLoss jp = joint_loss(only_pairs, true, true);
    CHECK(jp.breakdown.mu_loss == 0.0);
    CHECK(jp.breakdown.du == 0.5);
    CHECK(jp.breakdown.t2s == 1.0);

    BatchForward only_singletons;
    only_singletons.item_t2s = {t2s_a};
    only_singletons.singleton_z1 = z1;
    only_singletons.singleton_z2 = z2;
    JointLoss js = joint_loss(only_singletons, true, true);
    CHECK(js.breakdown.du == 0.0);
    CHECK(js.breakdown.mu_loss == mu_contrastive(z1, z2).item());

    BatchForward mixed;
    mixed.item_t2s = {t2s_a, t2s_b, t2s_a, t2s_b};
    mixed.pair_kls = {kl, Tensor::scalar(0.25)};
    mixed.singleton_z1 = z1;
    mixed.singleton_z2 = z2;
    JointLoss jm = joint_loss(mixed, true, true);
    // parts recomputed in isolation
    CHECK(jm.breakdown.t2s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(jm.breakdown.du == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(jm.breakdown.mu_loss == doctest::Approx(js.breakdown.mu_loss).epsilon(1e-15));
    CHECK(jm.breakdown.total == (jm.breakdown.t2s + jm.breakdown.du) + jm.breakdown.mu_loss);
    CHECK(jm.total.item() == jm.breakdown.total);

    // toggles zero the disabled components exactly
    JointLoss no_du = joint_loss(mixed, false, true);
    CHECK(no_du.breakdown.du == 0.0);
    JointLoss no_mu = joint_loss(mixed, true, false);
    CHECK(no_mu.breakdown.mu_loss == 0.0);

    BatchForward empty;
    CHECK_THROWS_AS(joint_loss(empty, true, true), data_error);

    // fewer than two singletons: mu is exactly zero
    BatchForward one_single;
    one_single.item_t2s = {t2s_a};
    one_single.singleton_z1 = {z1[0]};
    one_single.singleton_z2 = {z2[0]};
    CHECK(joint_loss(one_single, true, true).breakdown.mu_loss == 0.0);
}

TEST_CASE("gradients of kl, contrastive and fused paths pass finite differences") {
    ParamStore params;
    Rng rng(44);
    auto randvec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = 2.0 * rng.uniform01() - 1.0;
        return v;
    };
    params.add("mu_a", Tensor::from_data({3}, randvec(3), true));
    params.add("lv_a", Tensor::from_data({3}, randvec(3), true));
    params.add("mu_b", Tensor::from_data({3}, randvec(3), true));
    params.add("lv_b", Tensor::from_data({3}, randvec(3), true));
    params.add("z1a", Tensor::from_data({3}, randvec(3), true));
    params.add("z1b", Tensor::from_data({3}, randvec(3), true));
    params.add("z2a", Tensor::from_data({3}, randvec(3), true));
    params.add("z2b", Tensor::from_data({3}, randvec(3), true));
    params.add("fuse.w_z", Tensor::from_data({3, 3}, randvec(9), true));
    params.add("fuse.w_x", Tensor::from_data({3, 3}, randvec(9), true));
    params.add("x", Tensor::from_data({4, 3}, randvec(12), true));

    auto f = [&]() {
        GaussianParams pa{params.get("mu_a"), params.get("lv_a")};
        GaussianParams pb{params.get("mu_b"), params.get("lv_b")};
        Tensor kl = kl_du(pb, pa);
        Tensor contrastive = mu_contrastive({params.get("z1a"), params.get("z1b")},
                                            {params.get("z2a"), params.get("z2b")});
        LatentSample z{params.get("z1a"), Tensor::zeros({3})};
        FusedEncoding fused = gated_fusion(z, params.get("x"), params);
        return add(add(kl, contrastive), mean_all(mul(fused.u, fused.u)));
    };
    auto report = finite_diff_check(f, params, 1e-5);
    INFO("worst: " << report.worst_param);
    CHECK(report.max_rel_error <= 1e-4);
}
