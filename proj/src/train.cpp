#include "sun/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sun/decoder.hpp"
#include "sun/error.hpp"
#include "sun/grammar.hpp"
#include "sun/rng.hpp"

namespace sun {

AdamW::AdamW(const ParamStore& params, const OptimizerConfig& config) : config_(config) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        m_.emplace_back(params.tensor_at(p).numel(), 0.0);
        v_.emplace_back(params.tensor_at(p).numel(), 0.0);
    }
}

void AdamW::step(ParamStore& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& tensor = params.tensor_at(p);
        auto values = tensor.mutable_data();
        auto grads = tensor.grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grads[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            values[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.epsilon) +
                               config_.weight_decay * values[i]);
        }
    }
}

double lr_at_step(const OptimizerConfig& config, std::size_t step, std::size_t total_steps) {
    const std::size_t warmup =
        static_cast<std::size_t>(std::llround(config.warmup_ratio * static_cast<double>(total_steps)));
    if (warmup > 0 && step < warmup) {
        return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (total_steps <= warmup) return config.learning_rate;
    const double remaining = static_cast<double>(total_steps - step);
    const double span = static_cast<double>(total_steps - warmup);
    return config.learning_rate * std::max(0.0, remaining / span);
}

namespace {

// distinct sub-stream tags for the stochastic pieces of one record forward
enum SeedTag : std::uint64_t {
    tag_dropout = 1,
    tag_eps = 2,
    tag_dropout_view2 = 3,
    tag_eps_view2 = 4,
};

std::uint64_t item_seed(std::uint64_t seed, std::size_t global_step, std::size_t slot,
                        std::uint64_t tag) {
    return derive_seed(seed, global_step, slot, tag);
}

}  // namespace

BatchForward batch_forward(const Batch& batch, const Corpus& corpus, const Vocab& vocab,
                           const ParamStore& params, const ModelDims& dims, const LossConfig& loss,
                           std::uint64_t seed, std::size_t global_step, bool use_latent_path) {
    BatchForward out;
    std::size_t slot = 0;
    for (const auto& item : batch.items) {
        const SchemaDef& schema = corpus.schema_by_id(item.record->schema_id);

        auto decode_loss = [&](const ExampleRecord& record, const Tensor& u,
                               const SerializedInput& si) {
            const ActionSequence gold = ast_to_actions(record.gold_ast, schema);
            out.item_t2s.push_back(t2s_loss(u, si, gold, schema, params));
        };

        if (!use_latent_path) {
            // plain baseline: the decoder consumes X directly
            SerializedInput si = serialize_input(*item.record, schema, vocab);
            Tensor x = encode_context(si, params, dims,
                                      item_seed(seed, global_step, slot, tag_dropout), true);
            decode_loss(*item.record, x, si);
            if (item.paired()) {
                SerializedInput si_p = serialize_input(*item.partner, schema, vocab);
                Tensor xp = encode_context(si_p, params, dims,
                                           item_seed(seed, global_step, slot, tag_dropout_view2),
                                           true);
                decode_loss(*item.partner, xp, si_p);
            }
            ++slot;
            continue;
        }

        if (item.paired()) {
            SerializedInput si = serialize_input(*item.record, schema, vocab);
            RecordForward fwd =
                forward_record(si, params, dims, item_seed(seed, global_step, slot, tag_dropout),
                               item_seed(seed, global_step, slot, tag_eps), true);
            decode_loss(*item.record, fwd.fused.u, si);

            SerializedInput si_p = serialize_input(*item.partner, schema, vocab);
            RecordForward fwd_p = forward_record(
                si_p, params, dims, item_seed(seed, global_step, slot, tag_dropout_view2),
                item_seed(seed, global_step, slot, tag_eps_view2), true);
            decode_loss(*item.partner, fwd_p.fused.u, si_p);

            // printed direction: KL(partner-dist || record-dist)
            out.pair_kls.push_back(kl_du(fwd_p.gauss, fwd.gauss));
        } else {
            SerializedInput si = serialize_input(*item.record, schema, vocab);
            if (loss.enable_mu) {
                TwoViewLatents views = two_view_latents(
                    si, params, dims,
                    {item_seed(seed, global_step, slot, tag_dropout),
                     item_seed(seed, global_step, slot, tag_dropout_view2)},
                    {item_seed(seed, global_step, slot, tag_eps),
                     item_seed(seed, global_step, slot, tag_eps_view2)});
                FusedEncoding fused = gated_fusion(views.first, views.x_first, params);
                decode_loss(*item.record, fused.u, si);
                out.singleton_z1.push_back(views.first.z);
                out.singleton_z2.push_back(views.second.z);
            } else {
                RecordForward fwd = forward_record(
                    si, params, dims, item_seed(seed, global_step, slot, tag_dropout),
                    item_seed(seed, global_step, slot, tag_eps), true);
                decode_loss(*item.record, fwd.fused.u, si);
            }
        }
        ++slot;
    }
    return out;
}

TrainOutput train(const TrainConfig& config, const Corpus& corpus, bool use_latent_path) {
    config.validate();
    if (config.paths.out_dir.empty()) throw config_error("paths.out_dir is required for training");
    std::filesystem::create_directories(config.paths.out_dir);
    const std::string out = config.paths.out_dir;

    {
        std::ofstream cfg_file(out + "/config.json", std::ios::trunc);
        cfg_file << dump_config(config) << "\n";
    }

    Vocab vocab = Vocab::build(corpus);
    ParamStore params = init_params(config.dims, vocab.size(), config.seed);
    AdamW optimizer(params, config.optimizer);

    const std::size_t train_size = corpus.split_examples("train").size();
    if (train_size == 0) throw data_error("train split is empty");
    const std::size_t steps_per_epoch = (train_size + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = steps_per_epoch * config.epochs;

    std::ofstream log(out + "/train_log.jsonl", std::ios::trunc);
    if (!log) throw data_error("cannot open metric log for writing in " + out);

    TrainOutput result;
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto batches = make_batches(corpus, config.batch_size, derive_seed(config.seed, 0xE, epoch));
        LossBreakdown epoch_sum;
        for (const auto& batch : batches) {
            params.zero_grads();
            BatchForward fwd = batch_forward(batch, corpus, vocab, params, config.dims, config.loss,
                                             config.seed, global_step, use_latent_path);
            JointLoss joint = joint_loss(fwd, config.loss.enable_du && use_latent_path,
                                         config.loss.enable_mu && use_latent_path,
                                         config.loss.du_weight, config.loss.mu_weight);
            if (!std::isfinite(joint.breakdown.total)) {
                throw numeric_error(
                    "non-finite loss at step " + std::to_string(global_step) +
                    " (t2s=" + std::to_string(joint.breakdown.t2s) +
                    ", du=" + std::to_string(joint.breakdown.du) +
                    ", mu=" + std::to_string(joint.breakdown.mu_loss) + ")");
            }
            backward(joint.total);
            optimizer.step(params, lr_at_step(config.optimizer, global_step, total_steps));

            nlohmann::json line;
            line["step"] = global_step;
            line["t2s"] = joint.breakdown.t2s;
            line["du"] = joint.breakdown.du;
            line["mu"] = joint.breakdown.mu_loss;
            line["total"] = joint.breakdown.total;
            log << line.dump() << "\n";

            epoch_sum.t2s += joint.breakdown.t2s;
            epoch_sum.du += joint.breakdown.du;
            epoch_sum.mu_loss += joint.breakdown.mu_loss;
            epoch_sum.total += joint.breakdown.total;
            ++global_step;
        }
        const double inv = 1.0 / static_cast<double>(batches.size());
        result.epoch_means.push_back({epoch_sum.t2s * inv, epoch_sum.du * inv,
                                      epoch_sum.mu_loss * inv, epoch_sum.total * inv});
        params.save(out + "/ckpt_epoch" + std::to_string(epoch) + ".bin");
    }
    result.checkpoint_path = out + "/ckpt.bin";
    params.save(result.checkpoint_path);
    result.steps = global_step;
    return result;
}

}  // namespace sun
