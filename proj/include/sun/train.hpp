#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sun/config.hpp"
#include "sun/corpus.hpp"
#include "sun/encoder.hpp"
#include "sun/param_store.hpp"
#include "sun/uncertainty.hpp"

namespace sun {

// Decoupled weight decay with bias-corrected moments.
class AdamW {
 public:
    AdamW(const ParamStore& params, const OptimizerConfig& config);
    void step(ParamStore& params, double lr);

 private:
    OptimizerConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

// Linear warmup to the base rate, then linear decay to zero.
double lr_at_step(const OptimizerConfig& config, std::size_t step, std::size_t total_steps);

// Forward of one batch: every record of every item is decoded with teacher
// forcing; paired items contribute a KL, singleton items two-view latents.
// With use_latent_path=false the decoder consumes the contextual encoding
// directly and no latent machinery runs (the plain baseline).
BatchForward batch_forward(const Batch& batch, const Corpus& corpus, const Vocab& vocab,
                           const ParamStore& params, const ModelDims& dims, const LossConfig& loss,
                           std::uint64_t seed, std::size_t global_step, bool use_latent_path);

struct TrainOutput {
    std::string checkpoint_path;              // final checkpoint
    std::vector<LossBreakdown> epoch_means;   // loss curves per component
    std::size_t steps = 0;
};

// Full training loop: writes config.json, train_log.jsonl, per-epoch and
// final checkpoints under out_dir. Deterministic per (seed, config, corpus).
TrainOutput train(const TrainConfig& config, const Corpus& corpus, bool use_latent_path = true);

}  // namespace sun
