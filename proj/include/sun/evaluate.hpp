#pragma once

#include <map>
#include <string>
#include <vector>

#include "sun/config.hpp"
#include "sun/corpus.hpp"
#include "sun/param_store.hpp"
#include "sun/uncertainty.hpp"

namespace sun {

struct BucketStats {
    double em = 0.0;
    double ex = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    double em = 0.0;
    double ex = 0.0;
    std::map<std::string, BucketStats> per_difficulty;
    std::vector<LossBreakdown> loss_curves;  // per-epoch means when produced by training
    std::uint64_t seed = 0;
    std::string config_digest;

    std::string to_json() const;  // pretty JSON
};

// EM: canonical-AST equality. EX: executed results equality on the schema's
// database (order-insensitive by executor contract). Invalid decodes count as
// wrong for both. Greedy decoding; constrained unless told otherwise.
MetricsReport evaluate(const ParamStore& params, const TrainConfig& config, const Corpus& corpus,
                       const std::string& split, bool constrained, bool use_latent_path = true);

// Scores the gold ASTs against themselves; EM = EX = 1.0 by construction.
MetricsReport evaluate_gold(const Corpus& corpus, const std::string& split);

}  // namespace sun
