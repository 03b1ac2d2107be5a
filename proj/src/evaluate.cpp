#include "sun/evaluate.hpp"

#include <json.hpp>

#include "sun/decoder.hpp"
#include "sun/encoder.hpp"
#include "sun/error.hpp"
#include "sun/executor.hpp"
#include "sun/grammar.hpp"

namespace sun {

namespace {

struct Tally {
    std::size_t em = 0, ex = 0, count = 0;
};

MetricsReport finalize(const std::map<std::string, Tally>& buckets, std::size_t total_em,
                       std::size_t total_ex, std::size_t total) {
    MetricsReport report;
    report.em = total ? static_cast<double>(total_em) / static_cast<double>(total) : 0.0;
    report.ex = total ? static_cast<double>(total_ex) / static_cast<double>(total) : 0.0;
    for (const auto& [name, tally] : buckets) {
        BucketStats stats;
        stats.count = tally.count;
        stats.em = tally.count ? static_cast<double>(tally.em) / tally.count : 0.0;
        stats.ex = tally.count ? static_cast<double>(tally.ex) / tally.count : 0.0;
        report.per_difficulty[name] = stats;
    }
    return report;
}

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::json root;
    root["em"] = em;
    root["ex"] = ex;
    nlohmann::json buckets = nlohmann::json::object();
    for (const auto& [name, stats] : per_difficulty) {
        buckets[name] = {{"em", stats.em}, {"ex", stats.ex}, {"count", stats.count}};
    }
    root["per_difficulty"] = buckets;
    nlohmann::json curves = nlohmann::json::object();
    if (!loss_curves.empty()) {
        std::vector<double> t2s, du, mu, total;
        for (const auto& b : loss_curves) {
            t2s.push_back(b.t2s);
            du.push_back(b.du);
            mu.push_back(b.mu_loss);
            total.push_back(b.total);
        }
        curves["t2s"] = t2s;
        curves["du"] = du;
        curves["mu"] = mu;
        curves["total"] = total;
    }
    root["loss_curves"] = curves;
    root["seed"] = seed;
    root["config_digest"] = config_digest;
    return root.dump(1);
}

MetricsReport evaluate(const ParamStore& params, const TrainConfig& config, const Corpus& corpus,
                       const std::string& split, bool constrained, bool use_latent_path) {
    Vocab vocab = Vocab::build(corpus);
    const auto examples = corpus.split_examples(split);
    std::map<std::string, Tally> buckets;
    std::size_t total_em = 0, total_ex = 0;

    NoGradGuard guard;
    for (const auto* e : examples) {
        const SchemaDef& schema = corpus.schema_by_id(e->schema_id);
        const DatabaseInstance& db = corpus.database_by_id(e->schema_id);
        SerializedInput si = serialize_input(*e, schema, vocab);

        Tensor u;
        if (use_latent_path) {
            RecordForward fwd = forward_record(si, params, config.dims, 0, 0, false);
            u = fwd.fused.u;
        } else {
            u = encode_context(si, params, config.dims, 0, false);
        }
        DecodeResult decoded = decode(u, si, schema, params, 1, constrained);

        const SqlAst gold_canon = canonicalize(e->gold_ast, schema);
        bool em_hit = false, ex_hit = false;
        if (decoded.valid && decoded.ast) {
            em_hit = canonicalize(*decoded.ast, schema) == gold_canon;
            ex_hit = results_equal(execute(*decoded.ast, db, schema), execute(e->gold_ast, db, schema));
        }
        Tally& tally = buckets[difficulty_name(difficulty(e->gold_ast))];
        ++tally.count;
        tally.em += em_hit ? 1 : 0;
        tally.ex += ex_hit ? 1 : 0;
        total_em += em_hit ? 1 : 0;
        total_ex += ex_hit ? 1 : 0;
    }

    MetricsReport report = finalize(buckets, total_em, total_ex, examples.size());
    report.seed = config.seed;
    report.config_digest = config_digest(config);
    return report;
}

MetricsReport evaluate_gold(const Corpus& corpus, const std::string& split) {
    const auto examples = corpus.split_examples(split);
    std::map<std::string, Tally> buckets;
    std::size_t total_em = 0, total_ex = 0;
    for (const auto* e : examples) {
        const SchemaDef& schema = corpus.schema_by_id(e->schema_id);
        const DatabaseInstance& db = corpus.database_by_id(e->schema_id);
        const bool em_hit = canonicalize(e->gold_ast, schema) == canonicalize(e->gold_ast, schema);
        const bool ex_hit = results_equal(execute(e->gold_ast, db, schema),
                                          execute(e->gold_ast, db, schema));
        Tally& tally = buckets[difficulty_name(difficulty(e->gold_ast))];
        ++tally.count;
        tally.em += em_hit ? 1 : 0;
        tally.ex += ex_hit ? 1 : 0;
        total_em += em_hit ? 1 : 0;
        total_ex += ex_hit ? 1 : 0;
    }
    return finalize(buckets, total_em, total_ex, examples.size());
}

}  // namespace sun
