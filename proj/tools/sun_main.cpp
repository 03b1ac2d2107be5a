#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sun/config.hpp"
#include "sun/corpus.hpp"
#include "sun/error.hpp"
#include "sun/evaluate.hpp"
#include "sun/harness.hpp"
#include "sun/param_store.hpp"
#include "sun/train.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int cmd_gen_data(const std::string& out, std::uint64_t seed, const sun::GeneratorProfile& profile) {
    sun::Corpus corpus = sun::generate_corpus(seed, profile);
    sun::save_corpus(corpus, out);
    std::size_t train = 0, dev = 0, test = 0;
    for (const auto& e : corpus.examples) {
        if (e.split == "train") ++train;
        else if (e.split == "dev") ++dev;
        else ++test;
    }
    std::printf("wrote %s: %zu schemas, %zu examples (train %zu / dev %zu / test %zu)\n",
                out.c_str(), corpus.schemas.size(), corpus.examples.size(), train, dev, test);
    return 0;
}

int cmd_train(const std::string& config_path) {
    sun::TrainConfig config = sun::load_config(config_path);
    if (config.paths.corpus.empty()) throw sun::config_error("paths.corpus is required");
    sun::Corpus corpus = sun::load_corpus(config.paths.corpus);
    sun::TrainOutput out = sun::train(config, corpus);
    std::printf("trained %zu steps; final checkpoint %s\n", out.steps,
                out.checkpoint_path.c_str());
    if (!out.epoch_means.empty()) {
        const auto& last = out.epoch_means.back();
        std::printf("last epoch means: t2s %.4f du %.4f mu %.4f total %.4f\n", last.t2s, last.du,
                    last.mu_loss, last.total);
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split,
             bool unconstrained) {
    const std::filesystem::path sidecar =
        std::filesystem::path(ckpt).parent_path() / "config.json";
    if (!std::filesystem::exists(sidecar)) {
        throw sun::data_error("no config.json next to the checkpoint (" + sidecar.string() + ")");
    }
    sun::TrainConfig config = sun::load_config(sidecar.string());
    sun::Corpus corpus = sun::load_corpus(data);
    sun::ParamStore params = sun::ParamStore::load(ckpt);
    // a baseline checkpoint (latent path off) evaluates the way it trained;
    // its sidecar has both constraints disabled
    const bool latent_path = config.loss.enable_du || config.loss.enable_mu;
    sun::MetricsReport report =
        sun::evaluate(params, config, corpus, split, !unconstrained, latent_path);
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& drop, std::size_t seeds) {
    sun::TrainConfig config = sun::load_config(config_path);
    if (config.paths.corpus.empty()) throw sun::config_error("paths.corpus is required");
    sun::AblationReport report = sun::ablate(config, drop, seeds);
    std::cout << report.to_table();
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    sun::GradcheckResult result = sun::run_gradcheck(seed);
    for (const auto& component : result.components) {
        std::printf("%-6s max_rel_error %.3e (param %s)\n", component.name.c_str(),
                    component.report.max_rel_error, component.report.worst_param.c_str());
    }
    std::printf("%s: max %.3e in %s/%s, %.1f s\n", result.pass ? "PASS" : "FAIL",
                result.max_rel_error, result.worst_component.c_str(), result.worst_param.c_str(),
                result.seconds);
    return result.pass ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text-to-SQL trainer with uncertainty constraints"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    std::string gen_out;
    std::uint64_t gen_seed = 1;
    sun::GeneratorProfile profile;
    gen->add_option("--out", gen_out, "output corpus path")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--schemas", profile.num_schemas, "number of schemas");
    gen->add_option("--groups", profile.groups_per_schema, "intent groups per schema");
    gen->add_option("--par-min", profile.paraphrases_min, "min paraphrases per multi group");
    gen->add_option("--par-max", profile.paraphrases_max, "max paraphrases per multi group");
    gen->add_option("--singleton-frac", profile.singleton_fraction, "fraction of size-1 groups");
    gen->add_option("--rows", profile.rows_per_table, "database rows per table");

    // train
    auto* train_cmd = app.add_subcommand("train", "train from a config file");
    std::string train_config;
    train_cmd->add_option("--config", train_config, "config JSON path")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_split;
    bool eval_unconstrained = false;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "corpus path")->required();
    eval_cmd->add_option("--split", eval_split, "dev or test")
        ->required()
        ->check(CLI::IsMember({"dev", "test"}));
    eval_cmd->add_flag("--unconstrained", eval_unconstrained, "disable admissibility masking");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "train the ablation grid");
    std::string ablate_config, ablate_drop;
    std::size_t ablate_seeds = 1;
    ablate_cmd->add_option("--config", ablate_config, "config JSON path")->required();
    ablate_cmd->add_option("--drop", ablate_drop, "du, mu, or both")
        ->required()
        ->check(CLI::IsMember({"du", "mu", "both"}));
    ablate_cmd->add_option("--seeds", ablate_seeds, "number of seeds");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference audit of the losses");
    std::uint64_t grad_seed = 1;
    grad_cmd->add_option("--seed", grad_seed, "fixture seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_out, gen_seed, profile);
        if (train_cmd->parsed()) return cmd_train(train_config);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_unconstrained);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_config, ablate_drop, ablate_seeds);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_seed);
    } catch (const sun::numeric_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const sun::data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
