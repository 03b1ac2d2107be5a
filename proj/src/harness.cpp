#include "sun/harness.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include <json.hpp>

#include "sun/error.hpp"
#include "sun/param_store.hpp"
#include "sun/rng.hpp"
#include "sun/train.hpp"

namespace sun {

namespace {

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::string AblationReport::to_json() const {
    nlohmann::json root;
    root["variants"] = variants;
    nlohmann::json jcells = nlohmann::json::object();
    for (const auto& [variant, per_seed] : cells) {
        auto arr = nlohmann::json::array();
        for (const auto& cell : per_seed) {
            arr.push_back({{"seed", cell.seed}, {"em", cell.dev.em}, {"ex", cell.dev.ex}});
        }
        jcells[variant] = arr;
    }
    root["cells"] = jcells;
    root["median_em"] = median_em;
    root["median_ex"] = median_ex;
    return root.dump(1);
}

std::string AblationReport::to_table() const {
    std::ostringstream os;
    os << "variant      median_em  median_ex  seeds\n";
    for (const auto& variant : variants) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-12s %9.4f  %9.4f  %zu\n", variant.c_str(),
                      median_em.at(variant), median_ex.at(variant), cells.at(variant).size());
        os << line;
    }
    return os.str();
}

AblationReport ablate(const TrainConfig& base, const std::string& drop, std::size_t num_seeds) {
    if (num_seeds == 0) throw config_error("ablation needs at least one seed");
    std::vector<std::string> variants = {"full"};
    if (drop == "du") {
        variants.push_back("wo_du");
    } else if (drop == "mu") {
        variants.push_back("wo_mu");
    } else if (drop == "both") {
        variants.push_back("wo_du");
        variants.push_back("wo_mu");
        variants.push_back("baseline");
    } else {
        throw config_error("drop must be one of du | mu | both, got '" + drop + "'");
    }

    Corpus corpus = load_corpus(base.paths.corpus);

    AblationReport report;
    report.variants = variants;
    for (const auto& variant : variants) {
        for (std::size_t s = 0; s < num_seeds; ++s) {
            TrainConfig cfg = base;
            cfg.seed = base.seed + s;
            cfg.paths.out_dir =
                base.paths.out_dir + "/" + variant + "_seed" + std::to_string(cfg.seed);
            bool latent_path = true;
            if (variant == "wo_du") cfg.loss.enable_du = false;
            if (variant == "wo_mu") cfg.loss.enable_mu = false;
            if (variant == "baseline") {
                cfg.loss.enable_du = false;
                cfg.loss.enable_mu = false;
                latent_path = false;
            }
            TrainOutput trained = train(cfg, corpus, latent_path);
            ParamStore params = ParamStore::load(trained.checkpoint_path);
            AblationCell cell;
            cell.seed = cfg.seed;
            cell.dev = evaluate(params, cfg, corpus, "dev", true, latent_path);
            cell.dev.loss_curves = trained.epoch_means;
            report.cells[variant].push_back(std::move(cell));
        }
    }
    for (const auto& variant : variants) {
        std::vector<double> ems, exs;
        for (const auto& cell : report.cells[variant]) {
            ems.push_back(cell.dev.em);
            exs.push_back(cell.dev.ex);
        }
        report.median_em[variant] = median(ems);
        report.median_ex[variant] = median(exs);
    }
    return report;
}

GradcheckResult run_gradcheck(std::uint64_t seed) { return run_gradcheck_h(seed, 2e-5); }

GradcheckResult run_gradcheck_h(std::uint64_t seed, double h_arg) {
    const auto started = std::chrono::steady_clock::now();

    // micro corpus with enough multi-paraphrase and singleton groups to build
    // the frozen 2-paired + 2-singleton batch
    GeneratorProfile profile;
    profile.num_schemas = 1;
    profile.groups_per_schema = 8;
    profile.paraphrases_min = 2;
    profile.paraphrases_max = 2;
    profile.singleton_fraction = 0.45;
    profile.rows_per_table = 5;
    Corpus corpus = generate_corpus(derive_seed(seed, 0xC0DE), profile);

    ModelDims dims;
    dims.d = 6;
    dims.d_dec = 6;
    dims.layers = 1;
    dims.heads = 2;
    dims.max_positions = 56;
    dims.dropout_rate = 0.2;

    Vocab vocab = Vocab::build(corpus);
    ParamStore params = init_params(dims, vocab.size(), seed);

    // frozen micro-batch: two paired items, two singleton items
    std::map<std::string, std::vector<const ExampleRecord*>> groups;
    for (const auto& e : corpus.examples) {
        if (e.split == "train") groups[e.group_id].push_back(&e);
    }
    Batch batch;
    std::size_t pairs = 0, singles = 0;
    for (const auto& [gid, members] : groups) {
        if (members.size() >= 2 && pairs < 2) {
            batch.items.push_back(BatchItem{members[0], members[1]});
            ++pairs;
        } else if (members.size() == 1 && singles < 2) {
            batch.items.push_back(BatchItem{members[0], nullptr});
            ++singles;
        }
    }
    if (pairs != 2 || singles != 2) {
        throw data_error("gradcheck micro-corpus did not yield a 2-pair/2-singleton batch");
    }

    LossConfig loss;  // both constraints on
    auto forward = [&]() {
        return batch_forward(batch, corpus, vocab, params, dims, loss, seed, 0, true);
    };

    GradcheckResult result;
    const double h = h_arg;
    auto run_component = [&](const std::string& name, const std::function<Tensor()>& f) {
        GradcheckComponent component;
        component.name = name;
        component.report = finite_diff_check(f, params, h);
        if (component.report.max_rel_error > result.max_rel_error) {
            result.max_rel_error = component.report.max_rel_error;
            result.worst_component = name;
            result.worst_param = component.report.worst_param;
        }
        result.components.push_back(std::move(component));
    };

    run_component("t2s", [&]() { return joint_loss(forward(), false, false).total; });
    run_component("du", [&]() {
        BatchForward fwd = forward();
        return scale(sum_all(stack_scalars(fwd.pair_kls)),
                     1.0 / static_cast<double>(fwd.pair_kls.size()));
    });
    run_component("mu", [&]() {
        BatchForward fwd = forward();
        return mu_contrastive(fwd.singleton_z1, fwd.singleton_z2);
    });
    run_component("total", [&]() { return joint_loss(forward(), true, true).total; });

    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.pass = result.max_rel_error <= 1e-4;
    return result;
}

}  // namespace sun
