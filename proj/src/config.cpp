#include "sun/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sun/error.hpp"

namespace sun {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
    for (const auto& [k, v] : obj.items()) {
        if (!keys.count(k)) {
            throw config_error("unknown key '" + k + "' in " + where +
                               " (typo-guard: every key must be recognized)");
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (dims.d == 0 || dims.layers == 0 || dims.heads == 0) {
        throw config_error("model dimensions must be positive");
    }
    if (dims.d % dims.heads != 0) throw config_error("d must be divisible by heads");
    if (dims.d_dec != dims.d) throw config_error("d_dec must equal d");
    if (dims.dropout_rate < 0.0 || dims.dropout_rate >= 1.0) {
        throw config_error("dropout_rate must lie in [0, 1)");
    }
    if (optimizer.learning_rate <= 0.0) throw config_error("learning_rate must be positive");
    if (optimizer.weight_decay < 0.0) throw config_error("weight_decay must be non-negative");
    if (optimizer.warmup_ratio < 0.0 || optimizer.warmup_ratio > 1.0) {
        throw config_error("warmup_ratio must lie in [0, 1]");
    }
    if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 ||
        optimizer.beta2 >= 1.0) {
        throw config_error("betas must lie in [0, 1)");
    }
    if (optimizer.epsilon <= 0.0) throw config_error("epsilon must be positive");
    if (batch_size == 0) throw config_error("batch_size must be at least 1");
    if (epochs == 0) throw config_error("epochs must be at least 1");
    if (loss.du_weight < 0.0 || loss.mu_weight < 0.0) {
        throw config_error("loss weights must be non-negative");
    }
}

TrainConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("malformed config JSON: ") + e.what());
    }
    check_keys(root,
               {"dims", "dropout_rate", "optimizer", "batch_size", "epochs", "seed", "loss",
                "paths"},
               "config root");

    TrainConfig cfg;
    if (root.contains("dims")) {
        const auto& dims = root["dims"];
        check_keys(dims, {"d", "d_dec", "layers", "heads", "max_positions"}, "dims");
        if (dims.contains("d")) cfg.dims.d = dims["d"].get<std::size_t>();
        cfg.dims.d_dec = dims.contains("d_dec") ? dims["d_dec"].get<std::size_t>() : cfg.dims.d;
        if (dims.contains("layers")) cfg.dims.layers = dims["layers"].get<std::size_t>();
        if (dims.contains("heads")) cfg.dims.heads = dims["heads"].get<std::size_t>();
        if (dims.contains("max_positions")) {
            cfg.dims.max_positions = dims["max_positions"].get<std::size_t>();
        }
    }
    if (root.contains("dropout_rate")) cfg.dims.dropout_rate = root["dropout_rate"].get<double>();
    if (root.contains("optimizer")) {
        const auto& opt = root["optimizer"];
        check_keys(opt, {"learning_rate", "weight_decay", "warmup_ratio", "betas", "epsilon"},
                   "optimizer");
        if (opt.contains("learning_rate")) {
            cfg.optimizer.learning_rate = opt["learning_rate"].get<double>();
        }
        if (opt.contains("weight_decay")) {
            cfg.optimizer.weight_decay = opt["weight_decay"].get<double>();
        }
        if (opt.contains("warmup_ratio")) {
            cfg.optimizer.warmup_ratio = opt["warmup_ratio"].get<double>();
        }
        if (opt.contains("betas")) {
            if (!opt["betas"].is_array() || opt["betas"].size() != 2) {
                throw config_error("optimizer.betas must be a two-element array");
            }
            cfg.optimizer.beta1 = opt["betas"][0].get<double>();
            cfg.optimizer.beta2 = opt["betas"][1].get<double>();
        }
        if (opt.contains("epsilon")) cfg.optimizer.epsilon = opt["epsilon"].get<double>();
    }
    if (root.contains("batch_size")) cfg.batch_size = root["batch_size"].get<std::size_t>();
    if (root.contains("epochs")) cfg.epochs = root["epochs"].get<std::size_t>();
    if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("loss")) {
        const auto& loss = root["loss"];
        check_keys(loss, {"enable_du", "enable_mu", "du_weight", "mu_weight"}, "loss");
        if (loss.contains("enable_du")) cfg.loss.enable_du = loss["enable_du"].get<bool>();
        if (loss.contains("enable_mu")) cfg.loss.enable_mu = loss["enable_mu"].get<bool>();
        if (loss.contains("du_weight")) cfg.loss.du_weight = loss["du_weight"].get<double>();
        if (loss.contains("mu_weight")) cfg.loss.mu_weight = loss["mu_weight"].get<double>();
    }
    if (root.contains("paths")) {
        const auto& paths = root["paths"];
        check_keys(paths, {"corpus", "out_dir"}, "paths");
        if (paths.contains("corpus")) cfg.paths.corpus = paths["corpus"].get<std::string>();
        if (paths.contains("out_dir")) cfg.paths.out_dir = paths["out_dir"].get<std::string>();
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

std::string dump_config(const TrainConfig& cfg) {
    json root;
    root["dims"] = {{"d", cfg.dims.d},
                    {"d_dec", cfg.dims.d_dec},
                    {"layers", cfg.dims.layers},
                    {"heads", cfg.dims.heads},
                    {"max_positions", cfg.dims.max_positions}};
    root["dropout_rate"] = cfg.dims.dropout_rate;
    root["optimizer"] = {{"learning_rate", cfg.optimizer.learning_rate},
                         {"weight_decay", cfg.optimizer.weight_decay},
                         {"warmup_ratio", cfg.optimizer.warmup_ratio},
                         {"betas", {cfg.optimizer.beta1, cfg.optimizer.beta2}},
                         {"epsilon", cfg.optimizer.epsilon}};
    root["batch_size"] = cfg.batch_size;
    root["epochs"] = cfg.epochs;
    root["seed"] = cfg.seed;
    root["loss"] = {{"enable_du", cfg.loss.enable_du},
                    {"enable_mu", cfg.loss.enable_mu},
                    {"du_weight", cfg.loss.du_weight},
                    {"mu_weight", cfg.loss.mu_weight}};
    root["paths"] = {{"corpus", cfg.paths.corpus}, {"out_dir", cfg.paths.out_dir}};
    return root.dump(1);
}

std::string config_digest(const TrainConfig& cfg) {
    const std::string text = dump_config(cfg);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace sun
