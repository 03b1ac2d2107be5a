#pragma once

#include <cstdint>
#include <string>

#include "sun/model.hpp"

namespace sun {

struct OptimizerConfig {
    double learning_rate = 3e-4;
    double weight_decay = 0.1;
    double warmup_ratio = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct LossConfig {
    bool enable_du = true;
    bool enable_mu = true;
    double du_weight = 1.0;
    double mu_weight = 1.0;
};

struct PathsConfig {
    std::string corpus;
    std::string out_dir;
};

// Desk-scale defaults; dropout and warmup follow the reference setup, the
// dimensions are scaled down.
struct TrainConfig {
    ModelDims dims;  // includes dropout_rate
    OptimizerConfig optimizer;
    std::size_t batch_size = 16;
    std::size_t epochs = 60;
    std::uint64_t seed = 1;
    LossConfig loss;
    PathsConfig paths;

    void validate() const;  // throws config_error
};

// Strict JSON: unknown keys anywhere are an error.
TrainConfig load_config(const std::string& path);
TrainConfig parse_config(const std::string& json_text);
std::string dump_config(const TrainConfig& config);

// FNV-1a over the canonical dump; identifies a configuration in reports.
std::string config_digest(const TrainConfig& config);

}  // namespace sun
