#pragma once

#include <map>
#include <string>
#include <vector>

#include "sun/config.hpp"
#include "sun/corpus.hpp"
#include "sun/evaluate.hpp"
#include "sun/gradcheck.hpp"

namespace sun {

// One trained variant of the ablation grid, evaluated on dev.
struct AblationCell {
    std::uint64_t seed = 0;
    MetricsReport dev;
};

struct AblationReport {
    std::vector<std::string> variants;  // row order: full first
    std::map<std::string, std::vector<AblationCell>> cells;  // variant -> per-seed results
    std::map<std::string, double> median_em;
    std::map<std::string, double> median_ex;

    std::string to_json() const;
    std::string to_table() const;  // aligned text table, one row per variant
};

// Trains the full model and the requested ablated variants under identical
// seeds and data order. drop is one of du | mu | both; "both" also runs the
// plain baseline with the latent path removed.
AblationReport ablate(const TrainConfig& base, const std::string& drop, std::size_t num_seeds);

struct GradcheckComponent {
    std::string name;
    GradCheckReport report;
};

struct GradcheckResult {
    std::vector<GradcheckComponent> components;  // t2s, du, mu, total
    double max_rel_error = 0.0;
    std::string worst_component;
    std::string worst_param;
    double seconds = 0.0;
    bool pass = false;
};

// Finite-difference audit of every loss component on a frozen 4-item mixed
// micro-batch (2 paired, 2 singleton items).
GradcheckResult run_gradcheck(std::uint64_t seed);
GradcheckResult run_gradcheck_h(std::uint64_t seed, double h);

}  // namespace sun
