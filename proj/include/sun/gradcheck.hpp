#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sun/param_store.hpp"
#include "sun/tensor.hpp"

namespace sun {

struct GradCheckEntry {
    std::string param;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::vector<GradCheckEntry> per_param;

    bool pass(double tol) const { return max_rel_error <= tol; }
};

// Central-difference comparison of analytic gradients for a deterministic
// scalar function of the parameters. The caller freezes all stochastic seeds
// inside `f`. Relative error: |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, ParamStore& params, double h);

}  // namespace sun
