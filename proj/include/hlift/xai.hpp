#pragma once

#include "hlift/lstm.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hlift {

/// Share (percent, summing to 100) of mean absolute input gradient per window
/// row. Entry 0 is the oldest lag t-L, entry L-1 the most recent t-1.
struct SaliencyProfile {
    Eigen::VectorXd importance;
};

/// Gradients of prediction[output] (deterministic mode), averaged over features
/// within a lag, then over samples. Degenerate when every gradient is zero.
SaliencyProfile temporal_saliency(const NetworkParams& net, const std::vector<Eigen::MatrixXd>& windows,
                                  Eigen::Index output = 0);

using ScalarModel = std::function<double(const Eigen::VectorXd&)>;

/// Shapley values by direct enumeration of all 2^d coalitions, absent features
/// taken from `reference`. d <= 20.
Eigen::VectorXd exact_shapley(const ScalarModel& f, const Eigen::VectorXd& x, const Eigen::VectorXd& reference);

struct ShapOptions {
    bool exact = false;   ///< full enumeration (d <= 12 in practice)
    int n_coalitions = 0; ///< sampled mode budget; 0 = 2 d + 2048
    std::uint64_t seed = 0;
};

struct ShapReport {
    double base_value = 0.0;     ///< f at the mean background row
    Eigen::MatrixXd phi;         ///< samples x d raw attributions
    Eigen::VectorXd predictions; ///< f(x) per sample
};

/// Kernel SHAP against the mean background row. Sampled mode solves the
/// Shapley-kernel weighted least squares with the efficiency constraint
/// sum(phi) = f(x) - base imposed exactly.
ShapReport kernel_shap(const ScalarModel& f, const Eigen::MatrixXd& background, const Eigen::MatrixXd& test,
                       const ShapOptions& opts = {});
/// Network wrapper: windows are flattened with index l * F + j.
ShapReport kernel_shap(const NetworkParams& net, const std::vector<Eigen::MatrixXd>& background,
                       const std::vector<Eigen::MatrixXd>& test, Eigen::Index output, const ShapOptions& opts = {});

/// Per factor j: mean over samples and lags of |phi(s, l * F + j)|.
Eigen::VectorXd aggregate_country_influence(const Eigen::MatrixXd& phi, int lookback, Eigen::Index n_features);

void write_saliency_csv(std::ostream& out, const SaliencyProfile& p);
void write_influence_csv(std::ostream& out, const Eigen::VectorXd& scores, const std::vector<std::string>& names);

} // namespace hlift
