#pragma once

#include "hlift/factors.hpp"
#include "hlift/hmd.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace hlift {

struct SingularPair {
    Eigen::VectorXd u;
    double s = 0.0;
    Eigen::VectorXd v;
    int iterations = 0;
};

struct PowerIterationOptions {
    double tolerance = 1e-12;
    int max_iterations = 10000;
};

/// Leading singular triplet by power iteration on M^T M. Sign fixed so that sum(u) >= 0.
/// Throws Rank for a zero matrix and Convergence (with the last update size) when
/// the iteration budget runs out.
SingularPair leading_singular_pair(const Eigen::MatrixXd& M, const PowerIterationOptions& opts = {});

struct LiLeeFit {
    LiLeeParams params;
    std::vector<Eigen::MatrixXd> residuals; // per country, ages x years
};

/// Two-step SVD fit: common (B, K) from the cluster-mean centred surface, then a
/// rank-1 fit of each country's remaining residual.
LiLeeFit fit_lilee(const ClusterDataset& data);

struct RwdFit {
    double drift = 0.0;
    double sigma = 0.0;
};

/// Random walk with drift: mean and sample sd (n-1) of the first differences.
RwdFit fit_rwd(const Eigen::Ref<const Eigen::VectorXd>& series);

struct Ar1Fit {
    double phi = 0.0;
    double xi_sd = 0.0;
};

/// Zero-mean AR(1) k_t = phi k_{t-1} + xi_t by OLS without intercept.
/// xi_sd is sqrt(SSR / (n - 1)) over the n = len-1 regression residuals.
Ar1Fit fit_ar1(const Eigen::Ref<const Eigen::VectorXd>& series);

/// RWD on the common index plus AR(1) per specific index.
struct LinearForecaster {
    RwdFit common;
    std::vector<Ar1Fit> specific;

    /// Fits on every row of `panel`.
    static LinearForecaster fit(const FactorPanel& panel);

    /// One-step conditional mean of the first difference given the previous level.
    Eigen::VectorXd expected_step(const Eigen::VectorXd& previous_level) const;
    Eigen::VectorXd innovation_sd() const;

    /// Central projection for years last+1..last+horizon. `step_bias` is added to
    /// every step (zero for the plain model).
    FactorPanel forecast_central(const FactorPanel& history, int horizon,
                                 const Eigen::VectorXd* step_bias = nullptr) const;

    /// Simulated paths, each a horizon x (N+1) matrix of levels.
    std::vector<Eigen::MatrixXd> forecast_stochastic(const FactorPanel& history, int horizon, int n_sims,
                                                     std::uint64_t seed) const;
};

void write_params_json(std::ostream& out, const LiLeeParams& p);
LiLeeParams read_params_json(std::istream& in);

} // namespace hlift
