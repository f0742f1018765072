#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace hlift {

/// Latent factor levels over contiguous years. Column 0 is the common index K,
/// column 1+i the specific index of country i.
struct FactorPanel {
    std::vector<int> years;
    Eigen::MatrixXd values; // years x (N+1)

    Eigen::Index n_years() const { return values.rows(); }
    Eigen::Index n_factors() const { return values.cols(); }
    /// Row index of `year`, or -1.
    Eigen::Index row_of(int year) const;
    /// Rows whose year lies in [first, last].
    FactorPanel slice(int first, int last) const;
    /// This panel followed by `tail`; tail years must continue contiguously.
    FactorPanel concat(const FactorPanel& tail) const;
    void validate() const;
};

/// Two-step Li-Lee parameter set.
///   log m[x,t,i] = alpha[x,i] + B[x] K[t] + b[x,i] k[t,i] + eps
/// Normalised so that sum(B) = 1, sum(K) = 0, and per country sum(b_i) = 1,
/// sum(k_i) = 0 (a country with no specific signal carries b_i uniform, k_i = 0).
struct LiLeeParams {
    std::vector<std::string> countries;
    std::vector<int> ages;
    std::vector<int> years;
    Eigen::MatrixXd alpha; // ages x N
    Eigen::VectorXd B;     // ages
    Eigen::VectorXd K;     // years
    Eigen::MatrixXd b;     // ages x N
    Eigen::MatrixXd k;     // years x N

    Eigen::Index n_countries() const { return alpha.cols(); }
    Eigen::Index n_ages() const { return alpha.rows(); }
    Eigen::Index n_years() const { return K.size(); }

    /// Throws Shape on inconsistent dimensions.
    void validate() const;
    /// [K, k_1..k_N] over the fitted years.
    FactorPanel factors() const;
    /// alpha_i + B K_t + b_i k_{t,i} for one country (ages x years).
    Eigen::MatrixXd fitted_log_rates(Eigen::Index country) const;
    Eigen::Index country_index(const std::string& code) const;
};

} // namespace hlift
