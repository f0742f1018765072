#pragma once

#include "hlift/factors.hpp"
#include "hlift/hybrid.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hlift {

/// m_x = exp(alpha[x, country] + B[x] * K). The country-specific b k term is left
/// out on purpose, so countries differ only through alpha.
Eigen::VectorXd reconstruct_surface(const LiLeeParams& params, Eigen::Index country, double K);

/// Closed period life table over ages 0..omega, omega = m.size() - 1.
struct LifeTable {
    Eigen::VectorXd m, q, p, l;
    double e0 = 0.0;
    bool clamped = false; ///< some m_x > 2 forced q_x = 1
};

/// q = m / (1 + m/2) (clamped to 1 with a warning), l_0 = 1, e0 = sum(l) - 0.5.
/// Throws Domain on negative or non-finite m.
LifeTable life_table(const Eigen::VectorXd& m);
double life_expectancy(const Eigen::VectorXd& m);

struct MonotonicityResult {
    bool pass = true;
    int first_violation = -1; ///< age x with m_{x+1} < m_x
};

/// PASS iff m_{x+1} >= m_x for every x in [first_age, last_age - 1]; `m` is indexed by age.
MonotonicityResult monotonicity_check(const Eigen::VectorXd& m, int first_age = 30, int last_age = 90);

/// e0 per path (rows) and horizon (columns 0..H) from the common-factor column.
Eigen::MatrixXd e0_paths(const ForecastEnsemble& ens, const LiLeeParams& params, Eigen::Index country);

struct LongevityRow {
    std::string country;
    double e0_start = 0.0;          ///< model-reconstructed at the origin
    double e0_start_observed = 0.0; ///< from the observed final-year surface (NaN when unknown)
    double e0_end = 0.0;            ///< ensemble mean at the final horizon
    double ci_low = 0.0;
    double ci_high = 0.0;
    double net_gain = 0.0;          ///< e0_end - e0_start
};

LongevityRow longevity_row(const std::string& country, const Eigen::MatrixXd& e0, double observed_start);
void write_longevity_csv(std::ostream& out, const std::vector<LongevityRow>& rows);
void write_life_table_csv(std::ostream& out, const LifeTable& t);

} // namespace hlift
