#pragma once

#include "hlift/factors.hpp"
#include "hlift/io.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace hlift {

/// Linear-interpolation quantile: sorted ascending, position (n - 1) * level.
double quantile(std::vector<double> sample, double level);
double quantile(const Eigen::VectorXd& sample, double level);

/// Upper-tail measures: higher e0 is the adverse outcome for longevity risk.
double value_at_risk(const Eigen::VectorXd& sample, double level);
/// Mean of the ceil(n (1 - level)) largest values.
double expected_shortfall(const Eigen::VectorXd& sample, double level);

struct ScrReport {
    double mean = 0.0;
    double var = 0.0;
    double es = 0.0;
    double scr_var = 0.0;
    double scr_es = 0.0;
};

ScrReport scr(const Eigen::VectorXd& terminal_e0, double var_level = 0.995, double es_level = 0.99);

struct ReverseStress {
    std::vector<double> shocks;
    std::vector<double> e0_gain;       ///< e0((1 - d) m) - e0(m) per shock
    std::vector<double> sensitivities; ///< gain / shock, years per unit shock
    double baseline_e0 = 0.0;
    double mean_sensitivity = 0.0;
    double cv = 0.0;                   ///< sample sd / mean of the sensitivities
    double delta_star = 0.0;
};

inline const std::vector<double> kDefaultShockGrid{0.05, 0.10, 0.15, 0.20};

/// delta* = scr_es / mean(sensitivities). Degenerate when scr_es <= 0 or a
/// sensitivity is not positive.
double critical_shock(double scr_es, const std::vector<double>& sensitivities);

ReverseStress reverse_stress(const Eigen::VectorXd& baseline_m, double scr_es,
                             const std::vector<double>& shocks = kDefaultShockGrid);
/// Baseline from the reconstructed surface at the mean terminal K.
ReverseStress reverse_stress(const LiLeeParams& params, double mean_K_terminal, Eigen::Index country, double scr_es,
                             const std::vector<double>& shocks = kDefaultShockGrid);

struct RiskRow {
    std::string country;
    ScrReport scr;
};

/// country,mean_e0,var_99_5,es_99_0,scr_var,scr_es
void write_risk_csv(std::ostream& out, const std::vector<RiskRow>& rows);
io::json stress_to_json(const std::string& country, const ScrReport& s, const ReverseStress& r);

} // namespace hlift
