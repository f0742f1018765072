#include "hlift/risk.hpp"

#include "hlift/actuarial.hpp"
#include "hlift/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace hlift {

using Eigen::Index;
using Eigen::VectorXd;

double quantile(std::vector<double> v, double level) {
    require(!v.empty(), ErrorKind::Domain, "quantile of an empty sample");
    require(level >= 0.0 && level <= 1.0, ErrorKind::Domain, "quantile level must lie in [0, 1]");
    for (double x : v) require(std::isfinite(x), ErrorKind::Numeric, "sample contains non-finite values");
    std::sort(v.begin(), v.end());
    const double pos = double(v.size() - 1) * level;
    const std::size_t lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - double(lo);
    return w == 0.0 ? v[lo] : v[lo] + w * (v[hi] - v[lo]);
}

double quantile(const VectorXd& sample, double level) {
    return quantile(std::vector<double>(sample.data(), sample.data() + sample.size()), level);
}

double value_at_risk(const VectorXd& sample, double level) {
    require(sample.size() >= 2, ErrorKind::Domain, "VaR needs at least two values");
    return quantile(sample, level);
}

double expected_shortfall(const VectorXd& sample, double level) {
    require(level >= 0.0 && level < 1.0, ErrorKind::Domain, "ES level must lie in [0, 1)");
    const double tail = double(sample.size()) * (1.0 - level);
    // n (1 - level) carries rounding noise (1000 * (1 - 0.99) is not exactly 10).
    const Index k = Index(std::ceil(tail - 1e-9));
    require(k >= 1, ErrorKind::Domain, "ES tail is empty: n (1 - level) < 1");
    std::vector<double> v(sample.data(), sample.data() + sample.size());
    for (double x : v) require(std::isfinite(x), ErrorKind::Numeric, "sample contains non-finite values");
    std::sort(v.begin(), v.end(), std::greater<>());
    return std::accumulate(v.begin(), v.begin() + k, 0.0) / double(k);
}

ScrReport scr(const VectorXd& terminal_e0, double var_level, double es_level) {
    ScrReport r;
    r.mean = terminal_e0.mean();
    r.var = value_at_risk(terminal_e0, var_level);
    r.es = expected_shortfall(terminal_e0, es_level);
    r.scr_var = r.var - r.mean;
    r.scr_es = r.es - r.mean;
    return r;
}

double critical_shock(double scr_es, const std::vector<double>& sensitivities) {
    require(scr_es > 0.0, ErrorKind::Degenerate, "SCR_ES must be positive for a reverse stress test");
    require(!sensitivities.empty(), ErrorKind::Domain, "no shock sensitivities");
    for (double s : sensitivities)
        require(s > 0.0, ErrorKind::Degenerate, "e0 sensitivity to a mortality shock is not positive");
    const double mean = std::accumulate(sensitivities.begin(), sensitivities.end(), 0.0) / double(sensitivities.size());
    return scr_es / mean;
}

ReverseStress reverse_stress(const VectorXd& baseline_m, double scr_es, const std::vector<double>& shocks) {
    require(scr_es > 0.0, ErrorKind::Degenerate, "SCR_ES must be positive for a reverse stress test");
    require(!shocks.empty(), ErrorKind::Domain, "empty shock grid");
    ReverseStress r;
    r.shocks = shocks;
    r.baseline_e0 = life_expectancy(baseline_m);
    for (double d : shocks) {
        require(d > 0.0 && d < 1.0, ErrorKind::Domain, "shocks must lie in (0, 1)");
        const double gain = life_expectancy((1.0 - d) * baseline_m) - r.baseline_e0;
        r.e0_gain.push_back(gain);
        r.sensitivities.push_back(gain / d);
    }
    r.delta_star = critical_shock(scr_es, r.sensitivities);
    const double n = double(r.sensitivities.size());
    r.mean_sensitivity = std::accumulate(r.sensitivities.begin(), r.sensitivities.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : r.sensitivities) ss += (s - r.mean_sensitivity) * (s - r.mean_sensitivity);
    r.cv = r.sensitivities.size() > 1 ? std::sqrt(ss / (n - 1.0)) / r.mean_sensitivity : 0.0;
    return r;
}

ReverseStress reverse_stress(const LiLeeParams& params, double mean_K_terminal, Index country, double scr_es,
                             const std::vector<double>& shocks) {
    return reverse_stress(reconstruct_surface(params, country, mean_K_terminal), scr_es, shocks);
}

void write_risk_csv(std::ostream& out, const std::vector<RiskRow>& rows) {
    out << "country,mean_e0,var_99_5,es_99_0,scr_var,scr_es\n";
    for (const auto& r : rows)
        out << r.country << ',' << io::format_double(r.scr.mean) << ',' << io::format_double(r.scr.var) << ','
            << io::format_double(r.scr.es) << ',' << io::format_double(r.scr.scr_var) << ','
            << io::format_double(r.scr.scr_es) << '\n';
}

io::json stress_to_json(const std::string& country, const ScrReport& s, const ReverseStress& r) {
    return {{"country", country},
            {"mean_e0", s.mean},
            {"var_99_5", s.var},
            {"es_99_0", s.es},
            {"scr_var", s.scr_var},
            {"scr_es", s.scr_es},
            {"baseline_e0", r.baseline_e0},
            {"shocks", r.shocks},
            {"e0_gain", r.e0_gain},
            {"sensitivities", r.sensitivities},
            {"mean_sensitivity", r.mean_sensitivity},
            {"sensitivity_cv", r.cv},
            {"delta_star", r.delta_star}};
}

} // namespace hlift
