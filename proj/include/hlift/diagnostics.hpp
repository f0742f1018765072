#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hlift {

enum class AdfRegression { Constant, ConstantTrend };

struct AdfOptions {
    /// Upper bound of the AIC lag search; default floor(12 (n/100)^0.25).
    std::optional<int> max_lag;
    /// Use exactly `max_lag` lags instead of searching 0..max_lag.
    bool fixed_lag = false;
    AdfRegression regression = AdfRegression::Constant;
};

struct AdfResult {
    double stat = 0.0;
    double p = 1.0;
    int lags = 0;
    int nobs = 0;
};

/// Augmented Dickey-Fuller t-test with MacKinnon (1994) approximate p-values.
AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& y, const AdfOptions& opts = {});

/// MacKinnon response-surface p-value for a single-series tau statistic.
double mackinnon_p(double tau, AdfRegression regression);

int default_adf_max_lag(Eigen::Index n);
int default_kpss_bandwidth(Eigen::Index n);

struct KpssResult {
    double stat = 0.0;
    double p = 0.1;
    int bandwidth = 0;
};

/// Level-stationarity KPSS test with a Bartlett long-run variance.
/// `bandwidth` < 0 selects floor(4 (n/100)^0.25).
KpssResult kpss_test(const Eigen::Ref<const Eigen::VectorXd>& y, int bandwidth = -1);

/// KPSS p-value by linear interpolation of the level-stationarity critical values,
/// clamped to [0.01, 0.10].
double kpss_p_value(double stat);

enum class Verdict { Stationary, UnitRoot, ConflictPersistent, ConflictInertial };

/// ADF passes when p < 0.05, KPSS passes when p > 0.05.
Verdict classify(double adf_p, double kpss_p);
const char* verdict_label(Verdict v);

struct StationarityReport {
    std::string series;
    double adf_stat = 0.0;
    double adf_p = 1.0;
    double kpss_stat = 0.0;
    double kpss_p = 0.1;
    Verdict verdict = Verdict::UnitRoot;
};

StationarityReport stationarity_report(const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& y,
                                       const AdfOptions& adf = {}, int kpss_bandwidth = -1);

/// country,adf_stat,adf_p,kpss_stat,kpss_p,interpretation
void write_stationarity_csv(std::ostream& out, const std::vector<StationarityReport>& rows);

} // namespace hlift
