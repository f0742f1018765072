#include "hlift/diagnostics.hpp"

#include "hlift/error.hpp"
#include "hlift/io.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace hlift {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct OlsFit {
    Eigen::VectorXd beta;
    double ssr = 0.0;
    double se0 = 0.0; // standard error of the first coefficient
    bool singular = false;
};

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    OlsFit f;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) {
        f.singular = true;
        return f;
    }
    f.beta = qr.solve(y);
    f.ssr = (y - X * f.beta).squaredNorm();
    const auto k = X.cols();
    const auto n = X.rows();
    const double sigma2 = f.ssr / double(n - k);
    // (X^T X)^{-1}_{00} = || R^{-T} P^T e_0 ||^2
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(k);
    e0[0] = 1.0;
    const Eigen::VectorXd z = qr.colsPermutation().transpose() * e0;
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Eigen::VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(z);
    f.se0 = std::sqrt(sigma2 * w.squaredNorm());
    return f;
}

// Regression of dy[t] on y[t], dy[t-1..t-p], constant (and trend), for t in [first, n-2].
// dy[t] = y[t+1] - y[t].
void adf_design(const Eigen::VectorXd& y, int lags, int first, AdfRegression reg, Eigen::MatrixXd& X,
                Eigen::VectorXd& target) {
    const auto n = y.size();
    const Eigen::Index rows = (n - 1) - first;
    const int extra = reg == AdfRegression::ConstantTrend ? 2 : 1;
    X.resize(rows, 1 + lags + extra);
    target.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index t = first + r;
        target[r] = y[t + 1] - y[t];
        X(r, 0) = y[t];
        for (int j = 1; j <= lags; ++j) X(r, j) = y[t - j + 1] - y[t - j];
        X(r, 1 + lags) = 1.0;
        if (reg == AdfRegression::ConstantTrend) X(r, 2 + lags) = double(t + 1);
    }
}

double aic(double ssr, Eigen::Index nobs, Eigen::Index k) {
    const double n = double(nobs);
    const double llf = -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(ssr / n) + 1.0);
    return -2.0 * llf + 2.0 * double(k);
}

} // namespace

int default_adf_max_lag(Eigen::Index n) { return int(std::floor(12.0 * std::pow(double(n) / 100.0, 0.25))); }

int default_kpss_bandwidth(Eigen::Index n) { return int(std::floor(4.0 * std::pow(double(n) / 100.0, 0.25))); }

double mackinnon_p(double tau, AdfRegression regression) {
    // MacKinnon (1994) single-series coefficients, statsmodels layout.
    struct Surface {
        double tau_max, tau_min, tau_star;
        std::array<double, 3> small;
        std::array<double, 4> large;
    };
    static constexpr Surface c{2.74, -18.83, -1.61, {2.1659, 1.4412, 0.038269},
                               {1.7339, 0.93202, -0.12745, -0.010368}};
    static constexpr Surface ct{0.7, -16.18, -2.89, {3.2512, 1.6047, 0.049588},
                                {2.5261, 0.61654, -0.37956, -0.060285}};
    const Surface& s = regression == AdfRegression::Constant ? c : ct;
    if (std::isnan(tau)) return 1.0;
    if (tau > s.tau_max) return 1.0;
    if (tau < s.tau_min) return 0.0;
    double z = 0.0;
    if (tau <= s.tau_star)
        z = s.small[0] + s.small[1] * tau + s.small[2] * tau * tau;
    else
        z = s.large[0] + s.large[1] * tau + s.large[2] * tau * tau + s.large[3] * tau * tau * tau;
    return normal_cdf(z);
}

AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& series, const AdfOptions& opts) {
    const Eigen::VectorXd y = series;
    const auto n = y.size();
    const int max_lag = opts.max_lag.value_or(default_adf_max_lag(n));
    require(max_lag >= 0, ErrorKind::Domain, "ADF max_lag must be >= 0");
    require(n >= max_lag + 10, ErrorKind::Domain,
            "ADF needs at least max_lag + 10 = " + std::to_string(max_lag + 10) + " points, got " + std::to_string(n));
    require(y.allFinite(), ErrorKind::Numeric, "ADF input contains non-finite values");

    int lags = max_lag;
    if (!opts.fixed_lag) {
        // AIC over a common sample, as in the usual autolag procedure.
        double best = std::numeric_limits<double>::infinity();
        int best_lag = -1;
        Eigen::MatrixXd X;
        Eigen::VectorXd t;
        for (int p = 0; p <= max_lag; ++p) {
            adf_design(y, p, max_lag, opts.regression, X, t);
            OlsFit f = ols(X, t);
            if (f.singular) continue;
            const double a = aic(f.ssr, X.rows(), X.cols());
            if (best_lag < 0 || a < best) {
                best = a;
                best_lag = p;
            }
        }
        if (best_lag < 0) fail(ErrorKind::Regression, "ADF design matrix is singular for every lag order");
        lags = best_lag;
    }

    Eigen::MatrixXd X;
    Eigen::VectorXd t;
    adf_design(y, lags, lags, opts.regression, X, t);
    OlsFit f = ols(X, t);
    if (f.singular) fail(ErrorKind::Regression, "ADF design matrix is singular");

    AdfResult r;
    r.lags = lags;
    r.nobs = int(X.rows());
    const double gamma = f.beta[0];
    const double scale = std::max(1.0, t.squaredNorm());
    if (f.ssr <= 1e-26 * scale || f.se0 == 0.0) {
        // Exact fit: no innovations to test against. A zero coefficient means no
        // mean reversion at all.
        if (std::abs(gamma) <= 1e-10)
            r.stat = 0.0;
        else
            r.stat = gamma < 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    } else {
        r.stat = gamma / f.se0;
    }
    r.p = mackinnon_p(r.stat, opts.regression);
    return r;
}

double kpss_p_value(double stat) {
    static constexpr std::array<double, 4> crit{0.347, 0.463, 0.574, 0.739};
    static constexpr std::array<double, 4> pv{0.10, 0.05, 0.025, 0.01};
    if (stat <= crit.front()) return pv.front();
    if (stat >= crit.back()) return pv.back();
    for (std::size_t i = 1; i < crit.size(); ++i)
        if (stat <= crit[i]) {
            const double w = (stat - crit[i - 1]) / (crit[i] - crit[i - 1]);
            return pv[i - 1] + w * (pv[i] - pv[i - 1]);
        }
    return pv.back();
}

KpssResult kpss_test(const Eigen::Ref<const Eigen::VectorXd>& y, int bandwidth) {
    const auto n = y.size();
    require(n >= 10, ErrorKind::Domain, "KPSS needs at least 10 points");
    require(y.allFinite(), ErrorKind::Numeric, "KPSS input contains non-finite values");
    const int bw = bandwidth < 0 ? default_kpss_bandwidth(n) : bandwidth;
    require(bw < n, ErrorKind::Domain, "KPSS bandwidth must be smaller than the series length");

    const Eigen::VectorXd e = y.array() - y.mean();
    double partial = 0.0;
    double eta = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        partial += e[t];
        eta += partial * partial;
    }
    eta /= double(n) * double(n);

    double s2 = e.squaredNorm() / double(n);
    for (int l = 1; l <= bw; ++l) {
        const double w = 1.0 - double(l) / double(bw + 1);
        s2 += 2.0 * w * e.tail(n - l).dot(e.head(n - l)) / double(n);
    }
    const double scale = std::max(1.0, y.squaredNorm() / double(n));
    if (!(s2 > 1e-24 * scale)) fail(ErrorKind::Degenerate, "KPSS long-run variance is zero");

    KpssResult r;
    r.bandwidth = bw;
    r.stat = eta / s2;
    r.p = kpss_p_value(r.stat);
    return r;
}

Verdict classify(double adf_p, double kpss_p) {
    const bool adf_pass = adf_p < 0.05;
    const bool kpss_pass = kpss_p > 0.05;
    if (adf_pass && kpss_pass) return Verdict::Stationary;
    if (!adf_pass && !kpss_pass) return Verdict::UnitRoot;
    return adf_pass ? Verdict::ConflictPersistent : Verdict::ConflictInertial;
}

const char* verdict_label(Verdict v) {
    switch (v) {
    case Verdict::Stationary: return "Stationary (Both PASS)";
    case Verdict::UnitRoot: return "Unit Root (Both FAIL)";
    case Verdict::ConflictPersistent: return "Persistent Drift (Conflict)";
    case Verdict::ConflictInertial: return "Inertial (Conflict)";
    }
    return "";
}

StationarityReport stationarity_report(const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& y,
                                       const AdfOptions& adf, int kpss_bandwidth) {
    StationarityReport r;
    r.series = name;
    const AdfResult a = adf_test(y, adf);
    const KpssResult k = kpss_test(y, kpss_bandwidth);
    r.adf_stat = a.stat;
    r.adf_p = a.p;
    r.kpss_stat = k.stat;
    r.kpss_p = k.p;
    r.verdict = classify(a.p, k.p);
    return r;
}

void write_stationarity_csv(std::ostream& out, const std::vector<StationarityReport>& rows) {
    out << "country,adf_stat,adf_p,kpss_stat,kpss_p,interpretation\n";
    for (const auto& r : rows)
        out << r.series << ',' << io::format_double(r.adf_stat) << ',' << io::format_double(r.adf_p) << ','
            << io::format_double(r.kpss_stat) << ',' << io::format_double(r.kpss_p) << ',' << verdict_label(r.verdict)
            << '\n';
}

} // namespace hlift
