#include "hlift/actuarial.hpp"

#include "hlift/error.hpp"
#include "hlift/io.hpp"
#include "hlift/log.hpp"
#include "hlift/risk.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace hlift {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd reconstruct_surface(const LiLeeParams& params, Index country, double K) {
    require(country >= 0 && country < params.n_countries(), ErrorKind::Domain, "country index out of range");
    require(std::isfinite(K), ErrorKind::Numeric, "common index value is not finite");
    return (params.alpha.col(country) + params.B * K).array().exp();
}

LifeTable life_table(const VectorXd& m) {
    require(m.size() >= 1, ErrorKind::Domain, "life table needs at least one age");
    require(m.allFinite(), ErrorKind::Domain, "death rates must be finite");
    require((m.array() >= 0.0).all(), ErrorKind::Domain, "death rates must be non-negative");
    LifeTable t;
    t.m = m;
    t.q = m.array() / (1.0 + 0.5 * m.array());
    for (Index x = 0; x < t.q.size(); ++x)
        if (t.q[x] > 1.0) {
            t.q[x] = 1.0;
            t.clamped = true;
        }
    if (t.clamped) log::warn("q_x exceeded 1 (m_x > 2) and was clamped to 1");
    t.p = 1.0 - t.q.array();
    t.l.resize(m.size());
    t.l[0] = 1.0;
    for (Index x = 1; x < m.size(); ++x) t.l[x] = t.l[x - 1] * t.p[x - 1];
    t.e0 = t.l.sum() - 0.5;
    return t;
}

double life_expectancy(const VectorXd& m) { return life_table(m).e0; }

MonotonicityResult monotonicity_check(const VectorXd& m, int first_age, int last_age) {
    require(first_age >= 0 && first_age < last_age, ErrorKind::Domain, "age range must satisfy 0 <= first < last");
    require(Index(last_age) < m.size(), ErrorKind::Domain,
            "rates cover ages 0.." + std::to_string(m.size() - 1) + ", check needs " + std::to_string(last_age));
    MonotonicityResult r;
    for (int x = first_age; x < last_age; ++x)
        if (m[x + 1] < m[x]) {
            r.pass = false;
            r.first_violation = x;
            break;
        }
    return r;
}

MatrixXd e0_paths(const ForecastEnsemble& ens, const LiLeeParams& params, Index country) {
    require(ens.n_paths() >= 1, ErrorKind::Domain, "empty ensemble");
    MatrixXd e0(ens.n_paths(), ens.horizon() + 1);
    for (int s = 0; s < ens.n_paths(); ++s)
        for (int h = 0; h <= ens.horizon(); ++h)
            e0(s, h) = life_expectancy(reconstruct_surface(params, country, ens.paths[std::size_t(s)](h, 0)));
    return e0;
}

LongevityRow longevity_row(const std::string& country, const MatrixXd& e0, double observed_start) {
    require(e0.rows() >= 2 && e0.cols() >= 1, ErrorKind::Domain, "need at least two e0 paths");
    LongevityRow r;
    r.country = country;
    r.e0_start = e0.col(0).mean();
    r.e0_start_observed = observed_start;
    const VectorXd end = e0.col(e0.cols() - 1);
    r.e0_end = end.mean();
    r.ci_low = quantile(end, 0.025);
    r.ci_high = quantile(end, 0.975);
    r.net_gain = r.e0_end - r.e0_start;
    return r;
}

void write_longevity_csv(std::ostream& out, const std::vector<LongevityRow>& rows) {
    out << "country,e0_start,e0_start_observed,e0_end,ci_low,ci_high,net_gain\n";
    for (const auto& r : rows)
        out << r.country << ',' << io::format_double(r.e0_start) << ',' << io::format_double(r.e0_start_observed)
            << ',' << io::format_double(r.e0_end) << ',' << io::format_double(r.ci_low) << ','
            << io::format_double(r.ci_high) << ',' << io::format_double(r.net_gain) << '\n';
}

void write_life_table_csv(std::ostream& out, const LifeTable& t) {
    out << "age,m,q,p,l\n";
    for (Index x = 0; x < t.m.size(); ++x)
        out << x << ',' << io::format_double(t.m[x]) << ',' << io::format_double(t.q[x]) << ','
            << io::format_double(t.p[x]) << ',' << io::format_double(t.l[x]) << '\n';
}

} // namespace hlift
