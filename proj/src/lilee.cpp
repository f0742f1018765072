#include "hlift/lilee.hpp"

#include "hlift/error.hpp"
#include "hlift/io.hpp"
#include "hlift/log.hpp"
#include "hlift/rng.hpp"

#include <cmath>
#include <random>

namespace hlift {

// ---- FactorPanel / LiLeeParams ------------------------------------------------

Eigen::Index FactorPanel::row_of(int year) const {
    if (years.empty()) return -1;
    const Eigen::Index r = year - years.front();
    return (r >= 0 && r < Eigen::Index(years.size())) ? r : -1;
}

FactorPanel FactorPanel::slice(int first, int last) const {
    const Eigen::Index r0 = row_of(first);
    const Eigen::Index r1 = row_of(last);
    require(r0 >= 0 && r1 >= r0, ErrorKind::Domain,
            "year slice [" + std::to_string(first) + ", " + std::to_string(last) + "] outside panel");
    FactorPanel out;
    out.years.assign(years.begin() + r0, years.begin() + r1 + 1);
    out.values = values.middleRows(r0, r1 - r0 + 1);
    return out;
}

FactorPanel FactorPanel::concat(const FactorPanel& tail) const {
    if (tail.years.empty()) return *this;
    require(tail.n_factors() == n_factors(), ErrorKind::Shape, "factor count mismatch in concat");
    require(years.empty() || tail.years.front() == years.back() + 1, ErrorKind::Shape,
            "concatenated panel years are not contiguous");
    FactorPanel out;
    out.years = years;
    out.years.insert(out.years.end(), tail.years.begin(), tail.years.end());
    out.values.resize(values.rows() + tail.values.rows(), tail.n_factors());
    out.values << values, tail.values;
    return out;
}

void FactorPanel::validate() const {
    require(Eigen::Index(years.size()) == values.rows(), ErrorKind::Shape, "panel years/rows mismatch");
    for (std::size_t t = 1; t < years.size(); ++t)
        require(years[t] == years[t - 1] + 1, ErrorKind::Shape, "panel years must be contiguous");
}

void LiLeeParams::validate() const {
    const auto X = Eigen::Index(ages.size());
    const auto T = Eigen::Index(years.size());
    const auto N = Eigen::Index(countries.size());
    require(X >= 1 && T >= 1 && N >= 1, ErrorKind::Shape, "empty parameter set");
    require(alpha.rows() == X && alpha.cols() == N, ErrorKind::Shape, "alpha must be ages x countries");
    require(B.size() == X, ErrorKind::Shape, "B must have one entry per age");
    require(K.size() == T, ErrorKind::Shape, "K must have one entry per year");
    require(b.rows() == X && b.cols() == N, ErrorKind::Shape, "b must be ages x countries");
    require(k.rows() == T && k.cols() == N, ErrorKind::Shape, "k must be years x countries");
    for (Eigen::Index t = 1; t < T; ++t)
        require(years[t] == years[t - 1] + 1, ErrorKind::Shape, "years must be contiguous");
}

FactorPanel LiLeeParams::factors() const {
    FactorPanel p;
    p.years = years;
    p.values.resize(n_years(), n_countries() + 1);
    p.values.col(0) = K;
    p.values.rightCols(n_countries()) = k;
    return p;
}

Eigen::MatrixXd LiLeeParams::fitted_log_rates(Eigen::Index i) const {
    Eigen::MatrixXd y = B * K.transpose() + b.col(i) * k.col(i).transpose();
    y.colwise() += alpha.col(i);
    return y;
}

Eigen::Index LiLeeParams::country_index(const std::string& code) const {
    for (std::size_t i = 0; i < countries.size(); ++i)
        if (countries[i] == code) return Eigen::Index(i);
    fail(ErrorKind::Domain, "unknown country '" + code + "'");
}

// ---- truncated SVD ------------------------------------------------------------

SingularPair leading_singular_pair(const Eigen::MatrixXd& M, const PowerIterationOptions& opts) {
    require(M.size() > 0, ErrorKind::Rank, "empty matrix has no singular pair");
    require(M.allFinite(), ErrorKind::Numeric, "matrix contains non-finite values");
    if (M.norm() == 0.0) fail(ErrorKind::Rank, "zero matrix has no leading singular pair");

    const Eigen::MatrixXd G = M.transpose() * M;

    // Start from G e_j for the heaviest column j: never orthogonal to the leading
    // right vector unless its j-th entry vanishes.
    Eigen::Index j = 0;
    M.colwise().squaredNorm().maxCoeff(&j);
    Eigen::VectorXd v = G.col(j);
    v.normalize();

    double delta = 0.0;
    int it = 0;
    bool converged = false;
    for (it = 1; it <= opts.max_iterations; ++it) {
        Eigen::VectorXd w = G * v;
        const double nw = w.norm();
        if (nw == 0.0) fail(ErrorKind::Rank, "power iteration collapsed to zero");
        w /= nw;
        delta = (w - v).norm();
        v = std::move(w);
        if (delta <= opts.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        fail(ErrorKind::Convergence, "power iteration did not converge in " + std::to_string(opts.max_iterations) +
                                         " iterations (last delta " + std::to_string(delta) + ")");

    SingularPair out;
    out.u = M * v;
    out.s = out.u.norm();
    out.u /= out.s;
    out.v = std::move(v);
    out.iterations = it;
    if (out.u.sum() < 0.0) {
        out.u = -out.u;
        out.v = -out.v;
    }
    return out;
}

// ---- Li-Lee fit ---------------------------------------------------------------

namespace {

struct Rank1 {
    Eigen::VectorXd loading; // sums to one
    Eigen::VectorXd index;   // sums to zero when the input rows are centred
    bool negligible = false;
};

// Rank-1 factor of M under the sum(loading) = 1 convention. Matrices that are zero
// relative to `reference` carry no signal and map to a uniform loading with a zero index.
Rank1 normalized_rank1(const Eigen::MatrixXd& M, double reference, const std::string& what) {
    Rank1 r;
    if (M.norm() <= 1e-10 * std::max(reference, 1e-300)) {
        r.loading = Eigen::VectorXd::Constant(M.rows(), 1.0 / double(M.rows()));
        r.index = Eigen::VectorXd::Zero(M.cols());
        r.negligible = true;
        return r;
    }
    const SingularPair sp = leading_singular_pair(M);
    const double su = sp.u.sum();
    if (std::abs(su) <= 1e-10 * sp.u.lpNorm<1>())
        fail(ErrorKind::Rank, what + ": age loadings sum to zero, cannot normalise");
    r.loading = sp.u / su;
    r.index = sp.s * su * sp.v;
    return r;
}

} // namespace

LiLeeFit fit_lilee(const ClusterDataset& data) {
    const auto N = Eigen::Index(data.size());
    const auto X = Eigen::Index(data.ages().size());
    const auto T = Eigen::Index(data.years().size());
    require(T >= 3, ErrorKind::Domain, "Li-Lee fit needs at least 3 years");
    require(X >= 2, ErrorKind::Domain, "Li-Lee fit needs at least 2 ages");

    LiLeeFit fit;
    LiLeeParams& p = fit.params;
    p.countries = data.countries();
    p.ages = data.ages();
    p.years = data.years();
    p.alpha.resize(X, N);
    p.b.resize(X, N);
    p.k.resize(T, N);

    std::vector<Eigen::MatrixXd> centred(N);
    Eigen::MatrixXd mean_surface = Eigen::MatrixXd::Zero(X, T);
    double reference = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::MatrixXd& y = data[std::size_t(i)].log_m;
        p.alpha.col(i) = y.rowwise().mean();
        centred[i] = y.colwise() - p.alpha.col(i);
        mean_surface += centred[i];
        reference = std::max(reference, y.norm());
    }
    mean_surface /= double(N);

    // Step 1: common factor.
    Rank1 common = normalized_rank1(mean_surface, reference, "common factor");
    if (common.negligible) log::warn("cluster surface is constant in time; common index is identically zero");
    p.B = common.loading;
    p.K = common.index.array() - common.index.mean();

    // Step 2: country-specific factors on what the common factor leaves.
    fit.residuals.resize(N);
    const Eigen::MatrixXd common_part = p.B * p.K.transpose();
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::MatrixXd R = centred[i] - common_part;
        Rank1 spec = normalized_rank1(R, reference, p.countries[i] + " specific factor");
        p.b.col(i) = spec.loading;
        p.k.col(i) = spec.index.array() - spec.index.mean();
        fit.residuals[i] = R - p.b.col(i) * p.k.col(i).transpose();
    }
    return fit;
}

// ---- linear benchmark ---------------------------------------------------------

RwdFit fit_rwd(const Eigen::Ref<const Eigen::VectorXd>& series) {
    const auto n = series.size();
    require(n >= 3, ErrorKind::Domain, "random walk fit needs at least 3 points");
    const Eigen::VectorXd d = series.tail(n - 1) - series.head(n - 1);
    RwdFit f;
    f.drift = d.mean();
    f.sigma = std::sqrt((d.array() - f.drift).square().sum() / double(d.size() - 1));
    return f;
}

Ar1Fit fit_ar1(const Eigen::Ref<const Eigen::VectorXd>& series) {
    const auto n = series.size();
    require(n >= 3, ErrorKind::Domain, "AR(1) fit needs at least 3 points");
    const auto x = series.head(n - 1);
    const auto y = series.tail(n - 1);
    const double sxx = x.squaredNorm();
    if (sxx == 0.0) fail(ErrorKind::Degenerate, "AR(1) regressor has zero variance");
    Ar1Fit f;
    f.phi = x.dot(y) / sxx;
    const double ssr = (y - f.phi * x).squaredNorm();
    f.xi_sd = std::sqrt(ssr / double(n - 2));
    return f;
}

LinearForecaster LinearForecaster::fit(const FactorPanel& panel) {
    panel.validate();
    require(panel.n_factors() >= 1, ErrorKind::Shape, "panel has no factors");
    LinearForecaster lf;
    lf.common = fit_rwd(panel.values.col(0));
    for (Eigen::Index j = 1; j < panel.n_factors(); ++j) lf.specific.push_back(fit_ar1(panel.values.col(j)));
    return lf;
}

Eigen::VectorXd LinearForecaster::expected_step(const Eigen::VectorXd& prev) const {
    require(prev.size() == Eigen::Index(specific.size()) + 1, ErrorKind::Shape, "level vector size mismatch");
    Eigen::VectorXd step(prev.size());
    step[0] = common.drift;
    for (std::size_t i = 0; i < specific.size(); ++i) step[Eigen::Index(i) + 1] = (specific[i].phi - 1.0) * prev[Eigen::Index(i) + 1];
    return step;
}

Eigen::VectorXd LinearForecaster::innovation_sd() const {
    Eigen::VectorXd sd(Eigen::Index(specific.size()) + 1);
    sd[0] = common.sigma;
    for (std::size_t i = 0; i < specific.size(); ++i) sd[Eigen::Index(i) + 1] = specific[i].xi_sd;
    return sd;
}

FactorPanel LinearForecaster::forecast_central(const FactorPanel& history, int horizon,
                                               const Eigen::VectorXd* step_bias) const {
    require(history.n_years() >= 1, ErrorKind::Insufficient, "empty history");
    require(horizon >= 0, ErrorKind::Domain, "negative horizon");
    FactorPanel out;
    out.values.resize(horizon, history.n_factors());
    Eigen::VectorXd level = history.values.bottomRows(1).transpose();
    for (int h = 0; h < horizon; ++h) {
        Eigen::VectorXd step = expected_step(level);
        if (step_bias) step += *step_bias;
        level += step;
        out.values.row(h) = level.transpose();
        out.years.push_back(history.years.back() + h + 1);
    }
    return out;
}

std::vector<Eigen::MatrixXd> LinearForecaster::forecast_stochastic(const FactorPanel& history, int horizon,
                                                                   int n_sims, std::uint64_t seed) const {
    require(n_sims >= 1, ErrorKind::Domain, "need at least one simulation");
    require(horizon >= 0, ErrorKind::Domain, "negative horizon");
    const Eigen::VectorXd sd = innovation_sd();
    const Eigen::VectorXd origin = history.values.bottomRows(1).transpose();
    std::vector<Eigen::MatrixXd> paths(static_cast<std::size_t>(n_sims));
    for (int s = 0; s < n_sims; ++s) {
        Rng rng(derive_seed(seed, std::uint64_t(s)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd& path = paths[std::size_t(s)];
        path.resize(horizon, origin.size());
        Eigen::VectorXd level = origin;
        for (int h = 0; h < horizon; ++h) {
            Eigen::VectorXd step = expected_step(level);
            for (Eigen::Index j = 0; j < step.size(); ++j) step[j] += sd[j] * gauss(rng);
            level += step;
            path.row(h) = level.transpose();
        }
    }
    return paths;
}

// ---- serialization ------------------------------------------------------------

void write_params_json(std::ostream& out, const LiLeeParams& p) {
    p.validate();
    io::json j;
    j["format"] = "hlift.lilee_params";
    j["version"] = 1;
    j["countries"] = p.countries;
    j["ages"] = p.ages;
    j["years"] = p.years;
    j["alpha"] = io::matrix_to_json(p.alpha);
    j["B"] = io::vector_to_json(p.B);
    j["K"] = io::vector_to_json(p.K);
    j["b"] = io::matrix_to_json(p.b);
    j["k"] = io::matrix_to_json(p.k);
    out << j.dump(2) << '\n';
}

LiLeeParams read_params_json(std::istream& in) {
    io::json j;
    try {
        j = io::json::parse(in);
    } catch (const io::json::exception& e) {
        fail(ErrorKind::Parse, std::string("params JSON: ") + e.what());
    }
    require(j.value("format", "") == "hlift.lilee_params", ErrorKind::Parse, "not a Li-Lee params document");
    require(j.value("version", 0) == 1, ErrorKind::Parse, "unsupported params version");
    LiLeeParams p;
    try {
        p.countries = j.at("countries").get<std::vector<std::string>>();
        p.ages = j.at("ages").get<std::vector<int>>();
        p.years = j.at("years").get<std::vector<int>>();
        const auto X = Eigen::Index(p.ages.size());
        const auto T = Eigen::Index(p.years.size());
        const auto N = Eigen::Index(p.countries.size());
        p.alpha = io::matrix_from_json(j.at("alpha"), X, N);
        p.B = io::vector_from_json(j.at("B"), X);
        p.K = io::vector_from_json(j.at("K"), T);
        p.b = io::matrix_from_json(j.at("b"), X, N);
        p.k = io::matrix_from_json(j.at("k"), T, N);
    } catch (const io::json::exception& e) {
        fail(ErrorKind::Shape, std::string("params JSON: ") + e.what());
    }
    p.validate();
    return p;
}

} // namespace hlift
