#include "hlift/harness.hpp"

#include "hlift/error.hpp"
#include "hlift/io.hpp"
#include "hlift/log.hpp"
#include "hlift/rng.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace hlift {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double rmse(const VectorXd& actual, const VectorXd& predicted) {
    require(actual.size() == predicted.size() && actual.size() >= 1, ErrorKind::Shape,
            "RMSE needs equally sized, non-empty vectors");
    return std::sqrt((actual - predicted).squaredNorm() / double(actual.size()));
}

double improvement_pct(double rmse_lilee, double rmse_hybrid) {
    if (rmse_lilee == 0.0) return rmse_hybrid == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return (rmse_lilee - rmse_hybrid) / rmse_lilee * 100.0;
}

namespace {

void check_split(const FactorPanel& levels, int split_year) {
    levels.validate();
    const Index r = levels.row_of(split_year);
    require(r >= 1, ErrorKind::Domain, "split year " + std::to_string(split_year) + " is not inside the panel");
    require(r < levels.n_years() - 1, ErrorKind::Domain, "split year leaves no validation years");
}

} // namespace

LinearBaseline fit_linear_baseline(const FactorPanel& levels, int split_year) {
    check_split(levels, split_year);
    LinearBaseline b;
    b.model = LinearForecaster::fit(levels.slice(levels.years.front(), split_year));
    const Index first = levels.row_of(split_year) + 1;
    VectorXd sum = VectorXd::Zero(levels.n_factors());
    for (Index t = first; t < levels.n_years(); ++t) {
        const VectorXd prev = levels.values.row(t - 1).transpose();
        sum += levels.values.row(t).transpose() - prev - b.model.expected_step(prev);
    }
    b.mbc = sum / double(levels.n_years() - first);
    return b;
}

FactorPanel linear_validation_forecast(const LinearBaseline& b, const FactorPanel& levels, int split_year,
                                       ValidationMode mode, bool apply_mbc) {
    check_split(levels, split_year);
    const FactorPanel history = levels.slice(levels.years.front(), split_year);
    const int horizon = levels.years.back() - split_year;
    const VectorXd* bias = apply_mbc ? &b.mbc : nullptr;
    if (mode == ValidationMode::Recursive) return b.model.forecast_central(history, horizon, bias);

    FactorPanel out = levels.slice(split_year + 1, levels.years.back());
    for (Index h = 0; h < out.n_years(); ++h) {
        const VectorXd prev = levels.values.row(levels.row_of(out.years[std::size_t(h)]) - 1).transpose();
        VectorXd step = b.model.expected_step(prev);
        if (bias) step += *bias;
        out.values.row(h) = (prev + step).transpose();
    }
    return out;
}

FactorPanel hybrid_validation_forecast(const HybridModel& m, const FactorPanel& levels, int split_year,
                                       ValidationMode mode) {
    check_split(levels, split_year);
    const FactorPanel history = levels.slice(levels.years.front(), split_year);
    const int horizon = levels.years.back() - split_year;
    if (mode == ValidationMode::Recursive)
        return forecast_deterministic(m, history, horizon).slice(split_year + 1, levels.years.back());

    FactorPanel out = levels.slice(split_year + 1, levels.years.back());
    for (Index h = 0; h < out.n_years(); ++h) {
        const Index row = levels.row_of(out.years[std::size_t(h)]);
        out.values.row(h) = predict_next_level(m, levels.values.topRows(row), nullptr).transpose();
    }
    return out;
}

ValidationResult validate(const FactorPanel& levels, const std::vector<std::string>& countries,
                          const HybridModel& model, const ValidationConfig& cfg) {
    const int split = cfg.hybrid.split_year;
    require(Index(countries.size()) + 1 == levels.n_factors(), ErrorKind::Shape,
            "panel must have one specific factor per country");
    ValidationResult r;
    r.linear = fit_linear_baseline(levels, split);
    r.actual = levels.slice(split + 1, levels.years.back());
    r.lilee = linear_validation_forecast(r.linear, levels, split, cfg.mode);
    r.hybrid = hybrid_validation_forecast(model, levels, split, cfg.mode);

    auto row = [&](const std::string& name, Index col) {
        BenchmarkRow b;
        b.country = name;
        b.rmse_lilee = rmse(r.actual.values.col(col), r.lilee.values.col(col));
        b.rmse_hybrid = rmse(r.actual.values.col(col), r.hybrid.values.col(col));
        b.improvement_pct = improvement_pct(b.rmse_lilee, b.rmse_hybrid);
        return b;
    };
    if (cfg.target == RmseTarget::CommonFactor)
        r.rows.push_back(row("K", 0));
    else
        for (std::size_t i = 0; i < countries.size(); ++i) r.rows.push_back(row(countries[i], Index(i) + 1));
    return r;
}

ValidationResult validate(const FactorPanel& levels, const std::vector<std::string>& countries,
                          const ValidationConfig& cfg, HybridFit* fit_out) {
    HybridFit fit = fit_hybrid(levels, cfg.hybrid);
    ValidationResult r = validate(levels, countries, fit.model, cfg);
    if (fit_out) *fit_out = std::move(fit);
    return r;
}

std::vector<AblationRow> ablate(const FactorPanel& levels, const ValidationConfig& cfg,
                                const HybridModel* trained_baseline) {
    const int split = cfg.hybrid.split_year;
    const FactorPanel actual = levels.slice(split + 1, levels.years.back());
    auto k_rmse = [&](const HybridModel& m) {
        return rmse(actual.values.col(0), hybrid_validation_forecast(m, levels, split, cfg.mode).values.col(0));
    };

    HybridModel base;
    if (trained_baseline) {
        base = *trained_baseline;
    } else {
        HybridFitOptions o = cfg.hybrid;
        o.representation = Representation::Differences;
        base = fit_hybrid(levels, o).model;
    }
    HybridModel no_mbc = base;
    no_mbc.mbc.setZero();
    HybridFitOptions lv = cfg.hybrid;
    lv.representation = Representation::Levels;
    const HybridModel levels_model = fit_hybrid(levels, lv).model;

    const double rb = k_rmse(base);
    auto degradation = [&](double r) {
        if (rb == 0.0) return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return (r - rb) / rb * 100.0;
    };
    std::vector<AblationRow> rows;
    rows.push_back({"baseline", rb, 0.0});
    const double rl = k_rmse(levels_model);
    rows.push_back({"no_differences", rl, degradation(rl)});
    const double rn = k_rmse(no_mbc);
    rows.push_back({"no_mbc", rn, degradation(rn)});
    return rows;
}

std::vector<LookbackRow> lookback_sweep(const FactorPanel& levels, const ValidationConfig& cfg,
                                        const std::vector<int>& lookbacks) {
    const int split = cfg.hybrid.split_year;
    const FactorPanel actual = levels.slice(split + 1, levels.years.back());
    std::vector<LookbackRow> rows;
    for (int L : lookbacks) {
        HybridFitOptions o = cfg.hybrid;
        o.lookback = L;
        HybridFit fit;
        try {
            fit = fit_hybrid(levels, o);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Insufficient) throw;
            log::info("lookback ", L, " skipped: ", e.what());
            continue;
        }
        const FactorPanel pred = hybrid_validation_forecast(fit.model, levels, split, cfg.mode);
        LookbackRow r;
        r.lookback = L;
        r.n_train = fit.n_train;
        r.n_validation = fit.n_validation;
        r.rmse_common = rmse(actual.values.col(0), pred.values.col(0));
        if (levels.n_factors() > 1) {
            const Index n = actual.n_years() * (levels.n_factors() - 1);
            const MatrixXd a = actual.values.rightCols(levels.n_factors() - 1);
            const MatrixXd p = pred.values.rightCols(levels.n_factors() - 1);
            r.rmse_specific = rmse(Eigen::Map<const VectorXd>(a.data(), n), Eigen::Map<const VectorXd>(p.data(), n));
        }
        rows.push_back(r);
    }
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "country,rmse_lilee,rmse_hybrid,improvement_pct\n";
    for (const auto& r : rows)
        out << r.country << ',' << io::format_double(r.rmse_lilee) << ',' << io::format_double(r.rmse_hybrid) << ','
            << io::format_double(r.improvement_pct) << '\n';
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "variant,rmse_K,degradation_pct\n";
    for (const auto& r : rows)
        out << r.variant << ',' << io::format_double(r.rmse) << ',' << io::format_double(r.degradation_pct) << '\n';
}

void write_lookback_csv(std::ostream& out, const std::vector<LookbackRow>& rows) {
    out << "lookback,n_train,n_validation,rmse_K,rmse_specific\n";
    for (const auto& r : rows)
        out << r.lookback << ',' << r.n_train << ',' << r.n_validation << ',' << io::format_double(r.rmse_common)
            << ',' << io::format_double(r.rmse_specific) << '\n';
}

void write_validation_paths_csv(std::ostream& out, const ValidationResult& r, const std::vector<std::string>& names) {
    out << "year,factor,actual,lilee,hybrid\n";
    for (Index t = 0; t < r.actual.n_years(); ++t)
        for (Index j = 0; j < r.actual.n_factors(); ++j)
            out << r.actual.years[std::size_t(t)] << ',' << names[std::size_t(j)] << ','
                << io::format_double(r.actual.values(t, j)) << ',' << io::format_double(r.lilee.values(t, j)) << ','
                << io::format_double(r.hybrid.values(t, j)) << '\n';
}

ClusterDataset regime_cluster(SpecificRegime regime, std::uint64_t seed, int n_countries, double noise_sd) {
    SynthSpec spec;
    require(n_countries >= 2 && n_countries <= int(spec.countries.size()), ErrorKind::Domain,
            "regime cluster supports 2.." + std::to_string(spec.countries.size()) + " countries");
    spec.countries.resize(std::size_t(n_countries));
    spec.regimes.assign(std::size_t(n_countries), regime);
    spec.seed = seed;
    return synthesize_cluster(reference_truth(spec), noise_sd, derive_seed(seed, streams::synth));
}

} // namespace hlift
