#include "hlift/hybrid.hpp"

#include "hlift/error.hpp"
#include "hlift/log.hpp"
#include "hlift/rng.hpp"
#include "hlift/risk.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>

namespace hlift {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void HybridModel::validate() const {
    net.validate();
    const Index F = n_features();
    require(F >= 1 && scaler.sd.size() == F, ErrorKind::Shape, "scaler mean/sd sizes differ");
    require(net.input_size() == F && net.output_size() == F, ErrorKind::Shape,
            "network width does not match the scaler");
    require(mbc.size() == F, ErrorKind::Shape, "MBC vector must have one entry per factor");
    require(mbc.allFinite(), ErrorKind::Numeric, "MBC vector is not finite");
    require(lookback >= 1, ErrorKind::Domain, "lookback must be >= 1");
}

VectorXd compute_mbc(const NetworkParams& net, const WindowedDataset& validation) {
    require(validation.size() >= 1, ErrorKind::Domain, "MBC needs at least one validation sample");
    VectorXd sum = VectorXd::Zero(validation.n_features());
    for (Index s = 0; s < validation.size(); ++s)
        sum += validation.Y.row(s).transpose() - forward(net, validation.X[std::size_t(s)]);
    return sum / double(validation.size());
}

DiffPanel model_rows(const FactorPanel& levels, Representation rep) {
    if (rep == Representation::Differences) return difference(levels);
    levels.validate();
    return DiffPanel{levels.years, levels.values};
}

HybridFit fit_hybrid(const FactorPanel& levels, const HybridFitOptions& opts) {
    require(opts.lookback >= 1, ErrorKind::Domain, "lookback must be >= 1");
    const DiffPanel rows = model_rows(levels, opts.representation);
    const ScalerParams scaler = fit_scaler(rows, opts.split_year);
    const WindowedDataset windows = make_windows(apply_scaler(rows, scaler), opts.lookback);
    TrainValSplit split = split_by_year(windows, opts.split_year);
    require(split.train.size() >= 1, ErrorKind::Insufficient,
            "no training windows with target year <= " + std::to_string(opts.split_year));
    require(split.validation.size() >= 1, ErrorKind::Insufficient,
            "no validation windows after " + std::to_string(opts.split_year));

    Architecture arch{rows.n_features(), opts.hidden, rows.n_features(), opts.dropout_rate};
    TrainResult trained = train(arch, split.train, split.validation, opts.train);

    HybridFit fit;
    fit.model.net = std::move(trained.params);
    fit.model.scaler = scaler;
    fit.model.lookback = opts.lookback;
    fit.model.representation = opts.representation;
    fit.model.mbc = compute_mbc(fit.model.net, split.validation);
    fit.trace = std::move(trained.trace);
    fit.n_train = split.train.size();
    fit.n_validation = split.validation.size();
    return fit;
}

namespace {

Index min_history(const HybridModel& m) {
    return m.representation == Representation::Differences ? m.lookback + 1 : m.lookback;
}

MatrixXd scaled_window(const HybridModel& model, const MatrixXd& hist) {
    const Index L = model.lookback;
    const Index T = hist.rows();
    if (model.representation == Representation::Differences) {
        const MatrixXd tail = hist.bottomRows(L + 1);
        return model.scaler.transform_rows(tail.bottomRows(L) - tail.topRows(L));
    }
    return model.scaler.transform_rows(hist.middleRows(T - L, L));
}

// Drops the oldest row and appends `next`.
void roll(MatrixXd& hist, const VectorXd& next) {
    const Index T = hist.rows();
    if (T > 1) hist.topRows(T - 1) = hist.bottomRows(T - 1).eval();
    hist.row(T - 1) = next.transpose();
}

} // namespace

VectorXd predict_next_level(const HybridModel& model, const MatrixXd& level_history, const MatrixXd* mask) {
    require(level_history.rows() >= min_history(model), ErrorKind::Insufficient,
            "history has " + std::to_string(level_history.rows()) + " levels, the model needs " +
                std::to_string(min_history(model)));
    require(level_history.cols() == model.n_features(), ErrorKind::Shape, "history width differs from the model");
    const MatrixXd window = scaled_window(model, level_history);
    const VectorXd raw = mask ? forward(model.net, window, *mask) : forward(model.net, window);
    const VectorXd out = model.scaler.inverse(raw + model.mbc);
    if (model.representation == Representation::Differences)
        return level_history.row(level_history.rows() - 1).transpose() + out;
    return out;
}

FactorPanel forecast_deterministic(const HybridModel& model, const FactorPanel& history, int horizon) {
    model.validate();
    history.validate();
    require(horizon >= 0, ErrorKind::Domain, "horizon must be >= 0");
    require(history.n_years() >= min_history(model), ErrorKind::Insufficient,
            "history has " + std::to_string(history.n_years()) + " years, the model needs " +
                std::to_string(min_history(model)));
    if (horizon == 0) return history;

    MatrixXd hist = history.values.bottomRows(min_history(model));
    FactorPanel ext;
    ext.values.resize(horizon, history.n_factors());
    for (int h = 0; h < horizon; ++h) {
        const VectorXd next = predict_next_level(model, hist, nullptr);
        ext.years.push_back(history.years.back() + h + 1);
        ext.values.row(h) = next.transpose();
        roll(hist, next);
    }
    return history.concat(ext);
}

VectorXd historical_diff_sd(const FactorPanel& levels) {
    const DiffPanel d = difference(levels);
    require(d.n_rows() >= 2, ErrorKind::Insufficient, "need at least three levels for a difference sd");
    const VectorXd mean = d.V.colwise().mean();
    return ((d.V.rowwise() - mean.transpose()).colwise().squaredNorm() / double(d.n_rows() - 1)).cwiseSqrt();
}

VectorXd ForecastEnsemble::cell(int h, Index factor) const {
    require(h >= 0 && h <= horizon(), ErrorKind::Domain, "horizon out of range");
    require(factor >= 0 && factor < n_features(), ErrorKind::Domain, "factor out of range");
    VectorXd v(n_paths());
    for (int s = 0; s < n_paths(); ++s) v[s] = paths[std::size_t(s)](h, factor);
    return v;
}

ForecastEnsemble forecast_stochastic(const HybridModel& model, const FactorPanel& history, int horizon,
                                     const VectorXd& sigma, const StochasticOptions& opts) {
    model.validate();
    history.validate();
    require(horizon >= 0, ErrorKind::Domain, "horizon must be >= 0");
    require(opts.n_paths >= 1, ErrorKind::Domain, "need at least one path");
    require(sigma.size() == model.n_features(), ErrorKind::Shape, "sigma must have one entry per factor");
    require(sigma.allFinite() && (sigma.array() >= 0.0).all(), ErrorKind::Domain, "sigma must be finite and >= 0");
    require(history.n_years() >= min_history(model), ErrorKind::Insufficient,
            "history too short for the model lookback");

    ForecastEnsemble ens;
    ens.origin_year = history.years.back();
    ens.seed = opts.seed;
    ens.sigma = sigma;
    ens.paths.resize(std::size_t(opts.n_paths));
    const MatrixXd start = history.values.bottomRows(min_history(model));
    const Index F = model.n_features();
    const Index H0 = model.net.layers.front().hidden_size();
    const bool use_dropout = opts.dropout && model.net.dropout_rate > 0.0;

    for (int s = 0; s < opts.n_paths; ++s) {
        Rng rng(derive_seed(opts.seed, std::uint64_t(s)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        MatrixXd& path = ens.paths[std::size_t(s)];
        path.resize(horizon + 1, F);
        path.row(0) = start.row(start.rows() - 1);
        MatrixXd hist = start;
        for (int h = 1; h <= horizon; ++h) {
            MatrixXd mask;
            if (use_dropout) mask = sample_dropout_mask(model.lookback, H0, model.net.dropout_rate, rng);
            VectorXd next = predict_next_level(model, hist, use_dropout ? &mask : nullptr);
            for (Index j = 0; j < F; ++j) {
                const double z = gauss(rng);
                if (sigma[j] > 0.0) next[j] += sigma[j] * z;
            }
            path.row(h) = next.transpose();
            roll(hist, next);
        }
    }
    return ens;
}

QuantileBands ensemble_quantiles(const ForecastEnsemble& ens, const std::vector<double>& levels) {
    require(ens.n_paths() >= 2, ErrorKind::Domain, "quantile bands need at least two paths");
    QuantileBands b;
    b.levels = levels;
    const int H = ens.horizon();
    const Index F = ens.n_features();
    for (int h = 0; h <= H; ++h) b.years.push_back(ens.origin_year + h);
    b.mean.resize(H + 1, F);
    b.values.assign(levels.size(), MatrixXd(H + 1, F));
    for (int h = 0; h <= H; ++h)
        for (Index j = 0; j < F; ++j) {
            const VectorXd c = ens.cell(h, j);
            b.mean(h, j) = c.mean();
            for (std::size_t q = 0; q < levels.size(); ++q) b.values[q](h, j) = quantile(c, levels[q]);
        }
    return b;
}

void write_ensemble_csv(std::ostream& out, const ForecastEnsemble& ens, const std::vector<std::string>& names) {
    require(Index(names.size()) == ens.n_features(), ErrorKind::Shape, "one name per factor expected");
    out << "path,horizon,factor,value\n";
    for (int s = 0; s < ens.n_paths(); ++s)
        for (int h = 1; h <= ens.horizon(); ++h)
            for (Index j = 0; j < ens.n_features(); ++j)
                out << s << ',' << h << ',' << names[std::size_t(j)] << ','
                    << io::format_double(ens.paths[std::size_t(s)](h, j)) << '\n';
}

ForecastEnsemble read_ensemble_csv(std::string_view text, const VectorXd& origin, int origin_year,
                                   const std::vector<std::string>& names) {
    require(Index(names.size()) == origin.size(), ErrorKind::Shape, "one name per factor expected");
    std::map<std::string, Index> col;
    for (std::size_t j = 0; j < names.size(); ++j) col[names[j]] = Index(j);
    const auto rows = io::parse_csv(text);
    require(!rows.empty() && rows.front().size() == 4 && rows.front()[0] == "path", ErrorKind::Parse,
            "ensemble CSV header must be path,horizon,factor,value");
    struct Entry {
        int s, h;
        Index j;
        double v;
    };
    std::vector<Entry> entries;
    int S = 0, H = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() == 1 && f[0].empty()) continue;
        require(f.size() == 4, ErrorKind::Parse, "ensemble CSV line " + std::to_string(r + 1) + ": expected 4 fields");
        const auto it = col.find(f[2]);
        require(it != col.end(), ErrorKind::Parse, "ensemble CSV line " + std::to_string(r + 1) + ": unknown factor " + f[2]);
        Entry e{};
        try {
            e = {std::stoi(f[0]), std::stoi(f[1]), it->second, std::stod(f[3])};
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, "ensemble CSV line " + std::to_string(r + 1) + ": malformed number");
        }
        require(e.s >= 0 && e.h >= 1, ErrorKind::Parse, "ensemble CSV line " + std::to_string(r + 1) + ": bad index");
        S = std::max(S, e.s + 1);
        H = std::max(H, e.h);
        entries.push_back(e);
    }
    require(Index(entries.size()) == Index(S) * H * origin.size(), ErrorKind::Structure,
            "ensemble CSV is not a complete path x horizon x factor grid");
    ForecastEnsemble ens;
    ens.origin_year = origin_year;
    ens.paths.assign(std::size_t(S), MatrixXd::Constant(H + 1, origin.size(), std::numeric_limits<double>::quiet_NaN()));
    for (auto& p : ens.paths) p.row(0) = origin.transpose();
    for (const auto& e : entries) ens.paths[std::size_t(e.s)](e.h, e.j) = e.v;
    for (const auto& p : ens.paths)
        require(p.allFinite(), ErrorKind::Structure, "ensemble CSV has missing or duplicate cells");
    return ens;
}

void write_quantiles_csv(std::ostream& out, const QuantileBands& b, const std::vector<std::string>& names) {
    out << "year,factor,mean";
    for (double q : b.levels) out << ",q" << io::format_double(q);
    out << '\n';
    for (std::size_t h = 0; h < b.years.size(); ++h)
        for (std::size_t j = 0; j < names.size(); ++j) {
            out << b.years[h] << ',' << names[j] << ',' << io::format_double(b.mean(Index(h), Index(j)));
            for (const auto& v : b.values) out << ',' << io::format_double(v(Index(h), Index(j)));
            out << '\n';
        }
}

io::json hybrid_model_to_json(const HybridModel& model) {
    model.validate();
    return {{"format", "hlift.hybrid_model"},
            {"version", 1},
            {"lookback", model.lookback},
            {"representation", model.representation == Representation::Differences ? "differences" : "levels"},
            {"scaler", {{"mean", io::vector_to_json(model.scaler.mean)}, {"sd", io::vector_to_json(model.scaler.sd)}}},
            {"mbc", io::vector_to_json(model.mbc)},
            {"network", network_to_json(model.net)}};
}

HybridModel hybrid_model_from_json(const io::json& j) {
    require(j.is_object() && j.value("format", "") == "hlift.hybrid_model", ErrorKind::Parse,
            "not a hybrid model document");
    require(j.value("version", 0) == 1, ErrorKind::Parse, "unsupported hybrid model version");
    HybridModel m;
    try {
        m.lookback = j.at("lookback").get<int>();
        const std::string rep = j.at("representation").get<std::string>();
        require(rep == "differences" || rep == "levels", ErrorKind::Parse, "unknown representation " + rep);
        m.representation = rep == "differences" ? Representation::Differences : Representation::Levels;
        m.net = network_from_json(j.at("network"));
        const Index F = m.net.input_size();
        m.scaler.mean = io::vector_from_json(j.at("scaler").at("mean"), F);
        m.scaler.sd = io::vector_from_json(j.at("scaler").at("sd"), F);
        m.mbc = io::vector_from_json(j.at("mbc"), F);
    } catch (const io::json::exception& e) {
        fail(ErrorKind::Shape, std::string("hybrid model JSON: ") + e.what());
    }
    m.validate();
    return m;
}

std::vector<std::string> factor_names(const std::vector<std::string>& countries) {
    std::vector<std::string> n{"K"};
    for (const auto& c : countries) n.push_back("k_" + c);
    return n;
}

} // namespace hlift
