#include "hlift/cli/commands.hpp"

#include "hlift/actuarial.hpp"
#include "hlift/diagnostics.hpp"
#include "hlift/harness.hpp"
#include "hlift/hybrid.hpp"
#include "hlift/io.hpp"
#include "hlift/lilee.hpp"
#include "hlift/log.hpp"
#include "hlift/risk.hpp"
#include "hlift/xai.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>

namespace hlift::cli {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using io::json;

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Structure:
    case ErrorKind::Data:
    case ErrorKind::Shape:
    case ErrorKind::Io: return 2;
    case ErrorKind::MissingStage: return 3;
    case ErrorKind::Rank:
    case ErrorKind::Degenerate:
    case ErrorKind::Insufficient:
    case ErrorKind::Domain: return 4;
    case ErrorKind::Convergence:
    case ErrorKind::Regression:
    case ErrorKind::Numeric:
    case ErrorKind::Training: return 5;
    }
    return 5;
}

namespace {

// ---- artifacts and manifests --------------------------------------------------

class Stage {
public:
    Stage(const RunConfig& cfg, std::string name) : cfg_(cfg), name_(std::move(name)) {
        fs::create_directories(cfg.output_dir);
        manifest_ = {{"stage", name_}, {"config_hash", cfg.hash}, {"seed", cfg.seed}, {"artifacts", json::object()}};
    }

    fs::path path(const std::string& file) const { return cfg_.output_dir / file; }

    void text(const std::string& file, const std::string& body) {
        io::write_text_file(path(file), body);
        record(file, body);
    }
    void gzip(const std::string& file, const std::string& body) {
        io::write_gzip_file(path(file), body);
        record(file, body);
    }
    void json_file(const std::string& file, json j) {
        j["config_hash"] = cfg_.hash;
        text(file, j.dump(2) + "\n");
    }
    json& manifest() { return manifest_; }

    void finish() {
        io::write_json_file(path(name_ + "_manifest.json"), manifest_);
        log::info(name_, ": wrote ", manifest_["artifacts"].size(), " artifacts to ", cfg_.output_dir.string());
    }

private:
    void record(const std::string& file, const std::string& body) {
        manifest_["artifacts"][file] = io::fnv1a_hex(body);
    }

    const RunConfig& cfg_;
    std::string name_;
    json manifest_;
};

/// Upstream manifest after checking that it exists, matches this config, and
/// that its artifacts are unchanged.
json require_stage(const RunConfig& cfg, const std::string& stage) {
    const fs::path mpath = cfg.output_dir / (stage + "_manifest.json");
    if (!fs::exists(mpath))
        fail(ErrorKind::MissingStage, "stage '" + stage + "' has not been run (missing " + mpath.string() + ")");
    const json m = io::read_json_file(mpath);
    const std::string hash = m.value("config_hash", "");
    if (hash != cfg.hash)
        fail(ErrorKind::MissingStage, "stage '" + stage + "' artifacts were produced under config hash " + hash +
                                          ", current config hash is " + cfg.hash + "; rerun '" + stage + "'");
    for (const auto& [file, digest] : m.at("artifacts").items()) {
        const fs::path p = cfg.output_dir / file;
        if (!fs::exists(p)) fail(ErrorKind::MissingStage, "stage '" + stage + "' artifact missing: " + p.string());
        const std::string body = file.size() > 3 && file.ends_with(".gz") ? io::read_gzip_file(p) : io::read_text_file(p);
        if (io::fnv1a_hex(body) != digest.get<std::string>())
            fail(ErrorKind::MissingStage, "artifact " + p.string() + " does not match its '" + stage +
                                              "' manifest; rerun '" + stage + "'");
    }
    return m;
}

LiLeeParams load_params(const RunConfig& cfg) {
    std::istringstream in(io::read_text_file(cfg.output_dir / "lilee_params.json"));
    return read_params_json(in);
}

HybridModel load_model(const RunConfig& cfg) {
    return hybrid_model_from_json(io::read_json_file(cfg.output_dir / "hybrid_model.json"));
}

Index factor_index(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw UsageError("config: unknown factor '" + name + "'");
    return Index(it - names.begin());
}

std::string panel_csv(const FactorPanel& p, const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "year";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (Index t = 0; t < p.n_years(); ++t) {
        out << p.years[std::size_t(t)];
        for (Index j = 0; j < p.n_factors(); ++j) out << ',' << io::format_double(p.values(t, j));
        out << '\n';
    }
    return out.str();
}

template <class F>
std::string to_csv(F&& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
}

// ---- stages -------------------------------------------------------------------

void cmd_fit(const RunConfig& cfg) {
    const ClusterDataset data = load_cluster(cfg);
    const LiLeeFit fit = fit_lilee(data);
    const LiLeeParams& p = fit.params;
    const auto names = factor_names(p.countries);
    const FactorPanel panel = p.factors();

    Stage st(cfg, "fit");
    st.text("lilee_params.json", to_csv([&](std::ostream& o) { write_params_json(o, p); }));
    st.text("factors.csv", panel_csv(panel, names));

    std::vector<StationarityReport> reports;
    for (Index j = 0; j < panel.n_factors(); ++j) {
        const std::string label = j == 0 ? "K" : p.countries[std::size_t(j - 1)];
        try {
            reports.push_back(stationarity_report(label, panel.values.col(j)));
        } catch (const Error& e) {
            log::warn("stationarity tests skipped for ", label, ": ", e.what());
        }
    }
    st.text("stationarity.csv", to_csv([&](std::ostream& o) { write_stationarity_csv(o, reports); }));

    json observed = json::object();
    for (std::size_t i = 0; i < data.size(); ++i)
        observed[data[i].country] = life_expectancy(data[i].m.col(data[i].m.cols() - 1));
    st.manifest()["observed_e0"] = observed;
    st.manifest()["observed_e0_year"] = data.years().back();
    st.manifest()["countries"] = p.countries;
    st.finish();
}

void cmd_train(const RunConfig& cfg) {
    require_stage(cfg, "fit");
    const LiLeeParams p = load_params(cfg);
    const FactorPanel panel = p.factors();
    HybridFitOptions opts = cfg.hybrid_options();
    Stage st(cfg, "train");

    if (!cfg.grid.empty()) {
        const DiffPanel rows = model_rows(panel, Representation::Differences);
        const ScalerParams scaler = fit_scaler(rows, cfg.split_year);
        const TrainValSplit split =
            split_by_year(make_windows(apply_scaler(rows, scaler), cfg.lookback), cfg.split_year);
        const auto results = grid_search(cfg.grid, split.train, split.validation, cfg.training, cfg.dropout);
        std::ostringstream csv;
        csv << "rank,index,hidden,learning_rate,max_epochs,patience,val_mse,best_epoch\n";
        for (std::size_t r = 0; r < results.size(); ++r) {
            const auto& g = results[r];
            std::string hidden;
            for (auto h : g.candidate.hidden) hidden += (hidden.empty() ? "" : "-") + std::to_string(h);
            csv << r + 1 << ',' << g.index << ',' << hidden << ',' << io::format_double(g.candidate.learning_rate)
                << ',' << g.candidate.max_epochs << ',' << g.candidate.patience << ','
                << io::format_double(g.val_mse) << ',' << g.trace.best_epoch << '\n';
        }
        st.text("grid_search.csv", csv.str());
        const Candidate& best = results.front().candidate;
        opts.hidden = best.hidden;
        opts.train.learning_rate = best.learning_rate;
        opts.train.max_epochs = best.max_epochs;
        opts.train.patience = best.patience;
        st.manifest()["grid_winner"] = results.front().index;
    }

    const HybridFit fit = fit_hybrid(panel, opts);
    st.json_file("hybrid_model.json", hybrid_model_to_json(fit.model));
    std::ostringstream hist;
    hist << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < fit.trace.val_loss.size(); ++e)
        hist << e + 1 << ',' << io::format_double(fit.trace.train_loss[e]) << ','
             << io::format_double(fit.trace.val_loss[e]) << '\n';
    st.text("training_history.csv", hist.str());
    st.manifest()["training"] = {{"epochs_run", fit.trace.epochs_run},
                                 {"best_epoch", fit.trace.best_epoch},
                                 {"best_val_loss", fit.trace.best_val_loss},
                                 {"initial_val_loss", fit.trace.initial_val_loss},
                                 {"early_stopped", fit.trace.early_stopped},
                                 {"n_train", fit.n_train},
                                 {"n_validation", fit.n_validation},
                                 {"mbc", io::vector_to_json(fit.model.mbc)}};
    st.finish();
}

void cmd_forecast(const RunConfig& cfg) {
    const json fit_manifest = require_stage(cfg, "fit");
    require_stage(cfg, "train");
    const LiLeeParams p = load_params(cfg);
    const HybridModel model = load_model(cfg);
    const FactorPanel panel = p.factors();
    const auto names = factor_names(p.countries);

    VectorXd sigma = historical_diff_sd(panel);
    if (!cfg.process_noise) sigma.setZero();
    StochasticOptions so;
    so.n_paths = cfg.paths;
    so.dropout = cfg.mc_dropout;
    so.seed = derive_seed(cfg.seed, streams::forecast);
    const ForecastEnsemble ens = forecast_stochastic(model, panel, cfg.horizon, sigma, so);

    Stage st(cfg, "forecast");
    st.gzip("ensemble.csv.gz", to_csv([&](std::ostream& o) { write_ensemble_csv(o, ens, names); }));
    const QuantileBands bands = ensemble_quantiles(ens, cfg.quantiles);
    st.text("fan_factors.csv", to_csv([&](std::ostream& o) { write_quantiles_csv(o, bands, names); }));
    const FactorPanel det = forecast_deterministic(model, panel, cfg.horizon);
    st.text("deterministic_forecast.csv", panel_csv(det.slice(ens.origin_year, det.years.back()), names));

    std::vector<LongevityRow> rows;
    std::ostringstream fan_e0, terminal, mono;
    fan_e0 << "year,country,mean";
    for (double q : cfg.quantiles) fan_e0 << ",q" << io::format_double(q);
    fan_e0 << '\n';
    mono << "country,verdict,first_violation_age\n";
    terminal << "age";
    for (const auto& c : p.countries) terminal << ',' << c;
    terminal << '\n';
    const VectorXd k_terminal = ens.cell(ens.horizon(), 0);
    MatrixXd m_terminal(p.n_ages(), p.n_countries());
    for (Index i = 0; i < p.n_countries(); ++i) {
        const std::string& code = p.countries[std::size_t(i)];
        const MatrixXd e0 = e0_paths(ens, p, i);
        const double observed = fit_manifest.at("observed_e0").value(code, std::numeric_limits<double>::quiet_NaN());
        rows.push_back(longevity_row(code, e0, observed));
        for (Index h = 0; h < e0.cols(); ++h) {
            fan_e0 << ens.origin_year + h << ',' << code << ',' << io::format_double(e0.col(h).mean());
            for (double q : cfg.quantiles) fan_e0 << ',' << io::format_double(quantile(VectorXd(e0.col(h)), q));
            fan_e0 << '\n';
        }
        m_terminal.col(i) = reconstruct_surface(p, i, k_terminal.mean());
        const int last_age = std::min(90, int(p.n_ages()) - 1);
        const MonotonicityResult mr = monotonicity_check(m_terminal.col(i), std::min(30, last_age - 1), last_age);
        mono << code << ',' << (mr.pass ? "PASS" : "FAIL") << ',' << mr.first_violation << '\n';
    }
    for (Index x = 0; x < p.n_ages(); ++x) {
        terminal << p.ages[std::size_t(x)];
        for (Index i = 0; i < p.n_countries(); ++i) terminal << ',' << io::format_double(m_terminal(x, i));
        terminal << '\n';
    }
    st.text("fan_e0.csv", fan_e0.str());
    st.text("longevity.csv", to_csv([&](std::ostream& o) { write_longevity_csv(o, rows); }));
    st.text("mortality_terminal.csv", terminal.str());
    st.text("monotonicity.csv", mono.str());
    st.manifest()["forecast"] = {{"paths", ens.n_paths()},
                                 {"horizon", ens.horizon()},
                                 {"origin_year", ens.origin_year},
                                 {"seed", ens.seed},
                                 {"mc_dropout", cfg.mc_dropout},
                                 {"sigma", io::vector_to_json(ens.sigma)},
                                 {"origin", io::vector_to_json(ens.paths.front().row(0).transpose())}};
    st.finish();
}

void cmd_validate(const RunConfig& cfg) {
    require_stage(cfg, "fit");
    require_stage(cfg, "train");
    const LiLeeParams p = load_params(cfg);
    const HybridModel model = load_model(cfg);
    const ValidationResult r = validate(p.factors(), p.countries, model, cfg.validation_config());
    Stage st(cfg, "validate");
    st.text("benchmark.csv", to_csv([&](std::ostream& o) { write_benchmark_csv(o, r.rows); }));
    st.text("validation_paths.csv",
            to_csv([&](std::ostream& o) { write_validation_paths_csv(o, r, factor_names(p.countries)); }));
    st.manifest()["linear_mbc"] = io::vector_to_json(r.linear.mbc);
    st.finish();
}

void cmd_explain(const RunConfig& cfg) {
    require_stage(cfg, "fit");
    require_stage(cfg, "train");
    const LiLeeParams p = load_params(cfg);
    const HybridModel model = load_model(cfg);
    const auto names = factor_names(p.countries);
    const DiffPanel rows = apply_scaler(model_rows(p.factors(), model.representation), model.scaler);
    const WindowedDataset windows = make_windows(rows, model.lookback);
    const TrainValSplit split = split_by_year(windows, cfg.split_year);
    if (split.train.size() == 0 || split.validation.size() == 0)
        fail(ErrorKind::Insufficient, "explain needs training and validation windows");

    Stage st(cfg, "explain");
    const Index sal_out = factor_index(names, cfg.saliency_target);
    const SaliencyProfile prof = temporal_saliency(model.net, windows.X, sal_out);
    st.text("saliency.csv", to_csv([&](std::ostream& o) { write_saliency_csv(o, prof); }));

    const std::string shap_target = cfg.shap_target.empty() ? names.at(1) : cfg.shap_target;
    const Index shap_out = factor_index(names, shap_target);
    std::vector<MatrixXd> background = split.train.X;
    if (cfg.shap_background > 0 && std::size_t(cfg.shap_background) < background.size())
        background.erase(background.begin(), background.end() - cfg.shap_background);
    ShapOptions so;
    so.exact = cfg.shap_exact;
    so.n_coalitions = cfg.shap_coalitions;
    so.seed = derive_seed(cfg.seed, streams::shap);
    const ShapReport rep = kernel_shap(model.net, background, split.validation.X, shap_out, so);
    const VectorXd scores = aggregate_country_influence(rep.phi, model.lookback, Index(names.size()));
    st.text("influence.csv", to_csv([&](std::ostream& o) { write_influence_csv(o, scores, names); }));

    std::ostringstream raw;
    raw << "target_year,lag,factor,phi\n";
    const Index F = Index(names.size());
    for (Index s = 0; s < rep.phi.rows(); ++s)
        for (int l = 0; l < model.lookback; ++l)
            for (Index j = 0; j < F; ++j)
                raw << split.validation.target_years[std::size_t(s)] << ",t-" << model.lookback - l << ','
                    << names[std::size_t(j)] << ',' << io::format_double(rep.phi(s, l * F + j)) << '\n';
    st.text("shap_values.csv", raw.str());
    Index top = 0, bottom = 0;
    scores.maxCoeff(&top);
    scores.minCoeff(&bottom);
    st.manifest()["shap"] = {{"target", shap_target},
                             {"base_value", rep.base_value},
                             {"exact", so.exact},
                             {"top_factor", names[std::size_t(top)]},
                             {"bottom_factor", names[std::size_t(bottom)]},
                             {"top_bottom_ratio", scores[bottom] > 0 ? scores[top] / scores[bottom] : 0.0}};
    st.manifest()["saliency_target"] = cfg.saliency_target;
    st.finish();
}

void cmd_stress(const RunConfig& cfg) {
    require_stage(cfg, "fit");
    const json fm = require_stage(cfg, "forecast");
    const LiLeeParams p = load_params(cfg);
    const auto names = factor_names(p.countries);
    const json& f = fm.at("forecast");
    const VectorXd origin = io::vector_from_json(f.at("origin"), Index(names.size()));
    ForecastEnsemble ens = read_ensemble_csv(io::read_gzip_file(cfg.output_dir / "ensemble.csv.gz"), origin,
                                             f.at("origin_year").get<int>(), names);
    const double k_mean = ens.cell(ens.horizon(), 0).mean();

    Stage st(cfg, "stress");
    std::vector<RiskRow> rows;
    json report = json::array();
    std::string degenerate;
    for (Index i = 0; i < p.n_countries(); ++i) {
        const std::string& code = p.countries[std::size_t(i)];
        const MatrixXd e0 = e0_paths(ens, p, i);
        const ScrReport s = scr(e0.col(e0.cols() - 1), cfg.var_level, cfg.es_level);
        rows.push_back({code, s});
        if (!(s.scr_es > 0.0)) {
            degenerate += (degenerate.empty() ? "" : ", ") + code + " (SCR_ES = " + io::format_double(s.scr_es) + ")";
            continue;
        }
        report.push_back(stress_to_json(code, s, reverse_stress(p, k_mean, i, s.scr_es, cfg.shocks)));
    }
    st.text("risk.csv", to_csv([&](std::ostream& o) { write_risk_csv(o, rows); }));
    if (!degenerate.empty())
        fail(ErrorKind::Degenerate, "degenerate SCR: non-positive SCR_ES for " + degenerate +
                                        "; the reverse stress test needs a positive capital buffer");
    st.json_file("stress.json", {{"var_level", cfg.var_level}, {"es_level", cfg.es_level}, {"countries", report}});
    st.finish();
}

void cmd_ablate(const RunConfig& cfg) {
    require_stage(cfg, "fit");
    require_stage(cfg, "train");
    const LiLeeParams p = load_params(cfg);
    const HybridModel model = load_model(cfg);
    const FactorPanel panel = p.factors();
    const ValidationConfig vc = cfg.validation_config();
    const auto ab = ablate(panel, vc, &model);
    const auto lb = lookback_sweep(panel, vc, cfg.lookbacks);
    Stage st(cfg, "ablate");
    st.text("ablation.csv", to_csv([&](std::ostream& o) { write_ablation_csv(o, ab); }));
    st.text("lookback.csv", to_csv([&](std::ostream& o) { write_lookback_csv(o, lb); }));
    st.finish();
}

} // namespace

void run_stage(const std::string& stage, const RunConfig& cfg) {
    if (stage == "fit") return cmd_fit(cfg);
    if (stage == "train") return cmd_train(cfg);
    if (stage == "forecast") return cmd_forecast(cfg);
    if (stage == "validate") return cmd_validate(cfg);
    if (stage == "explain") return cmd_explain(cfg);
    if (stage == "stress") return cmd_stress(cfg);
    if (stage == "ablate") return cmd_ablate(cfg);
    throw UsageError("unknown stage '" + stage + "'");
}

void write_fixture(const fs::path& dir, std::uint64_t seed) {
    fs::create_directories(dir);
    SynthSpec spec;
    spec.seed = seed;
    const ClusterDataset data = synthesize_cluster(reference_truth(spec), 0.01, derive_seed(seed, streams::synth));
    io::write_text_file(dir / "cluster.csv", to_csv([&](std::ostream& o) { write_cluster_csv(o, data); }));
    io::write_text_file(dir / "config.json", fixture_config("cluster.csv", seed).dump(2) + "\n");
    log::info("synth: wrote ", (dir / "cluster.csv").string(), " and ", (dir / "config.json").string());
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Hybrid neural-actuarial mortality pipeline", "hlift"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "Run configuration (JSON)");
    app.add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* seed_opt = app.add_option("--seed-override", seed, "Replace the config seed");
    app.add_flag("--quiet", quiet, "Only print warnings and errors");
    app.fallthrough();

    std::vector<CLI::App*> subs;
    for (const auto& s : kStages) subs.push_back(app.add_subcommand(s, "Run the '" + s + "' stage"));
    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic fixture cluster and config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (const char* lvl = std::getenv("HLIFT_LOG_LEVEL"); lvl && *lvl) {
        try {
            log::set_level(std::string(lvl));
        } catch (const std::exception&) {
            std::cerr << "hlift: ignoring unknown HLIFT_LOG_LEVEL '" << lvl << "'\n";
        }
    }
    if (quiet) log::set_level(log::Level::Warn);

    try {
        if (synth->parsed()) {
            const fs::path dir = out_dir.empty() ? fs::path("fixture") : fs::path(out_dir);
            write_fixture(dir, seed_opt->count() ? seed : 20240601);
            return 0;
        }
        if (config_path.empty()) throw UsageError("--config is required for this command");
        Overrides ov;
        if (seed_opt->count()) ov.seed = seed;
        if (!out_dir.empty()) ov.output_dir = fs::path(out_dir);
        const RunConfig cfg = load_config(config_path, ov);
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) run_stage(kStages[i], cfg);
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "hlift: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "hlift: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "hlift: malformed artifact: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "hlift: io error: " << e.what() << '\n';
        return 2;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(int(argv.size()), argv.data());
}

} // namespace hlift::cli
