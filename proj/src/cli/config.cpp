#include "hlift/cli/config.hpp"

#include "hlift/error.hpp"
#include "hlift/log.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace hlift::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

void usage(bool ok, const std::string& msg) {
    if (!ok) throw UsageError("config: " + msg);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    usage(obj.is_object(), where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) usage(allowed.count(k) == 1, "unknown key '" + where + "." + k + "'");
}

template <class T>
T get_or(const json& obj, const char* key, const T& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config: '" + where + "." + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<Eigen::Index> hidden_sizes(const json& j, const std::string& where) {
    std::vector<Eigen::Index> h;
    try {
        h = j.get<std::vector<Eigen::Index>>();
    } catch (const json::exception&) {
        throw UsageError("config: '" + where + "' must be a list of integers");
    }
    usage(!h.empty(), where + " needs at least one layer");
    for (auto v : h) usage(v >= 1, where + " entries must be >= 1");
    return h;
}

} // namespace

HybridFitOptions RunConfig::hybrid_options() const {
    HybridFitOptions o;
    o.lookback = lookback;
    o.split_year = split_year;
    o.hidden = hidden;
    o.dropout_rate = dropout;
    o.train = training;
    return o;
}

ValidationConfig RunConfig::validation_config() const {
    ValidationConfig v;
    v.hybrid = hybrid_options();
    v.target = target;
    v.mode = mode;
    return v;
}

RunConfig parse_config(const json& input, const fs::path& base_dir, const Overrides& ov) {
    RunConfig c;
    json doc = input;
    allow_keys(doc, "config",
               {"seed", "output_dir", "data", "split_year", "lookback", "model", "training", "grid", "forecast",
                "validation", "explain", "stress", "ablation"});
    if (ov.seed) doc["seed"] = *ov.seed;
    c.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");

    std::string out = get_or<std::string>(doc, "output_dir", "out", "config");
    if (const char* env = std::getenv("HLIFT_OUT_DIR"); env && *env) out = env;
    c.output_dir = ov.output_dir ? *ov.output_dir : resolve(base_dir, out);

    usage(doc.contains("data"), "missing 'data' section");
    const json& data = doc.at("data");
    allow_keys(data, "data", {"cluster_csv", "countries", "first_year", "last_year", "age_max", "missing"});
    if (data.contains("cluster_csv")) {
        c.cluster_csv = resolve(base_dir, get_or<std::string>(data, "cluster_csv", "", "data"));
        if (data.contains("countries")) {
            usage(data.at("countries").is_array(), "data.countries must be a list");
            for (const auto& e : data.at("countries")) {
                usage(e.is_string(), "with data.cluster_csv, data.countries lists country codes");
                c.countries.push_back({e.get<std::string>(), {}, {}, {}});
            }
        }
    } else {
        usage(data.contains("countries") && data.at("countries").is_array() && !data.at("countries").empty(),
              "data needs either cluster_csv or a non-empty countries list");
        for (const auto& e : data.at("countries")) {
            allow_keys(e, "data.countries[]", {"code", "deaths", "exposures", "rates"});
            CountrySource s;
            s.code = get_or<std::string>(e, "code", "", "data.countries[]");
            usage(!s.code.empty(), "every country needs a code");
            const bool de = e.contains("deaths") && e.contains("exposures");
            const bool r = e.contains("rates");
            usage(de != r, "country " + s.code + " needs either deaths + exposures or rates");
            if (de) {
                s.deaths = resolve(base_dir, e.at("deaths").get<std::string>());
                s.exposures = resolve(base_dir, e.at("exposures").get<std::string>());
            } else {
                s.rates = resolve(base_dir, e.at("rates").get<std::string>());
            }
            c.countries.push_back(std::move(s));
        }
    }
    std::set<std::string> codes;
    for (const auto& s : c.countries) usage(codes.insert(s.code).second, "duplicate country " + s.code);
    if (data.contains("first_year") || data.contains("last_year")) {
        usage(data.contains("first_year") && data.contains("last_year"), "give both first_year and last_year");
        c.years = YearRange{get_or<int>(data, "first_year", 0, "data"), get_or<int>(data, "last_year", 0, "data")};
        usage(c.years->last > c.years->first, "last_year must exceed first_year");
    }
    usage(c.cluster_csv.empty() ? c.years.has_value() : true, "HMD input needs first_year and last_year");
    c.surface.age_max = get_or<int>(data, "age_max", kDefaultAgeMax, "data");
    usage(c.surface.age_max >= 1, "age_max must be >= 1");
    const std::string missing = get_or<std::string>(data, "missing", "reject", "data");
    usage(missing == "reject" || missing == "interpolate", "data.missing must be 'reject' or 'interpolate'");
    c.surface.missing = missing == "reject" ? MissingPolicy::Reject : MissingPolicy::InterpolateYears;

    c.split_year = get_or<int>(doc, "split_year", 2011, "config");
    c.lookback = get_or<int>(doc, "lookback", 10, "config");
    usage(c.lookback >= 1, "lookback must be >= 1");

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        allow_keys(m, "model", {"hidden", "dropout"});
        if (m.contains("hidden")) c.hidden = hidden_sizes(m.at("hidden"), "model.hidden");
        c.dropout = get_or<double>(m, "dropout", 0.2, "model");
    }
    usage(c.dropout >= 0.0 && c.dropout < 1.0, "model.dropout must lie in [0, 1)");

    if (doc.contains("training")) {
        const json& t = doc.at("training");
        allow_keys(t, "training", {"learning_rate", "max_epochs", "patience", "batch_size", "clip_norm"});
        c.training.learning_rate = get_or<double>(t, "learning_rate", 1e-3, "training");
        c.training.max_epochs = get_or<int>(t, "max_epochs", 500, "training");
        c.training.patience = get_or<int>(t, "patience", 15, "training");
        c.training.batch_size = get_or<int>(t, "batch_size", 0, "training");
        c.training.clip_norm = get_or<double>(t, "clip_norm", 5.0, "training");
    }
    usage(c.training.learning_rate > 0.0, "training.learning_rate must be positive");
    usage(c.training.max_epochs >= 1 && c.training.patience >= 1, "max_epochs and patience must be >= 1");
    c.training.seed = c.seed;

    if (doc.contains("grid")) {
        usage(doc.at("grid").is_array(), "grid must be a list");
        for (const auto& g : doc.at("grid")) {
            allow_keys(g, "grid[]", {"hidden", "learning_rate", "max_epochs", "patience"});
            Candidate cand;
            cand.hidden = g.contains("hidden") ? hidden_sizes(g.at("hidden"), "grid[].hidden") : c.hidden;
            cand.learning_rate = get_or<double>(g, "learning_rate", c.training.learning_rate, "grid[]");
            cand.max_epochs = get_or<int>(g, "max_epochs", c.training.max_epochs, "grid[]");
            cand.patience = get_or<int>(g, "patience", c.training.patience, "grid[]");
            usage(cand.learning_rate > 0.0 && cand.max_epochs >= 1 && cand.patience >= 1, "invalid grid entry");
            c.grid.push_back(std::move(cand));
        }
    }

    if (doc.contains("forecast")) {
        const json& f = doc.at("forecast");
        allow_keys(f, "forecast", {"paths", "horizon", "mc_dropout", "process_noise", "quantiles"});
        c.paths = get_or<int>(f, "paths", 1000, "forecast");
        c.horizon = get_or<int>(f, "horizon", 30, "forecast");
        c.mc_dropout = get_or<bool>(f, "mc_dropout", true, "forecast");
        c.process_noise = get_or<bool>(f, "process_noise", true, "forecast");
        c.quantiles = get_or<std::vector<double>>(f, "quantiles", c.quantiles, "forecast");
    }
    usage(c.paths >= 2, "forecast.paths must be >= 2");
    usage(c.horizon >= 1, "forecast.horizon must be >= 1");
    for (double q : c.quantiles) usage(q >= 0.0 && q <= 1.0, "forecast.quantiles must lie in [0, 1]");

    if (doc.contains("validation")) {
        const json& v = doc.at("validation");
        allow_keys(v, "validation", {"target", "mode"});
        const std::string target = get_or<std::string>(v, "target", "specific_factors", "validation");
        usage(target == "specific_factors" || target == "common_factor",
              "validation.target must be 'specific_factors' or 'common_factor'");
        c.target = target == "common_factor" ? RmseTarget::CommonFactor : RmseTarget::SpecificFactors;
        const std::string mode = get_or<std::string>(v, "mode", "recursive", "validation");
        usage(mode == "recursive" || mode == "one_step", "validation.mode must be 'recursive' or 'one_step'");
        c.mode = mode == "one_step" ? ValidationMode::OneStep : ValidationMode::Recursive;
    }

    if (doc.contains("explain")) {
        const json& e = doc.at("explain");
        allow_keys(e, "explain", {"saliency_target", "shap_target", "coalitions", "background", "exact"});
        c.saliency_target = get_or<std::string>(e, "saliency_target", "K", "explain");
        c.shap_target = get_or<std::string>(e, "shap_target", "", "explain");
        c.shap_coalitions = get_or<int>(e, "coalitions", 0, "explain");
        c.shap_background = get_or<int>(e, "background", 0, "explain");
        c.shap_exact = get_or<bool>(e, "exact", false, "explain");
    }
    usage(c.shap_coalitions >= 0 && c.shap_background >= 0, "explain budgets must be >= 0");

    if (doc.contains("stress")) {
        const json& s = doc.at("stress");
        allow_keys(s, "stress", {"shocks", "var_level", "es_level"});
        c.shocks = get_or<std::vector<double>>(s, "shocks", c.shocks, "stress");
        c.var_level = get_or<double>(s, "var_level", 0.995, "stress");
        c.es_level = get_or<double>(s, "es_level", 0.99, "stress");
    }
    usage(!c.shocks.empty(), "stress.shocks must not be empty");
    for (double d : c.shocks) usage(d > 0.0 && d < 1.0, "stress.shocks must lie in (0, 1)");
    usage(c.var_level > 0.0 && c.var_level < 1.0 && c.es_level > 0.0 && c.es_level < 1.0,
          "stress levels must lie in (0, 1)");

    if (doc.contains("ablation")) {
        const json& a = doc.at("ablation");
        allow_keys(a, "ablation", {"lookbacks"});
        c.lookbacks = get_or<std::vector<int>>(a, "lookbacks", c.lookbacks, "ablation");
    }
    for (int L : c.lookbacks) usage(L >= 1, "ablation.lookbacks must be >= 1");

    doc.erase("output_dir");
    c.document = doc;
    c.hash = io::fnv1a_hex(doc.dump());
    return c;
}

RunConfig load_config(const fs::path& path, const Overrides& ov) {
    if (!fs::exists(path)) fail(ErrorKind::Io, "config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(io::read_text_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path(), ov);
}

ClusterDataset load_cluster(const RunConfig& cfg) {
    if (!cfg.cluster_csv.empty()) {
        if (!fs::exists(cfg.cluster_csv)) fail(ErrorKind::Io, "data file not found: " + cfg.cluster_csv.string());
        ClusterDataset data = read_cluster_csv(cfg.cluster_csv, cfg.surface);
        if (cfg.years) data = data.slice_years(*cfg.years);
        if (cfg.countries.empty()) return data;
        const auto have = data.countries();
        std::vector<std::size_t> order;
        for (const auto& s : cfg.countries) {
            const auto it = std::find(have.begin(), have.end(), s.code);
            if (it == have.end()) fail(ErrorKind::Data, "country " + s.code + " is not in " + cfg.cluster_csv.string());
            order.push_back(std::size_t(it - have.begin()));
        }
        if (order.size() == have.size()) return data.permuted(order);
        std::vector<MortalitySurface> picked;
        for (auto i : order) picked.push_back(data[i]);
        return ClusterDataset(std::move(picked));
    }
    std::vector<MortalitySurface> surfaces;
    for (const auto& s : cfg.countries) {
        auto read = [](const fs::path& p, HmdKind kind) {
            if (!fs::exists(p)) fail(ErrorKind::Io, "data file not found: " + p.string());
            return read_hmd_file(p, kind);
        };
        if (!s.rates.empty()) {
            const HmdTable rates = read(s.rates, HmdKind::Rates);
            surfaces.push_back(build_surface(s.code, rates, nullptr, *cfg.years, cfg.surface));
        } else {
            const HmdTable deaths = read(s.deaths, HmdKind::Deaths);
            const HmdTable exposures = read(s.exposures, HmdKind::Exposures);
            surfaces.push_back(build_surface(s.code, deaths, &exposures, *cfg.years, cfg.surface));
        }
    }
    return ClusterDataset(std::move(surfaces));
}

json fixture_config(const std::string& cluster_csv, std::uint64_t seed) {
    return {{"seed", seed},
            {"output_dir", "out"},
            {"data", {{"cluster_csv", cluster_csv}}},
            {"split_year", 2011},
            {"lookback", 10},
            {"model", {{"hidden", {32, 16}}, {"dropout", 0.2}}},
            {"training", {{"learning_rate", 1e-3}, {"max_epochs", 500}, {"patience", 15}}},
            {"forecast", {{"paths", 1000}, {"horizon", 30}}},
            {"validation", {{"target", "specific_factors"}, {"mode", "recursive"}}},
            {"stress", {{"shocks", {0.05, 0.10, 0.15, 0.20}}, {"var_level", 0.995}, {"es_level", 0.99}}},
            {"ablation", {{"lookbacks", {5, 10, 15}}}}};
}

} // namespace hlift::cli
