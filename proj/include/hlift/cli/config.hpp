#pragma once

#include "hlift/harness.hpp"
#include "hlift/hmd.hpp"
#include "hlift/io.hpp"
#include "hlift/lstm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hlift::cli {

/// Bad flags or an invalid config document (exit code 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CountrySource {
    std::string code;
    std::filesystem::path deaths;    ///< with exposures
    std::filesystem::path exposures;
    std::filesystem::path rates;     ///< alternative to deaths + exposures
};

/// Effective run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
    io::json document;   ///< effective document (overrides applied, output dir removed)
    std::string hash;    ///< FNV-1a of the canonical effective document

    // data
    std::filesystem::path cluster_csv;
    std::vector<CountrySource> countries;
    std::optional<YearRange> years;
    SurfaceOptions surface;

    // modelling
    int split_year = 2011;
    int lookback = 10;
    std::vector<Eigen::Index> hidden{32, 16};
    double dropout = 0.2;
    TrainConfig training;
    std::vector<Candidate> grid;

    // forecast
    int paths = 1000;
    int horizon = 30;
    bool mc_dropout = true;
    bool process_noise = true;
    std::vector<double> quantiles{0.025, 0.10, 0.50, 0.90, 0.975};

    // validation
    RmseTarget target = RmseTarget::SpecificFactors;
    ValidationMode mode = ValidationMode::Recursive;

    // explain
    std::string saliency_target = "K";
    std::string shap_target;  ///< empty: first country's specific factor
    int shap_coalitions = 0;  ///< 0: 2 d + 2048
    int shap_background = 0;  ///< 0: all training windows
    bool shap_exact = false;

    // stress
    std::vector<double> shocks{0.05, 0.10, 0.15, 0.20};
    double var_level = 0.995;
    double es_level = 0.99;

    // ablation
    std::vector<int> lookbacks{5, 10, 15};

    std::uint64_t seed = 0;
    std::filesystem::path output_dir;

    HybridFitOptions hybrid_options() const;
    ValidationConfig validation_config() const;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
};

/// Parses and validates a config document. Unknown keys are rejected.
RunConfig parse_config(const io::json& doc, const std::filesystem::path& base_dir, const Overrides& ov = {});
/// Reads the file, then applies flag overrides and the HLIFT_OUT_DIR environment variable.
RunConfig load_config(const std::filesystem::path& path, const Overrides& ov = {});

/// Loads the mortality surfaces named by the config.
ClusterDataset load_cluster(const RunConfig& cfg);

/// Default config text for a synthetic fixture stored as `cluster_csv`.
io::json fixture_config(const std::string& cluster_csv, std::uint64_t seed);

} // namespace hlift::cli
