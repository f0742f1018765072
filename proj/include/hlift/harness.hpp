#pragma once

#include "hlift/factors.hpp"
#include "hlift/hmd.hpp"
#include "hlift/hybrid.hpp"
#include "hlift/lilee.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hlift {

/// Which level-reconstructed index the per-country RMSE is measured on.
enum class RmseTarget { SpecificFactors, CommonFactor };
/// Recursive: one forecast from the split year across the validation window.
/// OneStep: every validation year predicted from the observed history before it.
enum class ValidationMode { Recursive, OneStep };

struct ValidationConfig {
    HybridFitOptions hybrid; ///< split_year here defines the validation window
    RmseTarget target = RmseTarget::SpecificFactors;
    ValidationMode mode = ValidationMode::Recursive;
};

double rmse(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted);
/// (rmse_lilee - rmse_hybrid) / rmse_lilee * 100.
double improvement_pct(double rmse_lilee, double rmse_hybrid);

/// RWD + AR(1) fitted on the training years, with its own mean-bias step
/// correction: the mean over validation years of (observed step - expected step).
struct LinearBaseline {
    LinearForecaster model;
    Eigen::VectorXd mbc;
};

LinearBaseline fit_linear_baseline(const FactorPanel& levels, int split_year);

/// Validation-year levels predicted by each model.
FactorPanel linear_validation_forecast(const LinearBaseline& b, const FactorPanel& levels, int split_year,
                                       ValidationMode mode, bool apply_mbc = true);
FactorPanel hybrid_validation_forecast(const HybridModel& m, const FactorPanel& levels, int split_year,
                                       ValidationMode mode);

struct BenchmarkRow {
    std::string country;
    double rmse_lilee = 0.0;
    double rmse_hybrid = 0.0;
    double improvement_pct = 0.0;
};

struct ValidationResult {
    std::vector<BenchmarkRow> rows;
    FactorPanel actual; ///< validation years
    FactorPanel lilee;
    FactorPanel hybrid;
    LinearBaseline linear;
};

/// Benchmarks a trained hybrid against the linear baseline, MBC on both.
ValidationResult validate(const FactorPanel& levels, const std::vector<std::string>& countries,
                          const HybridModel& model, const ValidationConfig& cfg);
/// Trains the hybrid first.
ValidationResult validate(const FactorPanel& levels, const std::vector<std::string>& countries,
                          const ValidationConfig& cfg, HybridFit* fit_out = nullptr);

struct AblationRow {
    std::string variant;
    double rmse = 0.0;            ///< on the common index K over the validation years
    double degradation_pct = 0.0; ///< relative to baseline
};

/// baseline, no_differences (retrained on scaled levels, same architecture and
/// seed), no_mbc (baseline network with a zero bias vector).
std::vector<AblationRow> ablate(const FactorPanel& levels, const ValidationConfig& cfg,
                                const HybridModel* trained_baseline = nullptr);

struct LookbackRow {
    int lookback = 0;
    Eigen::Index n_train = 0;
    Eigen::Index n_validation = 0;
    double rmse_common = 0.0;
    double rmse_specific = 0.0; ///< pooled over all country-specific cells
};

/// Retrains per lookback; lookbacks without enough history are skipped with a notice.
std::vector<LookbackRow> lookback_sweep(const FactorPanel& levels, const ValidationConfig& cfg,
                                        const std::vector<int>& lookbacks = {5, 10, 15});

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_lookback_csv(std::ostream& out, const std::vector<LookbackRow>& rows);
/// year,factor,actual,lilee,hybrid over the validation window.
void write_validation_paths_csv(std::ostream& out, const ValidationResult& r, const std::vector<std::string>& names);

/// Cluster whose every specific index follows `regime`; all other settings as
/// in SynthSpec, with `n_countries` taken from its default country list.
ClusterDataset regime_cluster(SpecificRegime regime, std::uint64_t seed, int n_countries = 3,
                              double noise_sd = 0.005);

} // namespace hlift
