#pragma once

#include "hlift/factors.hpp"
#include "hlift/io.hpp"
#include "hlift/lstm.hpp"
#include "hlift/tensor_prep.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hlift {

/// What the network sees and predicts. The production model works on first
/// differences; Levels exists for the ablation that drops differencing.
enum class Representation { Differences, Levels };

/// Trained network plus everything needed to run it recursively. `mbc` is the
/// mean-bias correction in the network's (scaled) output space.
struct HybridModel {
    NetworkParams net;
    ScalerParams scaler;
    int lookback = 10;
    Representation representation = Representation::Differences;
    Eigen::VectorXd mbc;

    Eigen::Index n_features() const { return scaler.mean.size(); }
    void validate() const;
};

/// Mean over samples of (target - deterministic prediction), scaled space.
Eigen::VectorXd compute_mbc(const NetworkParams& net, const WindowedDataset& validation);

/// Rows the network is trained on: scaled differences (or scaled levels), labelled by year.
DiffPanel model_rows(const FactorPanel& levels, Representation rep);

struct HybridFitOptions {
    int lookback = 10;
    int split_year = 2011; ///< last target year used for training (and for the scaler)
    std::vector<Eigen::Index> hidden{32, 16};
    double dropout_rate = 0.2;
    TrainConfig train;
    Representation representation = Representation::Differences;
};

struct HybridFit {
    HybridModel model;
    TrainingTrace trace;
    Eigen::Index n_train = 0;
    Eigen::Index n_validation = 0;
};

/// Difference, scale on training rows only, window, split chronologically,
/// train, and compute the MBC on the validation windows.
HybridFit fit_hybrid(const FactorPanel& levels, const HybridFitOptions& opts);

/// One recursive step from a level history: the next level, without noise.
/// `mask` (may be null) switches on dropout.
Eigen::VectorXd predict_next_level(const HybridModel& model, const Eigen::MatrixXd& level_history,
                                   const Eigen::MatrixXd* mask);

/// History followed by `horizon` recursively predicted years (bias-corrected,
/// no dropout, no noise). Needs at least lookback + 1 history levels.
FactorPanel forecast_deterministic(const HybridModel& model, const FactorPanel& history, int horizon);

/// Per-feature sample sd (n-1) of the first differences over the whole panel.
Eigen::VectorXd historical_diff_sd(const FactorPanel& levels);

/// S paths of (H+1) x F levels; row 0 of every path is the origin level.
struct ForecastEnsemble {
    int origin_year = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd sigma;
    std::vector<Eigen::MatrixXd> paths;

    int n_paths() const { return int(paths.size()); }
    int horizon() const { return paths.empty() ? 0 : int(paths.front().rows()) - 1; }
    Eigen::Index n_features() const { return paths.empty() ? 0 : paths.front().cols(); }
    /// Values of one factor across paths at horizon h.
    Eigen::VectorXd cell(int h, Eigen::Index factor) const;
};

struct StochasticOptions {
    int n_paths = 1000;
    bool dropout = true;
    std::uint64_t seed = 0;
};

/// Each path evolves on its own history: dropout-masked prediction + MBC,
/// inverse scaling, Gaussian process noise with sd `sigma` in level space.
ForecastEnsemble forecast_stochastic(const HybridModel& model, const FactorPanel& history, int horizon,
                                     const Eigen::VectorXd& sigma, const StochasticOptions& opts);

struct QuantileBands {
    std::vector<double> levels;
    std::vector<int> years;
    Eigen::MatrixXd mean;                 // (H+1) x F
    std::vector<Eigen::MatrixXd> values; // one (H+1) x F matrix per level
};

QuantileBands ensemble_quantiles(const ForecastEnsemble& ens, const std::vector<double>& levels);

/// path,horizon,factor,value for horizons 1..H.
void write_ensemble_csv(std::ostream& out, const ForecastEnsemble& ens, const std::vector<std::string>& factor_names);
/// Inverse of write_ensemble_csv; `origin` becomes row 0 of every path.
ForecastEnsemble read_ensemble_csv(std::string_view text, const Eigen::VectorXd& origin, int origin_year,
                                   const std::vector<std::string>& factor_names);
/// Fan-chart data: year,factor,mean,q<level>...
void write_quantiles_csv(std::ostream& out, const QuantileBands& bands, const std::vector<std::string>& factor_names);

io::json hybrid_model_to_json(const HybridModel& model);
HybridModel hybrid_model_from_json(const io::json& j);

/// Factor names in panel column order: K, then k_<country>.
std::vector<std::string> factor_names(const std::vector<std::string>& countries);

} // namespace hlift
