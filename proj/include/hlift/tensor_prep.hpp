#pragma once

#include "hlift/factors.hpp"

#include <Eigen/Dense>

#include <vector>

namespace hlift {

/// First differences of a factor panel. Row t holds level[t+1] - level[t] and is
/// labelled with the later year.
struct DiffPanel {
    std::vector<int> years;
    Eigen::MatrixXd V; // (T-1) x (N+1)

    Eigen::Index n_rows() const { return V.rows(); }
    Eigen::Index n_features() const { return V.cols(); }
};

DiffPanel difference(const FactorPanel& panel);
/// Inverse of difference(): cumulative sum anchored at `first_level`, the level
/// of the year preceding diffs.years.front(), which becomes row 0.
FactorPanel integrate(const DiffPanel& diffs, const Eigen::VectorXd& first_level);

/// Per-feature standardisation fitted on training rows only.
struct ScalerParams {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;

    Eigen::VectorXd transform(const Eigen::VectorXd& row) const;
    Eigen::VectorXd inverse(const Eigen::VectorXd& row) const;
    Eigen::MatrixXd transform_rows(const Eigen::MatrixXd& rows) const;
    Eigen::MatrixXd inverse_rows(const Eigen::MatrixXd& rows) const;
};

/// Mean and sample sd (n-1) over the rows labelled <= train_end_year.
/// Throws Domain with fewer than two training rows and Degenerate on a zero-sd feature.
ScalerParams fit_scaler(const Eigen::MatrixXd& rows, const std::vector<int>& years, int train_end_year);
ScalerParams fit_scaler(const DiffPanel& V, int train_end_year);

/// Same panel with every row standardised.
DiffPanel apply_scaler(const DiffPanel& V, const ScalerParams& scaler);

/// Sliding windows: X[s] = rows s..s+L-1, Y[s] = row s+L, labelled with the target year.
struct WindowedDataset {
    int lookback = 0;
    std::vector<Eigen::MatrixXd> X; // each L x F
    Eigen::MatrixXd Y;              // samples x F
    std::vector<int> target_years;

    Eigen::Index size() const { return Eigen::Index(X.size()); }
    Eigen::Index n_features() const { return Y.cols(); }
    /// Samples whose target year lies in [first, last].
    WindowedDataset subset_years(int first, int last) const;
    WindowedDataset subset(const std::vector<Eigen::Index>& idx) const;
};

WindowedDataset make_windows(const DiffPanel& scaled, int lookback);

/// samples x (L*F); feature (l, j) maps to column l*F + j.
Eigen::MatrixXd flatten_windows(const WindowedDataset& w);
std::vector<Eigen::MatrixXd> unflatten_windows(const Eigen::MatrixXd& flat, int lookback, Eigen::Index n_features);
Eigen::VectorXd flatten_window(const Eigen::MatrixXd& window);
Eigen::MatrixXd unflatten_window(const Eigen::VectorXd& flat, int lookback, Eigen::Index n_features);

/// Chronological split by target year: targets <= split_year train, later targets validate.
struct TrainValSplit {
    WindowedDataset train;
    WindowedDataset validation;
};
TrainValSplit split_by_year(const WindowedDataset& w, int split_year);

} // namespace hlift
