#include "hlift/tensor_prep.hpp"

#include "hlift/error.hpp"

#include <cmath>

namespace hlift {

DiffPanel difference(const FactorPanel& panel) {
    panel.validate();
    require(panel.n_years() >= 2, ErrorKind::Insufficient, "differencing needs at least two years");
    DiffPanel d;
    const auto T = panel.n_years();
    d.V = panel.values.bottomRows(T - 1) - panel.values.topRows(T - 1);
    d.years.assign(panel.years.begin() + 1, panel.years.end());
    return d;
}

FactorPanel integrate(const DiffPanel& diffs, const Eigen::VectorXd& first_level) {
    require(first_level.size() == diffs.n_features(), ErrorKind::Shape, "anchor level size mismatch");
    FactorPanel p;
    p.values.resize(diffs.n_rows() + 1, diffs.n_features());
    p.values.row(0) = first_level.transpose();
    for (Eigen::Index t = 0; t < diffs.n_rows(); ++t) p.values.row(t + 1) = p.values.row(t) + diffs.V.row(t);
    p.years.reserve(std::size_t(diffs.n_rows() + 1));
    p.years.push_back(diffs.years.empty() ? 0 : diffs.years.front() - 1);
    p.years.insert(p.years.end(), diffs.years.begin(), diffs.years.end());
    return p;
}

Eigen::VectorXd ScalerParams::transform(const Eigen::VectorXd& row) const {
    return ((row - mean).array() / sd.array()).matrix();
}

Eigen::VectorXd ScalerParams::inverse(const Eigen::VectorXd& row) const {
    return (row.array() * sd.array()).matrix() + mean;
}

Eigen::MatrixXd ScalerParams::transform_rows(const Eigen::MatrixXd& rows) const {
    return (rows.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

Eigen::MatrixXd ScalerParams::inverse_rows(const Eigen::MatrixXd& rows) const {
    return (rows.array().rowwise() * sd.transpose().array()).matrix().rowwise() + mean.transpose();
}

ScalerParams fit_scaler(const Eigen::MatrixXd& rows, const std::vector<int>& years, int train_end_year) {
    require(Eigen::Index(years.size()) == rows.rows(), ErrorKind::Shape, "row labels mismatch");
    std::vector<Eigen::Index> idx;
    for (std::size_t t = 0; t < years.size(); ++t)
        if (years[t] <= train_end_year) idx.push_back(Eigen::Index(t));
    require(idx.size() >= 2, ErrorKind::Domain, "scaler needs at least two training rows");

    const auto F = rows.cols();
    ScalerParams s;
    s.mean = Eigen::VectorXd::Zero(F);
    for (auto t : idx) s.mean += rows.row(t).transpose();
    s.mean /= double(idx.size());
    s.sd = Eigen::VectorXd::Zero(F);
    for (auto t : idx) s.sd += (rows.row(t).transpose() - s.mean).array().square().matrix();
    s.sd = (s.sd / double(idx.size() - 1)).array().sqrt();
    for (Eigen::Index j = 0; j < F; ++j) {
        const double scale = std::max(1.0, std::abs(s.mean[j]));
        if (!(s.sd[j] > 1e-12 * scale))
            fail(ErrorKind::Degenerate, "feature " + std::to_string(j) + " has zero variance over training rows");
    }
    return s;
}

ScalerParams fit_scaler(const DiffPanel& V, int train_end_year) { return fit_scaler(V.V, V.years, train_end_year); }

DiffPanel apply_scaler(const DiffPanel& V, const ScalerParams& scaler) {
    require(scaler.mean.size() == V.n_features(), ErrorKind::Shape, "scaler/feature count mismatch");
    DiffPanel out;
    out.years = V.years;
    out.V = scaler.transform_rows(V.V);
    return out;
}

WindowedDataset make_windows(const DiffPanel& scaled, int lookback) {
    require(lookback >= 1, ErrorKind::Domain, "lookback must be >= 1");
    const auto T = scaled.n_rows();
    if (T <= lookback)
        fail(ErrorKind::Insufficient, "need more than " + std::to_string(lookback) + " difference rows, have " +
                                          std::to_string(T));
    WindowedDataset w;
    w.lookback = lookback;
    const auto S = T - lookback;
    w.Y.resize(S, scaled.n_features());
    for (Eigen::Index s = 0; s < S; ++s) {
        w.X.push_back(scaled.V.middleRows(s, lookback));
        w.Y.row(s) = scaled.V.row(s + lookback);
        w.target_years.push_back(scaled.years[std::size_t(s + lookback)]);
    }
    return w;
}

WindowedDataset WindowedDataset::subset(const std::vector<Eigen::Index>& idx) const {
    WindowedDataset out;
    out.lookback = lookback;
    out.Y.resize(Eigen::Index(idx.size()), Y.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.X.push_back(X.at(std::size_t(idx[r])));
        out.Y.row(Eigen::Index(r)) = Y.row(idx[r]);
        out.target_years.push_back(target_years[std::size_t(idx[r])]);
    }
    return out;
}

WindowedDataset WindowedDataset::subset_years(int first, int last) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t s = 0; s < target_years.size(); ++s)
        if (target_years[s] >= first && target_years[s] <= last) idx.push_back(Eigen::Index(s));
    return subset(idx);
}

TrainValSplit split_by_year(const WindowedDataset& w, int split_year) {
    TrainValSplit out;
    std::vector<Eigen::Index> tr, va;
    for (std::size_t s = 0; s < w.target_years.size(); ++s)
        (w.target_years[s] <= split_year ? tr : va).push_back(Eigen::Index(s));
    out.train = w.subset(tr);
    out.validation = w.subset(va);
    return out;
}

Eigen::VectorXd flatten_window(const Eigen::MatrixXd& window) {
    const auto L = window.rows();
    const auto F = window.cols();
    Eigen::VectorXd flat(L * F);
    for (Eigen::Index l = 0; l < L; ++l)
        for (Eigen::Index j = 0; j < F; ++j) flat[l * F + j] = window(l, j);
    return flat;
}

Eigen::MatrixXd unflatten_window(const Eigen::VectorXd& flat, int lookback, Eigen::Index n_features) {
    require(flat.size() == lookback * n_features, ErrorKind::Shape, "flattened window has the wrong length");
    Eigen::MatrixXd w(lookback, n_features);
    for (Eigen::Index l = 0; l < lookback; ++l)
        for (Eigen::Index j = 0; j < n_features; ++j) w(l, j) = flat[l * n_features + j];
    return w;
}

Eigen::MatrixXd flatten_windows(const WindowedDataset& w) {
    const auto F = w.n_features();
    Eigen::MatrixXd flat(w.size(), w.lookback * F);
    for (Eigen::Index s = 0; s < w.size(); ++s) flat.row(s) = flatten_window(w.X[std::size_t(s)]).transpose();
    return flat;
}

std::vector<Eigen::MatrixXd> unflatten_windows(const Eigen::MatrixXd& flat, int lookback, Eigen::Index n_features) {
    std::vector<Eigen::MatrixXd> out;
    for (Eigen::Index s = 0; s < flat.rows(); ++s)
        out.push_back(unflatten_window(flat.row(s).transpose(), lookback, n_features));
    return out;
}

} // namespace hlift
