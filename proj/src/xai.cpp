#include "hlift/xai.hpp"

#include "hlift/error.hpp"
#include "hlift/io.hpp"
#include "hlift/log.hpp"
#include "hlift/rng.hpp"
#include "hlift/tensor_prep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace hlift {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SaliencyProfile temporal_saliency(const NetworkParams& net, const std::vector<MatrixXd>& windows, Index output) {
    require(!windows.empty(), ErrorKind::Domain, "saliency needs at least one window");
    const Index L = windows.front().rows();
    VectorXd acc = VectorXd::Zero(L);
    for (const auto& w : windows) {
        require(w.rows() == L, ErrorKind::Shape, "all windows must share one lookback");
        acc += input_gradient(net, w, output).cwiseAbs().rowwise().mean();
    }
    acc /= double(windows.size());
    const double total = acc.sum();
    if (!(total > 0.0)) fail(ErrorKind::Degenerate, "every input gradient is zero; saliency is undefined");
    return {100.0 * acc / total};
}

// ---- Shapley values -----------------------------------------------------------

namespace {

VectorXd blend(const VectorXd& x, const VectorXd& ref, const std::vector<char>& in) {
    VectorXd z = ref;
    for (std::size_t j = 0; j < in.size(); ++j)
        if (in[j]) z[Index(j)] = x[Index(j)];
    return z;
}

double binomial(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

struct Coalition {
    std::vector<char> in;
    double weight = 0.0;
};

// Coalition design of the kernel explainer: whole subset sizes are enumerated
// (smallest and largest first) while the budget covers them, the rest sampled
// from the Shapley kernel with complement pairing.
std::vector<Coalition> design_coalitions(int d, long budget, Rng& rng) {
    std::vector<Coalition> out;
    const double max_coalitions = std::ldexp(1.0, d) - 2.0;
    if (double(budget) > max_coalitions) budget = long(max_coalitions);
    const int n_sizes = d / 2; // ceil((d - 1) / 2)
    const int n_paired = (d - 1) / 2;
    std::vector<double> w(std::size_t(n_sizes) + 1, 0.0);
    for (int k = 1; k <= n_sizes; ++k) {
        w[std::size_t(k)] = double(d - 1) / (double(k) * double(d - k));
        if (k <= n_paired) w[std::size_t(k)] *= 2.0;
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= wsum;

    long remaining = budget;
    double weight_left = 1.0;
    int k = 1;
    for (; k <= n_sizes; ++k) {
        const bool paired = k <= n_paired;
        const double n_subsets = binomial(d, k) * (paired ? 2.0 : 1.0);
        if (double(remaining) * w[std::size_t(k)] / weight_left < n_subsets - 1e-8) break;
        const double each = w[std::size_t(k)] / n_subsets;
        std::vector<char> sel(std::size_t(d), 0);
        std::fill(sel.begin(), sel.begin() + k, 1);
        do {
            out.push_back({sel, each});
            if (paired) {
                std::vector<char> comp(sel.size());
                for (std::size_t j = 0; j < sel.size(); ++j) comp[j] = !sel[j];
                out.push_back({std::move(comp), each});
            }
        } while (std::prev_permutation(sel.begin(), sel.end()));
        remaining -= long(std::llround(n_subsets));
        weight_left -= w[std::size_t(k)];
    }
    if (k > n_sizes || remaining <= 0 || weight_left <= 1e-12) return out;

    // Sample the sizes that could not be enumerated.
    std::vector<double> rest;
    for (int j = k; j <= n_sizes; ++j) rest.push_back(w[std::size_t(j)]);
    std::discrete_distribution<int> pick_size(rest.begin(), rest.end());
    std::map<std::vector<char>, std::size_t> seen;
    const std::size_t first_sampled = out.size();
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    auto add = [&](std::vector<char> in) {
        auto [it, fresh] = seen.try_emplace(in, out.size());
        if (fresh) out.push_back({std::move(in), 1.0});
        else out[it->second].weight += 1.0;
    };
    while (remaining > 0) {
        const int size = k + pick_size(rng);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<char> in(std::size_t(d), 0);
        for (int j = 0; j < size; ++j) in[std::size_t(order[std::size_t(j)])] = 1;
        --remaining;
        if (size <= n_paired && remaining > 0) {
            std::vector<char> comp(in.size());
            for (std::size_t j = 0; j < in.size(); ++j) comp[j] = !in[j];
            add(std::move(comp));
            --remaining;
        }
        add(std::move(in));
    }
    double sampled = 0.0;
    for (std::size_t i = first_sampled; i < out.size(); ++i) sampled += out[i].weight;
    for (std::size_t i = first_sampled; i < out.size(); ++i) out[i].weight *= weight_left / sampled;
    return out;
}

// Weighted least squares with sum(phi) = total imposed by eliminating the last
// attribution.
VectorXd solve_constrained(const std::vector<Coalition>& design, const VectorXd& v, double base, double total,
                           int d) {
    const Index m = Index(design.size());
    const Index p = d - 1;
    MatrixXd X(m, p);
    VectorXd y(m), w(m);
    for (Index i = 0; i < m; ++i) {
        const auto& in = design[std::size_t(i)].in;
        const double last = in[std::size_t(d - 1)] ? 1.0 : 0.0;
        for (Index j = 0; j < p; ++j) X(i, j) = (in[std::size_t(j)] ? 1.0 : 0.0) - last;
        y[i] = v[i] - base - last * total;
        w[i] = design[std::size_t(i)].weight;
    }
    MatrixXd A = X.transpose() * w.asDiagonal() * X;
    const VectorXd rhs = X.transpose() * (w.array() * y.array()).matrix();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    VectorXd head;
    if (qr.rank() < p) {
        log::warn("kernel SHAP system is singular; solving with ridge 1e-8");
        A.diagonal().array() += 1e-8;
        head = A.ldlt().solve(rhs);
    } else {
        head = qr.solve(rhs);
    }
    VectorXd phi(d);
    phi.head(p) = head;
    phi[d - 1] = total - head.sum();
    return phi;
}

} // namespace

VectorXd exact_shapley(const ScalarModel& f, const VectorXd& x, const VectorXd& reference) {
    const Index d = x.size();
    require(d >= 1 && d <= 20, ErrorKind::Domain, "exact Shapley enumeration supports 1 <= d <= 20");
    require(reference.size() == d, ErrorKind::Shape, "reference and sample sizes differ");
    const std::size_t n = std::size_t(1) << d;
    std::vector<double> value(n);
    std::vector<char> in(static_cast<std::size_t>(d));
    for (std::size_t mask = 0; mask < n; ++mask) {
        for (Index j = 0; j < d; ++j) in[std::size_t(j)] = char((mask >> j) & 1u);
        value[mask] = f(blend(x, reference, in));
    }
    // |S|! (d - |S| - 1)! / d!
    std::vector<double> weight(static_cast<std::size_t>(d));
    for (Index s = 0; s < d; ++s)
        weight[std::size_t(s)] = std::exp(std::lgamma(double(s) + 1.0) + std::lgamma(double(d - s)) - std::lgamma(double(d) + 1.0));
    VectorXd phi = VectorXd::Zero(d);
    for (std::size_t mask = 0; mask < n; ++mask) {
        const int size = __builtin_popcountll(mask);
        for (Index j = 0; j < d; ++j) {
            const std::size_t bit = std::size_t(1) << j;
            if (mask & bit) continue;
            phi[j] += weight[std::size_t(size)] * (value[mask | bit] - value[mask]);
        }
    }
    return phi;
}

ShapReport kernel_shap(const ScalarModel& f, const MatrixXd& background, const MatrixXd& test, const ShapOptions& opts) {
    require(background.rows() >= 1, ErrorKind::Domain, "SHAP background is empty");
    require(test.rows() >= 1, ErrorKind::Domain, "no samples to explain");
    require(background.cols() == test.cols(), ErrorKind::Shape, "background and test widths differ");
    const int d = int(test.cols());
    require(d >= 1, ErrorKind::Shape, "SHAP needs at least one feature");

    const VectorXd ref = background.colwise().mean();
    ShapReport r;
    r.base_value = f(ref);
    r.phi.resize(test.rows(), d);
    r.predictions.resize(test.rows());

    std::vector<Coalition> design;
    if (!opts.exact && d >= 2) {
        Rng rng(derive_seed(opts.seed, streams::shap));
        const long budget = opts.n_coalitions > 0 ? opts.n_coalitions : 2L * d + 2048;
        design = design_coalitions(d, budget, rng);
    }

    for (Index s = 0; s < test.rows(); ++s) {
        const VectorXd x = test.row(s).transpose();
        const double fx = f(x);
        r.predictions[s] = fx;
        if (opts.exact) {
            r.phi.row(s) = exact_shapley(f, x, ref).transpose();
        } else if (d == 1) {
            r.phi(s, 0) = fx - r.base_value;
        } else {
            VectorXd v(Index(design.size()));
            for (std::size_t i = 0; i < design.size(); ++i) v[Index(i)] = f(blend(x, ref, design[i].in));
            r.phi.row(s) = solve_constrained(design, v, r.base_value, fx - r.base_value, d).transpose();
        }
    }
    return r;
}

ShapReport kernel_shap(const NetworkParams& net, const std::vector<MatrixXd>& background,
                       const std::vector<MatrixXd>& test, Index output, const ShapOptions& opts) {
    require(!background.empty() && !test.empty(), ErrorKind::Domain, "SHAP needs background and test windows");
    require(output >= 0 && output < net.output_size(), ErrorKind::Domain, "output index out of range");
    const int L = int(background.front().rows());
    const Index F = background.front().cols();
    auto stack = [&](const std::vector<MatrixXd>& ws) {
        MatrixXd m(Index(ws.size()), L * F);
        for (std::size_t i = 0; i < ws.size(); ++i) {
            require(ws[i].rows() == L && ws[i].cols() == F, ErrorKind::Shape, "window shapes differ");
            m.row(Index(i)) = flatten_window(ws[i]).transpose();
        }
        return m;
    };
    const ScalarModel f = [&](const VectorXd& flat) { return forward(net, unflatten_window(flat, L, F))[output]; };
    return kernel_shap(f, stack(background), stack(test), opts);
}

VectorXd aggregate_country_influence(const MatrixXd& phi, int lookback, Index n_features) {
    require(lookback >= 1 && n_features >= 1, ErrorKind::Domain, "lookback and feature count must be >= 1");
    require(phi.cols() == lookback * n_features, ErrorKind::Shape, "attribution width must equal L * F");
    require(phi.rows() >= 1, ErrorKind::Domain, "no attributions to aggregate");
    VectorXd score = VectorXd::Zero(n_features);
    for (Index s = 0; s < phi.rows(); ++s)
        for (int l = 0; l < lookback; ++l)
            for (Index j = 0; j < n_features; ++j) score[j] += std::abs(phi(s, l * n_features + j));
    return score / (double(phi.rows()) * lookback);
}

void write_saliency_csv(std::ostream& out, const SaliencyProfile& p) {
    const Index L = p.importance.size();
    out << "lag,importance_pct\n";
    for (Index k = 1; k <= L; ++k) out << "t-" << k << ',' << io::format_double(p.importance[L - k]) << '\n';
}

void write_influence_csv(std::ostream& out, const VectorXd& scores, const std::vector<std::string>& names) {
    require(Index(names.size()) == scores.size(), ErrorKind::Shape, "one name per score expected");
    out << "factor,score\n";
    for (Index j = 0; j < scores.size(); ++j) out << names[std::size_t(j)] << ',' << io::format_double(scores[j]) << '\n';
}

} // namespace hlift
