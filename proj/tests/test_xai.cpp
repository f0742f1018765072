#include "hlift/error.hpp"
#include "hlift/xai.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace hlift;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// One LSTM unit and a unit head. Gate biases fix i and o open; the forget bias
// decides whether the cell keeps (+40) or drops (-40) its past.
NetworkParams gated_unit(Index F, double forget_bias, double g_scale) {
    Architecture a;
    a.input_size = F;
    a.hidden = {1};
    a.output_size = 1;
    a.dropout_rate = 0.0;
    NetworkParams n = init_network(a, 1).zeros_like();
    auto& l = n.layers[0];
    l.b[0] = 40.0;
    l.b[1] = forget_bias;
    l.b[3] = 40.0;
    l.Wx.row(2).setConstant(g_scale);
    n.head.W(0, 0) = 1.0;
    return n;
}

std::vector<MatrixXd> random_windows(int n, Index L, Index F, std::uint64_t seed) {
    std::vector<MatrixXd> w;
    for (int s = 0; s < n; ++s) w.push_back(test::random_matrix(L, F, seed + std::uint64_t(s)));
    return w;
}

} // namespace

TEST_CASE("exact Shapley values of a linear model") {
    const VectorXd w = test::random_vector(10, 1);
    const VectorXd x = test::random_vector(10, 2);
    const VectorXd b = test::random_vector(10, 3);
    const ScalarModel f = [&](const VectorXd& z) { return w.dot(z) + 4.0; };
    const VectorXd phi = exact_shapley(f, x, b);
    CHECK((phi - w.cwiseProduct(x - b)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("Shapley axioms") {
    const ScalarModel constant = [](const VectorXd&) { return 2.5; };
    CHECK(exact_shapley(constant, VectorXd::Ones(6), VectorXd::Zero(6)).cwiseAbs().maxCoeff() == 0.0);

    const ScalarModel product = [](const VectorXd& z) { return z[0] * z[1]; };
    const VectorXd phi = exact_shapley(product, VectorXd::Ones(2), VectorXd::Zero(2));
    CHECK(phi[0] == doctest::Approx(0.5));
    CHECK(phi[1] == doctest::Approx(0.5));

    // A feature the model never reads gets nothing.
    const ScalarModel partial = [](const VectorXd& z) { return std::sin(z[0]) * z[2]; };
    CHECK(exact_shapley(partial, test::random_vector(4, 7), test::random_vector(4, 8))[1] == 0.0);
}

TEST_CASE("kernel SHAP local accuracy and agreement with enumeration") {
    const MatrixXd bg = test::random_matrix(30, 8, 11);
    const MatrixXd xs = test::random_matrix(4, 8, 12);
    const ScalarModel f = [](const VectorXd& z) {
        return std::tanh(z[0] * z[1]) + 0.5 * z[2] * z[2] - z[3] + std::sin(z[4] + z[5]) + 0.1 * z[6] * z[7];
    };
    ShapOptions exact;
    exact.exact = true;
    const auto e = kernel_shap(f, bg, xs, exact);
    ShapOptions sampled;
    sampled.n_coalitions = 256;
    sampled.seed = 3;
    const auto s = kernel_shap(f, bg, xs, sampled);
    CHECK(e.base_value == f(bg.colwise().mean().transpose()));
    for (Index r = 0; r < xs.rows(); ++r) {
        CHECK(std::abs(e.phi.row(r).sum() - (e.predictions[r] - e.base_value)) <= 1e-10);
        CHECK(std::abs(s.phi.row(r).sum() - (s.predictions[r] - s.base_value)) <= 1e-10);
        const double rel = (s.phi.row(r) - e.phi.row(r)).norm() / e.phi.row(r).norm();
        CHECK(rel <= 0.05);
    }
}

TEST_CASE("sampled kernel SHAP with a partial budget") {
    const MatrixXd bg = test::random_matrix(20, 12, 21);
    const MatrixXd xs = test::random_matrix(3, 12, 22);
    const VectorXd w = test::random_vector(12, 23);
    const ScalarModel f = [&](const VectorXd& z) { return w.dot(z) + 0.2 * z[0] * z[1]; };
    ShapOptions o;
    o.n_coalitions = 600;
    o.seed = 1;
    const auto s = kernel_shap(f, bg, xs, o);
    o.exact = true;
    const auto e = kernel_shap(f, bg, xs, o);
    for (Index r = 0; r < xs.rows(); ++r) {
        CHECK(std::abs(s.phi.row(r).sum() - (s.predictions[r] - s.base_value)) <= 1e-10);
        const double rel = (s.phi.row(r) - e.phi.row(r)).norm() / e.phi.row(r).norm();
        MESSAGE("sample ", r, ": relative error ", rel);
        CHECK(rel <= 0.05);
    }
    o.exact = false;
    CHECK(kernel_shap(f, bg, xs, o).phi == s.phi);
}

TEST_CASE("kernel SHAP over network windows") {
    const NetworkParams net = gated_unit(2, 40.0, 0.3);
    const auto bg = random_windows(10, 3, 2, 30);
    const auto xs = random_windows(2, 3, 2, 40);
    ShapOptions o;
    o.exact = true;
    const auto r = kernel_shap(net, bg, xs, 0, o);
    CHECK(r.phi.cols() == 6);
    for (Index s = 0; s < 2; ++s)
        CHECK(r.predictions[s] == doctest::Approx(forward(net, xs[std::size_t(s)])[0]).epsilon(1e-14));
    CHECK_THROWS_AS(kernel_shap(net, bg, xs, 1, o), Error);
}

TEST_CASE("saliency of a net that reads only the last lag") {
    const NetworkParams net = gated_unit(3, -40.0, 0.5);
    const auto p = temporal_saliency(net, random_windows(20, 10, 3, 50));
    CHECK(p.importance.size() == 10);
    CHECK(p.importance.sum() == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(p.importance[9] >= 99.0);
}

TEST_CASE("saliency of a symmetric accumulator is uniform") {
    // Forget gate open and a tiny cell kernel: the cell sums near-linear inputs.
    const NetworkParams net = gated_unit(2, 40.0, 1e-4);
    const auto windows = random_windows(10, 5, 2, 60);
    const auto p = temporal_saliency(net, windows);
    CHECK((p.importance.array() - 20.0).abs().maxCoeff() <= 1e-4);

    auto doubled = windows;
    doubled.insert(doubled.end(), windows.begin(), windows.end());
    CHECK((temporal_saliency(net, doubled).importance - p.importance).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("saliency of a zero network is degenerate") {
    NetworkParams net = gated_unit(2, 40.0, 0.5);
    net.head.W.setZero();
    try {
        temporal_saliency(net, random_windows(3, 4, 2, 70));
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Degenerate);
    }
}

TEST_CASE("country influence aggregation") {
    MatrixXd phi(2, 4);
    // Sample rows, columns l * F + j with L = 2, F = 2.
    phi << 1, -2, 3, -4,
           -1, 0, 1, 2;
    const VectorXd s = aggregate_country_influence(phi, 2, 2);
    CHECK(s[0] == doctest::Approx((1 + 3 + 1 + 1) / 4.0));
    CHECK(s[1] == doctest::Approx((2 + 4 + 0 + 2) / 4.0));
    CHECK_THROWS_AS(aggregate_country_influence(phi, 3, 2), Error);
}

TEST_CASE("explainability CSV layouts") {
    SaliencyProfile p{VectorXd::LinSpaced(3, 10.0, 50.0)};
    p.importance[1] = 40.0;
    std::ostringstream a;
    write_saliency_csv(a, p);
    CHECK(a.str() == "lag,importance_pct\nt-1,50\nt-2,40\nt-3,10\n");
    std::ostringstream b;
    VectorXd v(2);
    v << 0.5, 0.25;
    write_influence_csv(b, v, {"k_CHE", "k_FRA"});
    CHECK(b.str() == "factor,score\nk_CHE,0.5\nk_FRA,0.25\n");
}
