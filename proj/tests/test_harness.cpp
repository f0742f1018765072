#include "hlift/error.hpp"
#include "hlift/harness.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace hlift;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

HybridFitOptions quick_options(int lookback = 10) {
    HybridFitOptions o;
    o.lookback = lookback;
    o.hidden = {6};
    o.dropout_rate = 0.1;
    o.train.max_epochs = 20;
    o.train.patience = 5;
    o.train.learning_rate = 1e-2;
    o.train.seed = 7;
    return o;
}

} // namespace

TEST_CASE("RMSE and improvement percentage") {
    VectorXd a(3), p(3);
    a << 1, 2, 3;
    p << 2, 2, 5;
    CHECK(rmse(a, p) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
    CHECK(rmse(a, a) == 0.0);
    CHECK_THROWS_AS(rmse(a, VectorXd::Zero(2)), Error);

    CHECK(improvement_pct(2.0, 1.0) == 50.0);
    CHECK(improvement_pct(1.0, 2.0) == -100.0);
    CHECK(improvement_pct(1.5, 1.5) == 0.0);
    CHECK(improvement_pct(0.0, 0.0) == 0.0);
}

TEST_CASE("linear baseline bias correction") {
    // Exact drift -1 on K until the split, then -1.5: the MBC is -0.5.
    FactorPanel lv;
    for (int y = 2000; y <= 2015; ++y) lv.years.push_back(y);
    lv.values = MatrixXd::Zero(16, 2);
    for (Index t = 1; t < 16; ++t) lv.values(t, 0) = lv.values(t - 1, 0) + (lv.years[std::size_t(t)] <= 2010 ? -1.0 : -1.5);
    lv.values.col(1) = test::random_vector(16, 3);
    const auto b = fit_linear_baseline(lv, 2010);
    CHECK(b.model.common.drift == doctest::Approx(-1.0));
    CHECK(b.mbc[0] == doctest::Approx(-0.5).epsilon(1e-14));

    // Bias correction makes the recursive K forecast exact here.
    const auto f = linear_validation_forecast(b, lv, 2010, ValidationMode::Recursive);
    CHECK(f.years.front() == 2011);
    CHECK((f.values.col(0) - lv.values.col(0).tail(5)).cwiseAbs().maxCoeff() <= 1e-12);
    const auto raw = linear_validation_forecast(b, lv, 2010, ValidationMode::Recursive, false);
    CHECK(raw.values(4, 0) == doctest::Approx(lv.values(10, 0) - 5.0));

    // The mean one-step residual after correction is zero by construction.
    const auto one = linear_validation_forecast(b, lv, 2010, ValidationMode::OneStep);
    CHECK((lv.values.bottomRows(5) - one.values).colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(fit_linear_baseline(lv, 2015), Error);
    CHECK_THROWS_AS(fit_linear_baseline(lv, 1990), Error);
}

TEST_CASE("validation against itself and label order") {
    const auto levels = fit_lilee(regime_cluster(SpecificRegime::UnitRootMomentum, 4)).params.factors();
    ValidationConfig cfg;
    cfg.hybrid = quick_options();
    HybridFit fit;
    const auto r = validate(levels, {"A", "B", "C"}, cfg, &fit);
    REQUIRE(r.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& row = r.rows[i];
        const Index col = Index(i) + 1;
        CHECK(row.rmse_lilee == rmse(r.actual.values.col(col), r.lilee.values.col(col)));
        CHECK(row.rmse_hybrid == rmse(r.actual.values.col(col), r.hybrid.values.col(col)));
        CHECK(row.improvement_pct == improvement_pct(row.rmse_lilee, row.rmse_hybrid));
        // Swapping the two model labels flips the sign in the mirrored formula.
        CHECK(improvement_pct(row.rmse_hybrid, row.rmse_lilee) * row.rmse_hybrid ==
              doctest::Approx(-row.improvement_pct * row.rmse_lilee));
    }
    CHECK(r.actual.years.front() == 2012);
    CHECK(r.actual.years.back() == 2020);

    // The same trained model twice: a fixed input gives the same output.
    const auto again = validate(levels, {"A", "B", "C"}, fit.model, cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.rows[i].rmse_hybrid == r.rows[i].rmse_hybrid);

    cfg.target = RmseTarget::CommonFactor;
    const auto k = validate(levels, {"A", "B", "C"}, fit.model, cfg);
    REQUIRE(k.rows.size() == 1);
    CHECK(k.rows[0].country == "K");
    CHECK_THROWS_AS(validate(levels, {"A", "B"}, fit.model, cfg), Error);
}

TEST_CASE("identical forecasts give zero improvement") {
    VectorXd a = test::random_vector(9, 1), p = test::random_vector(9, 2);
    CHECK(improvement_pct(rmse(a, p), rmse(a, p)) == 0.0);
}

TEST_CASE("ablation variants") {
    const auto levels = fit_lilee(regime_cluster(SpecificRegime::UnitRootMomentum, 5)).params.factors();
    ValidationConfig cfg;
    cfg.hybrid = quick_options();
    const auto fit = fit_hybrid(levels, cfg.hybrid);
    const auto rows = ablate(levels, cfg, &fit.model);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].variant == "baseline");
    CHECK(rows[0].degradation_pct == 0.0);
    CHECK(rows[1].variant == "no_differences");
    CHECK(rows[2].variant == "no_mbc");
    CHECK(rows[2].degradation_pct == doctest::Approx((rows[2].rmse - rows[0].rmse) / rows[0].rmse * 100.0));
    // Retraining the baseline inside ablate matches the supplied model.
    CHECK(ablate(levels, cfg)[0].rmse == rows[0].rmse);

    // A model with no bias to remove: no_mbc equals the baseline.
    HybridModel unbiased = fit.model;
    unbiased.mbc.setZero();
    const auto same = ablate(levels, cfg, &unbiased);
    CHECK(same[2].rmse == same[0].rmse);
    CHECK(same[2].degradation_pct == 0.0);
}

TEST_CASE("lookback sweep sample counts") {
    const auto levels = fit_lilee(regime_cluster(SpecificRegime::Stationary, 6)).params.factors();
    ValidationConfig cfg;
    cfg.hybrid = quick_options();
    const auto rows = lookback_sweep(levels, cfg, {5, 10, 15, 70});
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.n_validation == 9);
    CHECK(rows[0].n_train - rows[1].n_train == 5);
    CHECK(rows[1].n_train - rows[2].n_train == 5);
    const auto again = lookback_sweep(levels, cfg, {5, 10, 15});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(again[i].rmse_common == rows[i].rmse_common);
        CHECK(again[i].rmse_specific == rows[i].rmse_specific);
    }
}

TEST_CASE("regime clusters carry the requested specific behaviour") {
    const auto data = regime_cluster(SpecificRegime::UnitRootMomentum, 1);
    CHECK(data.size() == 3);
    CHECK(regime_cluster(SpecificRegime::UnitRootMomentum, 1, 2).size() == 2);
}

TEST_CASE("harness CSV layouts") {
    std::ostringstream b;
    write_benchmark_csv(b, {{"CHE", 2.0, 1.0, 50.0}});
    CHECK(b.str() == "country,rmse_lilee,rmse_hybrid,improvement_pct\nCHE,2,1,50\n");
    std::ostringstream a;
    write_ablation_csv(a, {{"baseline", 0.5, 0.0}});
    CHECK(a.str() == "variant,rmse_K,degradation_pct\nbaseline,0.5,0\n");
}
