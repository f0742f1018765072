#include "hlift/error.hpp"
#include "hlift/hmd.hpp"
#include "hlift/lilee.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

using namespace hlift;

namespace {

const char* kHeader =
    "Switzerland, Death rates (period 1x1)  Last modified: 01 Jan 2024;  Methods Protocol: v6 (2017)\n"
    "\n"
    "  Year          Age             Female            Male           Total\n";

HmdTable parse(const std::string& body, HmdKind kind = HmdKind::Rates) {
    std::istringstream in(std::string(kHeader) + body);
    return parse_hmd_file(in, kind);
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an hlift::Error");
    return ErrorKind::Io;
}

// Full 0..age_max grid for each year with value f(year, age).
template <class F>
std::string grid(int first, int last, int age_max, F f) {
    std::ostringstream s;
    s.precision(17);
    for (int y = first; y <= last; ++y)
        for (int a = 0; a <= age_max; ++a) s << y << "  " << a << "  0.1  0.1  " << f(y, a) << "\n";
    return s.str();
}

} // namespace

TEST_CASE("HMD rows keep the Total column") {
    const auto t = parse("  1956   64   0.020000  0.030000  0.025000\n");
    REQUIRE(t.records.size() == 1);
    CHECK(t.records[0].year == 1956);
    CHECK(t.records[0].age == 64);
    REQUIRE(t.records[0].total.has_value());
    CHECK(*t.records[0].total == 0.025);
}

TEST_CASE("HMD open age group and missing marker") {
    const auto t = parse("1956 109 0.5 0.5 0.5\n1956 110+ 0.6 0.7 0.65\n1957 0 . . .\n");
    REQUIRE(t.records.size() == 3);
    CHECK(t.records[1].age == 110);
    CHECK(*t.records[1].total == 0.65);
    CHECK_FALSE(t.records[2].total.has_value());
}

TEST_CASE("HMD malformed rows name the line") {
    try {
        parse("1956 0 0.1 0.1 0.1\n1956 1 0.1 0.1\n");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
    CHECK(kind_of([] { parse("1956 0 0.1 0.1 abc\n"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse("1956 x 0.1 0.1 0.1\n"); }) == ErrorKind::Parse);
}

TEST_CASE("HMD out-of-order blocks are structural errors") {
    CHECK(kind_of([] { parse("1957 0 1 1 1\n1956 0 1 1 1\n"); }) == ErrorKind::Structure);
    CHECK(kind_of([] { parse("1956 3 1 1 1\n1956 2 1 1 1\n"); }) == ErrorKind::Structure);
}

TEST_CASE("surface from deaths and exposures") {
    const auto deaths = parse(grid(2000, 2001, 3, [](int, int a) { return a == 1 ? 0.0 : 25.0; }), HmdKind::Deaths);
    const auto expo = parse(grid(2000, 2001, 3, [](int, int) { return 1000.0; }), HmdKind::Exposures);
    SurfaceOptions opts;
    opts.age_max = 3;
    const auto s = build_surface("CHE", deaths, &expo, {2000, 2001}, opts);
    CHECK(s.m(0, 0) == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(s.log_m(0, 0) == doctest::Approx(std::log(0.025 + 1e-10)).epsilon(1e-15));
    CHECK(s.m(1, 1) == 0.0);
    // The epsilon floor: ln(1e-10) = -23.02585...
    CHECK(s.log_m(1, 1) == doctest::Approx(-23.0259).epsilon(1e-5));
    CHECK(std::isfinite(s.log_m.minCoeff()));
}

TEST_CASE("surface drops ages above the cap") {
    const auto rates = parse(grid(2000, 2002, 95, [](int, int a) { return 0.001 * (a + 1); }));
    const auto s = build_surface("SWE", rates, nullptr, {2000, 2002});
    CHECK(s.ages.size() == 91);
    CHECK(s.ages.back() == 90);
    CHECK(s.m.rows() == 91);
    CHECK(s.m(90, 2) == doctest::Approx(0.091));
}

TEST_CASE("zero exposure with deaths is rejected") {
    const auto deaths = parse(grid(2000, 2000, 2, [](int, int) { return 5.0; }), HmdKind::Deaths);
    const auto expo = parse(grid(2000, 2000, 2, [](int, int a) { return a == 2 ? 0.0 : 100.0; }), HmdKind::Exposures);
    SurfaceOptions opts;
    opts.age_max = 2;
    CHECK(kind_of([&] { build_surface("NOR", deaths, &expo, {2000, 2000}, opts); }) == ErrorKind::Data);
    CHECK(kind_of([&] { build_surface("NOR", deaths, nullptr, {2000, 2000}, opts); }) == ErrorKind::Data);
}

TEST_CASE("missing cells: rejected by default, interpolated on request") {
    std::string body = grid(2000, 2002, 2, [](int y, int) { return 0.01 * (y - 1999); });
    body.replace(body.find("2001  1  0.1  0.1  0.02"), 23, "2001  1  0.1  0.1  .");
    const auto rates = parse(body);
    SurfaceOptions opts;
    opts.age_max = 2;
    CHECK(kind_of([&] { build_surface("JPN", rates, nullptr, {2000, 2002}, opts); }) == ErrorKind::Data);

    opts.missing = MissingPolicy::InterpolateYears;
    const auto s = build_surface("JPN", rates, nullptr, {2000, 2002}, opts);
    CHECK(s.m(1, 1) == doctest::Approx(0.02).epsilon(1e-14));
    REQUIRE(s.imputed.size() == 1);
    CHECK(s.imputed[0] == std::pair<int, int>{2001, 1});

    // No neighbour on one side: still a gap.
    std::string edge = grid(2000, 2001, 2, [](int, int) { return 0.01; });
    edge.replace(edge.find("2001  2  0.1  0.1  0.01"), 23, "2001  2  0.1  0.1  .");
    CHECK(kind_of([&] { build_surface("JPN", parse(edge), nullptr, {2000, 2001}, opts); }) == ErrorKind::Data);
}

TEST_CASE("synthetic cluster is deterministic under a seed") {
    const auto truth = test::small_truth(7);
    const auto a = synthesize_cluster(truth, 0.01, 99);
    const auto b = synthesize_cluster(truth, 0.01, 99);
    const auto c = synthesize_cluster(truth, 0.01, 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].m == b[i].m);
        CHECK(a[i].log_m == b[i].log_m);
    }
    CHECK(a[0].m != c[0].m);
}

TEST_CASE("zero-noise synthesis evaluates the model surface") {
    const auto truth = test::small_truth(3);
    const auto d = synthesize_cluster(truth, 0.0, 1);
    for (Eigen::Index i = 0; i < truth.n_countries(); ++i) {
        const Eigen::MatrixXd expect = truth.fitted_log_rates(i);
        CHECK((d[std::size_t(i)].log_m - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("linear K with uniform loadings gives linear log rates") {
    LiLeeParams p;
    p.countries = {"A", "B"};
    for (int a = 0; a <= 90; ++a) p.ages.push_back(a);
    for (int y = 2000; y < 2010; ++y) p.years.push_back(y);
    p.alpha = Eigen::MatrixXd::Constant(91, 2, -5.0);
    p.B = Eigen::VectorXd::Constant(91, 1.0 / 91.0);
    p.K.resize(10);
    for (int t = 0; t < 10; ++t) p.K[t] = 4.5 - t; // slope -1, sums to zero
    p.b = Eigen::MatrixXd::Constant(91, 2, 1.0 / 91.0);
    p.k = Eigen::MatrixXd::Zero(10, 2);
    const auto d = synthesize_cluster(p, 0.0, 5);
    for (const auto& s : d.surfaces()) {
        const Eigen::MatrixXd steps = s.log_m.rightCols(9) - s.log_m.leftCols(9);
        CHECK((steps.array() + 1.0 / 91.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rates round trip through the cluster CSV") {
    const auto truth = test::small_truth(11);
    const auto d = synthesize_cluster(truth, 0.0, 2);
    std::stringstream csv;
    write_cluster_csv(csv, d);
    const auto back = read_cluster_csv(csv);
    REQUIRE(back.countries() == d.countries());
    REQUIRE(back.years() == d.years());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK((back[i].log_m - truth.fitted_log_rates(Eigen::Index(i))).cwiseAbs().maxCoeff() <= 1e-12);
        const auto& s = back[i];
        for (Eigen::Index t = 0; t < s.m.cols(); ++t)
            for (Eigen::Index a = 0; a < s.m.rows(); ++a)
                if (s.m(a, t) > 0.0)
                    CHECK(std::abs(std::exp(s.log_m(a, t)) - kLogEpsilon - s.m(a, t)) <= 1e-12 * s.m(a, t));
    }
}

TEST_CASE("cluster invariants") {
    const auto d = synthesize_cluster(test::small_truth(1), 0.0, 1);
    CHECK(kind_of([&] { ClusterDataset({d[0]}); }) == ErrorKind::Shape);
    auto shifted = d[1];
    shifted.years.front() -= 1;
    CHECK(kind_of([&] { ClusterDataset({d[0], shifted}); }) == ErrorKind::Shape);

    const auto p = d.permuted({2, 0, 1});
    CHECK(p.countries() == std::vector<std::string>{d[2].country, d[0].country, d[1].country});
    const auto s = d.slice_years({1990, 1999});
    CHECK(s.years().size() == 10);
    CHECK(s[0].m == d[0].m.middleCols(9, 10));
}
