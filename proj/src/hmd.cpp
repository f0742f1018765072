#include "hlift/hmd.hpp"

#include "hlift/error.hpp"
#include "hlift/log.hpp"
#include "hlift/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <cctype>
#include <sstream>

namespace hlift {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<int> parse_int(std::string_view tok) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view tok) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string line_msg(std::size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

} // namespace

HmdTable parse_hmd_file(std::istream& in, HmdKind kind) {
    HmdTable table;
    table.kind = kind;

    std::string line;
    std::size_t line_no = 0;
    bool in_data = false;
    int prev_year = 0;
    int prev_age = -1;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto toks = split_ws(line);
        if (toks.empty()) continue;

        auto year = parse_int(toks[0]);
        if (!in_data) {
            if (!year) continue; // header
            in_data = true;
        }
        if (!year) fail(ErrorKind::Parse, line_msg(line_no, "expected a year, got '" + std::string(toks[0]) + "'"));
        if (toks.size() != 5)
            fail(ErrorKind::Parse, line_msg(line_no, "expected 5 columns (Year Age Female Male Total), got " +
                                                         std::to_string(toks.size())));

        std::string_view age_tok = toks[1];
        if (age_tok.ends_with('+')) age_tok.remove_suffix(1);
        auto age = parse_int(age_tok);
        if (!age || *age < 0) fail(ErrorKind::Parse, line_msg(line_no, "bad age '" + std::string(toks[1]) + "'"));

        HmdRecord rec{*year, *age, std::nullopt};
        if (toks[4] != ".") {
            rec.total = parse_double(toks[4]);
            if (!rec.total) fail(ErrorKind::Parse, line_msg(line_no, "bad Total value '" + std::string(toks[4]) + "'"));
        }

        if (!table.records.empty()) {
            if (rec.year < prev_year)
                fail(ErrorKind::Structure, line_msg(line_no, "year " + std::to_string(rec.year) + " follows " +
                                                                 std::to_string(prev_year)));
            if (rec.year == prev_year && rec.age <= prev_age)
                fail(ErrorKind::Structure, line_msg(line_no, "age " + std::to_string(rec.age) + " follows " +
                                                                 std::to_string(prev_age) + " in year " +
                                                                 std::to_string(rec.year)));
        }
        prev_year = rec.year;
        prev_age = rec.age;
        table.records.push_back(rec);
    }
    return table;
}

HmdTable read_hmd_file(const std::filesystem::path& path, HmdKind kind) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        return parse_hmd_file(in, kind);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

namespace {

using CellMap = std::map<std::pair<int, int>, std::optional<double>>;

CellMap index_table(const HmdTable& t) {
    CellMap cells;
    for (const auto& r : t.records) cells[{r.year, r.age}] = r.total;
    return cells;
}

std::optional<double> lookup(const CellMap& cells, int year, int age) {
    auto it = cells.find({year, age});
    if (it == cells.end()) return std::nullopt;
    return it->second;
}

void fill_log(MortalitySurface& s) {
    s.log_m = (s.m.array() + kLogEpsilon).log().matrix();
}

} // namespace

MortalitySurface build_surface(const std::string& country, const HmdTable& primary,
                               const HmdTable* exposures, YearRange years,
                               const SurfaceOptions& opts) {
    require(years.last >= years.first, ErrorKind::Domain, "empty year range");
    require(opts.age_max >= 1, ErrorKind::Domain, "age_max must be >= 1");
    const bool deaths_mode = primary.kind == HmdKind::Deaths;
    require(primary.kind != HmdKind::Exposures, ErrorKind::Domain,
            country + ": primary table must hold deaths or rates");
    if (deaths_mode) {
        require(exposures != nullptr, ErrorKind::Data, country + ": deaths table requires exposures");
        require(exposures->kind == HmdKind::Exposures, ErrorKind::Domain,
                country + ": second table must hold exposures");
    }

    const CellMap prim = index_table(primary);
    const CellMap expo = deaths_mode ? index_table(*exposures) : CellMap{};

    const int n_ages = opts.age_max + 1;
    const int n_years = years.size();

    MortalitySurface s;
    s.country = country;
    s.ages.resize(n_ages);
    for (int a = 0; a < n_ages; ++a) s.ages[a] = a;
    s.years.resize(n_years);
    for (int t = 0; t < n_years; ++t) s.years[t] = years.first + t;
    s.m.setZero(n_ages, n_years);

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> known(n_ages, n_years);
    known.setConstant(true);

    for (int t = 0; t < n_years; ++t) {
        const int year = s.years[t];
        for (int a = 0; a < n_ages; ++a) {
            auto v = lookup(prim, year, a);
            if (!v) {
                known(a, t) = false;
                continue;
            }
            double rate = *v;
            if (deaths_mode) {
                auto e = lookup(expo, year, a);
                if (!e) {
                    known(a, t) = false;
                    continue;
                }
                if (*v < 0.0 || *e < 0.0)
                    fail(ErrorKind::Data, country + ": negative deaths or exposure at year " +
                                              std::to_string(year) + ", age " + std::to_string(a));
                if (*e == 0.0) {
                    if (*v > 0.0)
                        fail(ErrorKind::Data, country + ": zero exposure with " + std::to_string(*v) +
                                                  " deaths at year " + std::to_string(year) + ", age " +
                                                  std::to_string(a));
                    rate = 0.0;
                } else {
                    rate = *v / *e;
                }
            }
            if (rate < 0.0)
                fail(ErrorKind::Data, country + ": negative rate at year " + std::to_string(year) + ", age " +
                                          std::to_string(a));
            s.m(a, t) = rate;
        }
    }

    for (int a = 0; a < n_ages; ++a) {
        for (int t = 0; t < n_years; ++t) {
            if (known(a, t)) continue;
            const std::string where = country + ": missing cell at year " + std::to_string(s.years[t]) +
                                      ", age " + std::to_string(a);
            if (opts.missing == MissingPolicy::Reject) fail(ErrorKind::Data, where);
            int lo = t - 1;
            while (lo >= 0 && !known(a, lo)) --lo;
            int hi = t + 1;
            while (hi < n_years && !known(a, hi)) ++hi;
            if (lo < 0 || hi >= n_years) fail(ErrorKind::Data, where + " (no neighbour to interpolate from)");
            const double w = double(t - lo) / double(hi - lo);
            s.m(a, t) = (1.0 - w) * s.m(a, lo) + w * s.m(a, hi);
            s.imputed.emplace_back(s.years[t], a);
        }
    }
    if (!s.imputed.empty())
        log::warn(country, ": interpolated ", s.imputed.size(), " missing cells along years");

    fill_log(s);
    return s;
}

MortalitySurface surface_from_rates(const std::string& country, int first_year, const Eigen::MatrixXd& m) {
    require(m.rows() >= 1 && m.cols() >= 1, ErrorKind::Shape, "empty rate matrix");
    require((m.array() >= 0.0).all() && m.allFinite(), ErrorKind::Data, country + ": rates must be finite and >= 0");
    MortalitySurface s;
    s.country = country;
    s.ages.resize(m.rows());
    for (Eigen::Index a = 0; a < m.rows(); ++a) s.ages[a] = int(a);
    s.years.resize(m.cols());
    for (Eigen::Index t = 0; t < m.cols(); ++t) s.years[t] = first_year + int(t);
    s.m = m;
    fill_log(s);
    return s;
}

ClusterDataset::ClusterDataset(std::vector<MortalitySurface> surfaces) : surfaces_(std::move(surfaces)) {
    require(surfaces_.size() >= 2, ErrorKind::Shape, "a cluster needs at least two countries");
    const auto& ref = surfaces_.front();
    require(!ref.years.empty() && !ref.ages.empty(), ErrorKind::Shape, "empty surface");
    for (std::size_t t = 1; t < ref.years.size(); ++t)
        require(ref.years[t] == ref.years[t - 1] + 1, ErrorKind::Shape, "years must be contiguous");
    for (const auto& s : surfaces_) {
        require(s.ages == ref.ages && s.years == ref.years, ErrorKind::Shape,
                s.country + ": age/year grid differs from " + ref.country);
        require(s.m.rows() == Eigen::Index(ref.ages.size()) && s.m.cols() == Eigen::Index(ref.years.size()) &&
                    s.log_m.rows() == s.m.rows() && s.log_m.cols() == s.m.cols(),
                ErrorKind::Shape, s.country + ": matrix shape does not match its grid");
    }
}

std::vector<std::string> ClusterDataset::countries() const {
    std::vector<std::string> out;
    out.reserve(surfaces_.size());
    for (const auto& s : surfaces_) out.push_back(s.country);
    return out;
}

ClusterDataset ClusterDataset::permuted(const std::vector<std::size_t>& order) const {
    require(order.size() == surfaces_.size(), ErrorKind::Shape, "permutation size mismatch");
    std::vector<MortalitySurface> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(surfaces_.at(i));
    return ClusterDataset(std::move(out));
}

ClusterDataset ClusterDataset::slice_years(YearRange range) const {
    const int first = years().front();
    require(range.first >= first && range.last <= years().back() && range.last >= range.first, ErrorKind::Domain,
            "year slice outside the dataset");
    const int off = range.first - first;
    const int n = range.size();
    std::vector<MortalitySurface> out;
    for (const auto& s : surfaces_) {
        MortalitySurface c = s;
        c.years.assign(s.years.begin() + off, s.years.begin() + off + n);
        c.m = s.m.middleCols(off, n);
        c.log_m = s.log_m.middleCols(off, n);
        std::erase_if(c.imputed, [&](const auto& cell) { return cell.first < range.first || cell.first > range.last; });
        out.push_back(std::move(c));
    }
    return ClusterDataset(std::move(out));
}

ClusterDataset synthesize_cluster(const LiLeeParams& truth, double noise_sd, std::uint64_t seed) {
    truth.validate();
    require(noise_sd >= 0.0, ErrorKind::Domain, "noise_sd must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<MortalitySurface> surfaces;
    for (Eigen::Index i = 0; i < truth.n_countries(); ++i) {
        Eigen::MatrixXd y = truth.fitted_log_rates(i);
        if (noise_sd > 0.0)
            for (Eigen::Index t = 0; t < y.cols(); ++t)
                for (Eigen::Index a = 0; a < y.rows(); ++a) y(a, t) += noise_sd * gauss(rng);
        Eigen::MatrixXd m = (y.array().exp() - kLogEpsilon).max(0.0).matrix();
        MortalitySurface s = surface_from_rates(truth.countries[i], truth.years.front(), m);
        s.ages = truth.ages;
        surfaces.push_back(std::move(s));
    }
    return ClusterDataset(std::move(surfaces));
}

LiLeeParams reference_truth(const SynthSpec& spec) {
    const int n = int(spec.countries.size());
    require(n >= 2, ErrorKind::Domain, "synthetic cluster needs >= 2 countries");
    require(spec.last_year - spec.first_year >= 2, ErrorKind::Domain, "synthetic cluster needs >= 3 years");
    require(spec.regimes.empty() || int(spec.regimes.size()) == n, ErrorKind::Shape,
            "one regime per country expected");

    const int n_ages = spec.age_max + 1;
    const int n_years = spec.last_year - spec.first_year + 1;
    Rng rng(derive_seed(spec.seed, streams::synth));
    std::normal_distribution<double> gauss(0.0, 1.0);

    LiLeeParams p;
    p.countries = spec.countries;
    p.ages.resize(n_ages);
    for (int a = 0; a < n_ages; ++a) p.ages[a] = a;
    p.years.resize(n_years);
    for (int t = 0; t < n_years; ++t) p.years[t] = spec.first_year + t;

    // Gompertz-Makeham profile with an infant term.
    Eigen::VectorXd base(n_ages);
    for (int a = 0; a < n_ages; ++a)
        base[a] = std::log(1.5e-5 * std::exp(0.1 * a) + 2e-4 + 4e-3 * std::exp(-1.5 * a));
    p.alpha.resize(n_ages, n);
    for (int i = 0; i < n; ++i) p.alpha.col(i) = base.array() + 0.05 * std::sin(1.7 * (i + 1));

    p.B.resize(n_ages);
    for (int a = 0; a < n_ages; ++a) p.B[a] = 1.2 - 0.8 * a / double(spec.age_max);
    p.B /= p.B.sum();

    p.K.resize(n_years);
    p.K[0] = 0.0;
    for (int t = 1; t < n_years; ++t) p.K[t] = p.K[t - 1] + spec.common_drift + spec.common_sd * gauss(rng);
    p.K.array() -= p.K.mean();

    p.b.resize(n_ages, n);
    p.k.resize(n_years, n);
    for (int i = 0; i < n; ++i) {
        const double centre = 15.0 + 60.0 * i / std::max(1, n - 1);
        for (int a = 0; a < n_ages; ++a) {
            const double z = (a - centre) / 35.0;
            p.b(a, i) = std::exp(-z * z) + 0.3;
        }
        p.b.col(i) /= p.b.col(i).sum();

        const auto regime = spec.regimes.empty() ? SpecificRegime(i % 3) : spec.regimes[i];
        const double s = spec.specific_sd;
        Eigen::VectorXd k(n_years);
        switch (regime) {
        case SpecificRegime::UnitRootMomentum: {
            const double mu = (i % 2 == 0 ? 0.25 : -0.25);
            const double rho = 0.85;
            double d = mu;
            k[0] = 0.0;
            for (int t = 1; t < n_years; ++t) {
                d = mu + rho * (d - mu) + s * gauss(rng);
                k[t] = k[t - 1] + d;
            }
            break;
        }
        case SpecificRegime::Stationary: {
            k[0] = s * gauss(rng);
            for (int t = 1; t < n_years; ++t) k[t] = 0.5 * k[t - 1] + s * gauss(rng);
            break;
        }
        case SpecificRegime::NearLinear: {
            const double slope = (i % 2 == 0 ? 0.2 : -0.2);
            for (int t = 0; t < n_years; ++t) k[t] = slope * t + 0.1 * s * gauss(rng);
            break;
        }
        }
        p.k.col(i) = k.array() - k.mean();
    }
    p.validate();
    return p;
}

void write_cluster_csv(std::ostream& out, const ClusterDataset& data) {
    out << "country,year,age,m\n";
    std::ostringstream row;
    row << std::setprecision(17);
    for (const auto& s : data.surfaces())
        for (std::size_t t = 0; t < s.years.size(); ++t)
            for (std::size_t a = 0; a < s.ages.size(); ++a) {
                row.str({});
                row << s.country << ',' << s.years[t] << ',' << s.ages[a] << ',' << s.m(a, t) << '\n';
                out << row.str();
            }
}

ClusterDataset read_cluster_csv(std::istream& in, const SurfaceOptions& opts) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> order;
    std::map<std::string, HmdTable> tables;
    int year_min = 0, year_max = 0;
    bool any = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "country,year,age,m")
                fail(ErrorKind::Parse, line_msg(line_no, "expected header 'country,year,age,m'"));
            continue;
        }
        std::string_view sv(line);
        std::vector<std::string_view> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= sv.size(); ++i)
            if (i == sv.size() || sv[i] == ',') {
                f.push_back(sv.substr(start, i - start));
                start = i + 1;
            }
        if (f.size() != 4) fail(ErrorKind::Parse, line_msg(line_no, "expected 4 fields"));
        auto year = parse_int(f[1]);
        auto age = parse_int(f[2]);
        if (!year || !age) fail(ErrorKind::Parse, line_msg(line_no, "bad year/age"));
        HmdRecord rec{*year, *age, std::nullopt};
        if (f[3] != "." && !f[3].empty()) {
            rec.total = parse_double(f[3]);
            if (!rec.total) fail(ErrorKind::Parse, line_msg(line_no, "bad rate"));
        }
        std::string code(f[0]);
        auto [it, inserted] = tables.try_emplace(code);
        if (inserted) {
            order.push_back(code);
            it->second.kind = HmdKind::Rates;
        }
        it->second.records.push_back(rec);
        if (!any || *year < year_min) year_min = *year;
        if (!any || *year > year_max) year_max = *year;
        any = true;
    }
    require(any, ErrorKind::Data, "cluster CSV holds no rows");

    std::vector<MortalitySurface> surfaces;
    for (const auto& code : order)
        surfaces.push_back(build_surface(code, tables[code], nullptr, {year_min, year_max}, opts));
    return ClusterDataset(std::move(surfaces));
}

ClusterDataset read_cluster_csv(const std::filesystem::path& path, const SurfaceOptions& opts) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    return read_cluster_csv(in, opts);
}

} // namespace hlift
