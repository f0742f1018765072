#pragma once

#include "hlift/factors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hlift {

/// Floor added before taking logs so zero-death cells stay finite.
inline constexpr double kLogEpsilon = 1e-10;
inline constexpr int kDefaultAgeMax = 90;

enum class HmdKind { Deaths, Exposures, Rates };

struct HmdRecord {
    int year = 0;
    int age = 0;                 // "110+" is stored as 110
    std::optional<double> total; // nullopt for "."
};

struct HmdTable {
    HmdKind kind = HmdKind::Rates;
    std::vector<HmdRecord> records;
};

/// Parses an HMD 1x1 text table (Year Age Female Male Total) keeping the Total column.
/// Leading non-numeric lines are treated as header. Throws Parse (with the line
/// number) on malformed rows and Structure on out-of-order year/age blocks.
HmdTable parse_hmd_file(std::istream& in, HmdKind kind);
HmdTable read_hmd_file(const std::filesystem::path& path, HmdKind kind);

struct YearRange {
    int first = 0;
    int last = 0;
    int size() const { return last - first + 1; }
};

enum class MissingPolicy {
    Reject,            ///< any missing cell is a data-gap error
    InterpolateYears,  ///< linear interpolation along years per age, recorded in `imputed`
};

struct SurfaceOptions {
    int age_max = kDefaultAgeMax;
    MissingPolicy missing = MissingPolicy::Reject;
};

struct MortalitySurface {
    std::string country;
    std::vector<int> ages;   // 0..age_max
    std::vector<int> years;  // contiguous
    Eigen::MatrixXd m;       // ages x years
    Eigen::MatrixXd log_m;   // ln(m + kLogEpsilon)
    std::vector<std::pair<int, int>> imputed; // (year, age) cells filled by interpolation
};

/// Builds a surface from a rates table, or from deaths plus exposures.
/// Ages above `opts.age_max` are dropped.
MortalitySurface build_surface(const std::string& country, const HmdTable& primary,
                               const HmdTable* exposures, YearRange years,
                               const SurfaceOptions& opts = {});

/// Surface directly from a rate matrix (ages 0..rows-1, years from `first_year`).
MortalitySurface surface_from_rates(const std::string& country, int first_year,
                                    const Eigen::MatrixXd& m);

/// Ordered set of country surfaces on a common age/year grid. Order fixes the
/// country index used by every downstream feature layout.
class ClusterDataset {
public:
    explicit ClusterDataset(std::vector<MortalitySurface> surfaces);

    const std::vector<MortalitySurface>& surfaces() const { return surfaces_; }
    const MortalitySurface& operator[](std::size_t i) const { return surfaces_[i]; }
    std::size_t size() const { return surfaces_.size(); }
    const std::vector<int>& years() const { return surfaces_.front().years; }
    const std::vector<int>& ages() const { return surfaces_.front().ages; }
    YearRange year_range() const { return {years().front(), years().back()}; }
    std::vector<std::string> countries() const;

    /// Same surfaces in a new order; `order[k]` is the old index placed at k.
    ClusterDataset permuted(const std::vector<std::size_t>& order) const;
    /// Restricts every surface to the given years.
    ClusterDataset slice_years(YearRange range) const;

private:
    std::vector<MortalitySurface> surfaces_;
};

/// Log rates alpha + B K + b k + N(0, noise_sd^2) from a ground-truth parameter
/// set. Rates are stored as exp(y) - eps so that the surface's log_m equals y.
ClusterDataset synthesize_cluster(const LiLeeParams& truth, double noise_sd, std::uint64_t seed);

/// Dynamics of a synthetic country-specific index.
enum class SpecificRegime {
    UnitRootMomentum, ///< integrated AR(1) in differences with drift (unit root)
    Stationary,       ///< zero-mean AR(1) in levels
    NearLinear,       ///< deterministic linear trend plus small noise
};

struct SynthSpec {
    std::vector<std::string> countries{"CHE", "SWE", "NOR", "DEUTW", "NLD", "JPN"};
    std::vector<SpecificRegime> regimes; // empty: cycles through all three
    int first_year = 1956;
    int last_year = 2020;
    int age_max = kDefaultAgeMax;
    double common_drift = -1.4;
    double common_sd = 1.0;
    double specific_sd = 0.6;
    std::uint64_t seed = 20240601;
};

/// Realistic ground truth: Gompertz-Makeham age profiles, positive loadings,
/// a random walk with drift for K and regime-specific k.
LiLeeParams reference_truth(const SynthSpec& spec);

/// CSV with header "country,year,age,m" in dataset order.
void write_cluster_csv(std::ostream& out, const ClusterDataset& data);
/// Reads the CSV layout above; countries keep first-appearance order.
ClusterDataset read_cluster_csv(std::istream& in, const SurfaceOptions& opts = {});
ClusterDataset read_cluster_csv(const std::filesystem::path& path, const SurfaceOptions& opts = {});

} // namespace hlift
