#pragma once

#include "hlift/factors.hpp"
#include "hlift/hmd.hpp"
#include "hlift/rng.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace hlift::test {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
    return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed, double sd = 1.0) {
    return random_matrix(n, 1, seed, sd).col(0);
}

/// Random walk levels, one column per factor, years from `first_year`.
inline FactorPanel random_walk_panel(Eigen::Index years, Eigen::Index factors, std::uint64_t seed,
                                     int first_year = 1956) {
    FactorPanel p;
    p.values = random_matrix(years, factors, seed);
    for (Eigen::Index t = 1; t < years; ++t) p.values.row(t) += p.values.row(t - 1);
    for (Eigen::Index t = 0; t < years; ++t) p.years.push_back(first_year + int(t));
    return p;
}

/// Ground truth for a small cluster: three countries, 1981..2020, ages 0..90.
inline LiLeeParams small_truth(std::uint64_t seed, int n_countries = 3, int first_year = 1981,
                               int last_year = 2020) {
    SynthSpec spec;
    spec.countries.resize(std::size_t(n_countries));
    spec.first_year = first_year;
    spec.last_year = last_year;
    spec.seed = seed;
    return reference_truth(spec);
}

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hlift_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace hlift::test
