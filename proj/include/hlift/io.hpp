#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hlift::io {

using nlohmann::json;

/// {"rows": r, "cols": c, "data": [row-major values]}
json matrix_to_json(const Eigen::MatrixXd& m);
/// Validates the declared shape against the data length and, when given, the expected shape.
Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index expect_rows = -1, Eigen::Index expect_cols = -1);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j, Eigen::Index expect_size = -1);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// gzip-compressed text file I/O.
void write_gzip_file(const std::filesystem::path& path, std::string_view text);
std::string read_gzip_file(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Splits CSV text into rows of fields (no quoting support; the pipeline never quotes).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

} // namespace hlift::io
