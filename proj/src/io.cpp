#include "hlift/io.hpp"

#include "hlift/error.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hlift::io {

json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index expect_rows, Eigen::Index expect_cols) {
    try {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto& data = j.at("data");
        require(rows >= 0 && cols >= 0 && data.is_array() && Eigen::Index(data.size()) == rows * cols,
                ErrorKind::Shape, "matrix data length does not match its declared shape");
        require(expect_rows < 0 || rows == expect_rows, ErrorKind::Shape,
                "matrix has " + std::to_string(rows) + " rows, expected " + std::to_string(expect_rows));
        require(expect_cols < 0 || cols == expect_cols, ErrorKind::Shape,
                "matrix has " + std::to_string(cols) + " cols, expected " + std::to_string(expect_cols));
        Eigen::MatrixXd m(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
        return m;
    } catch (const json::exception& e) {
        fail(ErrorKind::Shape, std::string("malformed matrix: ") + e.what());
    }
}

json vector_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index expect_size) {
    try {
        auto vals = j.get<std::vector<double>>();
        require(expect_size < 0 || Eigen::Index(vals.size()) == expect_size, ErrorKind::Shape,
                "vector has " + std::to_string(vals.size()) + " entries, expected " + std::to_string(expect_size));
        return Eigen::Map<Eigen::VectorXd>(vals.data(), Eigen::Index(vals.size()));
    } catch (const json::exception& e) {
        fail(ErrorKind::Shape, std::string("malformed vector: ") + e.what());
    }
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
    return buf.data();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_gzip_file(const std::filesystem::path& path, std::string_view text) {
    gzFile f = gzopen(path.string().c_str(), "wb9");
    if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
    std::size_t off = 0;
    while (off < text.size()) {
        const unsigned chunk = unsigned(std::min<std::size_t>(text.size() - off, 1u << 20));
        if (gzwrite(f, text.data() + off, chunk) != int(chunk)) {
            gzclose(f);
            fail(ErrorKind::Io, "gzip write failed: " + path.string());
        }
        off += chunk;
    }
    if (gzclose(f) != Z_OK) fail(ErrorKind::Io, "gzip close failed: " + path.string());
}

std::string read_gzip_file(const std::filesystem::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) fail(ErrorKind::Io, "cannot open " + path.string());
    std::string out;
    std::array<char, 1 << 16> buf{};
    int n = 0;
    while ((n = gzread(f, buf.data(), unsigned(buf.size()))) > 0) out.append(buf.data(), std::size_t(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) fail(ErrorKind::Io, "gzip read failed: " + path.string());
    return out;
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), p);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            std::vector<std::string> fields;
            std::size_t start = 0;
            for (std::size_t i = 0; i <= line.size(); ++i)
                if (i == line.size() || line[i] == ',') {
                    fields.emplace_back(line.substr(start, i - start));
                    start = i + 1;
                }
            rows.push_back(std::move(fields));
        }
        pos = end + 1;
    }
    return rows;
}

} // namespace hlift::io
