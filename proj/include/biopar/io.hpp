#pragma once

// Small file helpers shared by the CSV, plane and binary model formats.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "biopar/core.hpp"

namespace biopar::io {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& s) {
    if (s == "nan" || s == "NaN") return std::nan("");
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw DataError("not a number: '" + s + "'");
    return v;
}

/// A parsed CSV table. Lines starting with '#' are comments; the first
/// comment line is kept in `preamble`.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string preamble;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require(std::string_view name, const std::string& context) const {
        const int c = column(name);
        if (c < 0) throw DataError(context + ": missing column '" + std::string(name) + "'");
        return c;
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        const auto s = trim(line);
        if (s.empty()) continue;
        if (s[0] == '#') {
            if (t.preamble.empty()) t.preamble = trim(std::string_view(s).substr(1));
            continue;
        }
        auto cells = split(s);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != t.header.size())
                throw DataError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                                std::to_string(cells.size()) + " fields, expected " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw DataError(path.string() + ": empty CSV");
    return t;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// ---------------------------------------------------------------------------
// Little-endian binary blocks.

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

inline void write_f64s(std::ostream& out, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) write_f64(out, data[i]);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("unexpected end of binary file");
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& in) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void read_f64s(std::istream& in, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = read_f64(in);
}

inline std::string read_string(std::istream& in, std::size_t max_len = std::size_t{1} << 30) {
    const auto n = read_u64(in);
    if (n > max_len) throw DataError("binary string length out of range");
    std::string s(n, '\0');
    read_exact(in, s.data(), n);
    return s;
}

inline void write_magic(std::ostream& out, const char (&magic)[8], std::uint32_t version) {
    out.write(magic, 8);
    write_u32(out, version);
}

/// Checks the 8-byte magic and returns the format version.
inline std::uint32_t read_magic(std::istream& in, const char (&magic)[8], const std::string& what) {
    char got[8];
    read_exact(in, got, 8);
    if (std::memcmp(got, magic, 8) != 0) throw DataError(what + ": bad file signature");
    return read_u32(in);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
}

inline Matrix read_matrix(std::istream& in) {
    const auto r = read_u64(in), c = read_u64(in);
    if (r > (1u << 24) || c > (1u << 24)) throw DataError("matrix dimensions out of range");
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
    return m;
}

/// Lower triangle only, row by row.
inline void write_lower(std::ostream& out, const Matrix& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) write_f64(out, m(i, j));
}

inline Matrix read_lower(std::istream& in) {
    const auto n = read_u64(in);
    if (n > (1u << 20)) throw DataError("matrix dimensions out of range");
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = read_f64(in);
    return m;
}

}  // namespace biopar::io
