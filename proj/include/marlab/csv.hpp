#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace marlab {

/// Shortest decimal string that round-trips the double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("fmt_double: to_chars failed");
    return std::string(buf, ptr);
}

/// Minimal CSV writer: fixed header, one row() call per record. Numeric
/// fields are serialised with round-trip formatting so that identical runs
/// produce byte-identical files.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path), n_cols_(header.size()) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != n_cols_)
            throw std::runtime_error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    static std::string cell(double v) { return fmt_double(v); }
    static std::string cell(const std::string& v) { return v; }
    template <typename T, typename = std::enable_if_t<std::is_integral_v<T>>>
    static std::string cell(T v) {
        return std::to_string(v);
    }

private:
    std::ofstream out_;
    std::size_t n_cols_;
};

/// FNV-1a, used to fingerprint the resolved configuration in run manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace marlab
