#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace marlab {

/// Uniform per-dimension binning over axis-aligned ranges. Points outside a
/// range are clamped to the nearest bin; the upper edge belongs to the last
/// bin. Indices are row-major with the first dimension most significant, and
/// the inverse map returns bin centers.
struct QuantizerSpec {
    struct Dim {
        double lo = 0.0;
        double hi = 1.0;
        int bins = 1;
    };
    std::vector<Dim> dims;

    void validate() const {
        for (const auto& d : dims) {
            if (d.bins < 1) throw std::invalid_argument("quantizer: bins must be >= 1");
            if (!(d.lo < d.hi)) throw std::invalid_argument("quantizer: empty range");
        }
    }
    std::int64_t total() const {
        std::int64_t n = 1;
        for (const auto& d : dims) n *= d.bins;
        return n;
    }
};

inline int bin_of(const QuantizerSpec::Dim& d, double v) {
    const double w = (d.hi - d.lo) / d.bins;
    const int b = static_cast<int>(std::floor((v - d.lo) / w));
    return std::min(std::max(b, 0), d.bins - 1);
}

inline double bin_center(const QuantizerSpec::Dim& d, int b) {
    const double w = (d.hi - d.lo) / d.bins;
    return d.lo + (b + 0.5) * w;
}

/// Snap a value to the center of its bin (the one-dimensional round trip).
inline double snap(const QuantizerSpec::Dim& d, double v) {
    return bin_center(d, bin_of(d, v));
}

inline std::int64_t quantize(const QuantizerSpec& spec, const std::vector<double>& point) {
    if (point.size() != spec.dims.size())
        throw std::invalid_argument("quantize: dimension mismatch");
    std::int64_t idx = 0;
    for (std::size_t i = 0; i < spec.dims.size(); ++i)
        idx = idx * spec.dims[i].bins + bin_of(spec.dims[i], point[i]);
    return idx;
}

inline std::vector<double> dequantize(const QuantizerSpec& spec, std::int64_t idx) {
    if (idx < 0 || idx >= spec.total())
        throw std::invalid_argument("dequantize: index out of range");
    std::vector<double> point(spec.dims.size());
    for (std::size_t i = spec.dims.size(); i-- > 0;) {
        const int bins = spec.dims[i].bins;
        point[i] = bin_center(spec.dims[i], static_cast<int>(idx % bins));
        idx /= bins;
    }
    return point;
}

}  // namespace marlab
