#pragma once

// Dense feature-map tensor and the block-reduction primitives every pooling
// operator is built on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvpool/error.hpp"

namespace dvpool {

using Shape = std::vector<std::size_t>;

/// Half-open index interval [begin, end).
struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return end <= begin; }
    friend bool operator==(const Range&, const Range&) = default;
};

inline std::size_t shape_product(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_string(std::span<const std::size_t> shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

/// Feature map X with layout C x H x W or C x D x H x W, row-major.
/// Channel axis is always axis 0. Immutable after construction.
class FeatureMap {
public:
    FeatureMap(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        detail::require(shape_.size() == 3 || shape_.size() == 4,
                        "FeatureMap: shape must have rank 3 (C,H,W) or 4 (C,D,H,W), got " +
                            shape_string(shape_));
        for (auto d : shape_) {
            detail::require(d > 0, "FeatureMap: dimensions must be positive, got " +
                                       shape_string(shape_));
        }
        detail::require(data_.size() == shape_product(shape_),
                        "FeatureMap: data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
        for (double v : data_) {
            detail::require(std::isfinite(v), "FeatureMap: non-finite element");
        }
    }

    static FeatureMap filled(Shape shape, double value) {
        const auto n = shape_product(shape);
        return FeatureMap(std::move(shape), std::vector<double>(n, value));
    }

    const Shape& shape() const { return shape_; }
    std::span<const double> data() const { return data_; }
    std::size_t size() const { return data_.size(); }

    std::size_t channels() const { return shape_[0]; }
    std::size_t spatial_rank() const { return shape_.size() - 1; }
    std::span<const std::size_t> spatial_shape() const {
        return std::span<const std::size_t>(shape_).subspan(1);
    }
    /// Number of positions in one channel slice.
    std::size_t spatial_size() const { return shape_product(spatial_shape()); }

    /// Element at channel c and flat (row-major) spatial position p.
    double at(std::size_t c, std::size_t p) const { return data_[c * spatial_size() + p]; }

    double at(std::initializer_list<std::size_t> index) const {
        detail::require(index.size() == shape_.size(), "FeatureMap::at: index rank mismatch");
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (auto i : index) {
            detail::require(i < shape_[axis], "FeatureMap::at: index out of bounds");
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return data_[flat];
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Contiguous span of a FeatureVector attributed to one pooling branch.
struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Flattened pooled output Z with per-branch provenance.
struct FeatureVector {
    std::vector<double> data;
    std::vector<Segment> segments;

    std::size_t size() const { return data.size(); }

    std::span<const double> segment(std::size_t i) const {
        const auto& s = segments.at(i);
        return std::span<const double>(data).subspan(s.offset, s.length);
    }
};

/// Wraps a whole feature map as a single-segment vector (row-major order).
inline FeatureVector flatten(const FeatureMap& x, std::string name) {
    FeatureVector v;
    v.data.assign(x.data().begin(), x.data().end());
    v.segments.push_back({std::move(name), 0, v.data.size()});
    return v;
}

/// Concatenates in list order, re-basing each segment's offset.
inline FeatureVector concat(std::span<const FeatureVector> parts) {
    detail::require(!parts.empty(), "concat: empty input list");
    FeatureVector out;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    out.data.reserve(total);
    for (const auto& p : parts) {
        const std::size_t base = out.data.size();
        out.data.insert(out.data.end(), p.data.begin(), p.data.end());
        for (const auto& s : p.segments) out.segments.push_back({s.name, base + s.offset, s.length});
    }
    return out;
}

inline FeatureVector concat(std::initializer_list<FeatureVector> parts) {
    return concat(std::span<const FeatureVector>(parts.begin(), parts.size()));
}

namespace detail {

/// Neumaier-compensated running sum. Order of add() calls fixes the result.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline void check_region(const FeatureMap& x, Range channels, std::span<const Range> spatial) {
    require(spatial.size() == x.spatial_rank(),
            "region: expected " + std::to_string(x.spatial_rank()) + " spatial ranges, got " +
                std::to_string(spatial.size()));
    require(!channels.empty() && channels.end <= x.channels(),
            "region: channel range out of bounds or empty");
    const auto ext = x.spatial_shape();
    for (std::size_t a = 0; a < spatial.size(); ++a) {
        require(!spatial[a].empty() && spatial[a].end <= ext[a],
                "region: spatial range on axis " + std::to_string(a + 1) +
                    " out of bounds or empty");
    }
}

/// Visits every element of the block in row-major order.
template <typename F>
void for_each_in_region(const FeatureMap& x, Range channels, std::span<const Range> spatial,
                        F&& visit) {
    const auto ext = x.spatial_shape();
    const auto data = x.data();
    const std::size_t plane = x.spatial_size();
    // Treat rank-2 spatial maps as depth 1.
    const bool volumetric = spatial.size() == 3;
    const Range depth = volumetric ? spatial[0] : Range{0, 1};
    const Range rows = spatial[spatial.size() - 2];
    const Range cols = spatial[spatial.size() - 1];
    const std::size_t height = ext[ext.size() - 2];
    const std::size_t width = ext[ext.size() - 1];
    for (std::size_t c = channels.begin; c < channels.end; ++c) {
        for (std::size_t d = depth.begin; d < depth.end; ++d) {
            for (std::size_t h = rows.begin; h < rows.end; ++h) {
                const std::size_t row = c * plane + (d * height + h) * width;
                for (std::size_t w = cols.begin; w < cols.end; ++w) visit(data[row + w]);
            }
        }
    }
}

}  // namespace detail

/// Mean over the axis-aligned block channels x spatial[0] x ... .
/// Summation is compensated and runs in row-major order, so the result is
/// reproducible bit-for-bit.
inline double region_mean(const FeatureMap& x, Range channels, std::span<const Range> spatial) {
    detail::check_region(x, channels, spatial);
    detail::CompensatedSum sum;
    std::size_t count = 0;
    detail::for_each_in_region(x, channels, spatial, [&](double v) {
        sum.add(v);
        ++count;
    });
    return sum.value() / static_cast<double>(count);
}

inline double region_max(const FeatureMap& x, Range channels, std::span<const Range> spatial) {
    detail::check_region(x, channels, spatial);
    double best = -std::numeric_limits<double>::infinity();
    detail::for_each_in_region(x, channels, spatial, [&](double v) { best = std::max(best, v); });
    return best;
}

inline double region_mean(const FeatureMap& x, Range channels,
                          std::initializer_list<Range> spatial) {
    return region_mean(x, channels, std::span<const Range>(spatial.begin(), spatial.size()));
}

inline double region_max(const FeatureMap& x, Range channels,
                         std::initializer_list<Range> spatial) {
    return region_max(x, channels, std::span<const Range>(spatial.begin(), spatial.size()));
}

}  // namespace dvpool
