#pragma once

// Spatial pooling (SP), cross-channel pooling (CCP), their pyramid forms and
// the five parameter-free dual-view pyramid pooling (DVPP) compositions.

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dvpool/error.hpp"
#include "dvpool/tensor.hpp"

namespace dvpool {

enum class Reduction { average, max };

enum class Axis { spatial, channel };

/// Bin i of n adaptive bins over an axis of extent `extent`:
/// [floor(i*S/n), ceil((i+1)*S/n)). Bins may overlap by one index when n does
/// not divide S, and repeat elements when n > S.
inline Range adaptive_bin(std::size_t i, std::size_t extent, std::size_t n) {
    return {(i * extent) / n, ((i + 1) * extent + n - 1) / n};
}

/// Strictly ascending set of pooling levels. Empty means the operator is absent.
class PyramidLevels {
public:
    PyramidLevels() = default;
    PyramidLevels(std::initializer_list<int> levels) : PyramidLevels(std::vector<int>(levels)) {}
    explicit PyramidLevels(std::vector<int> levels) : levels_(std::move(levels)) {
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            detail::require(levels_[i] >= 1, "PyramidLevels: every level must be >= 1");
            detail::require(i == 0 || levels_[i - 1] < levels_[i],
                            "PyramidLevels: levels must be strictly ascending without duplicates");
        }
    }

    bool empty() const { return levels_.empty(); }
    std::size_t size() const { return levels_.size(); }
    const std::vector<int>& values() const { return levels_; }
    auto begin() const { return levels_.begin(); }
    auto end() const { return levels_.end(); }

    friend bool operator==(const PyramidLevels&, const PyramidLevels&) = default;

private:
    std::vector<int> levels_;
};

enum class Variant { sp_only, ccp_only, sc_ser, sc_s_ser, sc_c_ser, sc_par, twins };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::sp_only, Variant::ccp_only, Variant::sc_ser, Variant::sc_s_ser,
    Variant::sc_c_ser, Variant::sc_par,  Variant::twins};

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::sp_only: return "sp-only";
        case Variant::ccp_only: return "ccp-only";
        case Variant::sc_ser: return "sc-ser";
        case Variant::sc_s_ser: return "sc-s-ser";
        case Variant::sc_c_ser: return "sc-c-ser";
        case Variant::sc_par: return "sc-par";
        case Variant::twins: return "twins";
    }
    return "?";
}

inline std::string_view to_string(Reduction r) { return r == Reduction::average ? "avg" : "max"; }

/// Which DVPP variant to run and with which pyramid levels.
///
/// `aux_levels` holds the extra branch of the two augmented serial variants:
/// an SP pyramid for sc-s-ser, a CCP pyramid for sc-c-ser.
struct DvppConfig {
    Variant variant = Variant::sc_ser;
    PyramidLevels sp_levels;
    PyramidLevels ccp_levels;
    PyramidLevels aux_levels;
    Reduction reduction = Reduction::average;

    friend bool operator==(const DvppConfig&, const DvppConfig&) = default;

    void validate() const {
        const std::string name(to_string(variant));
        switch (variant) {
            case Variant::sp_only:
                detail::require(!sp_levels.empty() && ccp_levels.empty(),
                                "sp-only requires non-empty sp levels and no ccp levels");
                break;
            case Variant::ccp_only:
                detail::require(!ccp_levels.empty() && sp_levels.empty(),
                                "ccp-only requires non-empty ccp levels and no sp levels");
                break;
            default:
                detail::require(!sp_levels.empty() && !ccp_levels.empty(),
                                name + " requires non-empty sp and ccp levels");
        }
        const bool wants_aux = variant == Variant::sc_s_ser || variant == Variant::sc_c_ser;
        detail::require(wants_aux != aux_levels.empty(),
                        wants_aux ? name + " requires non-empty aux levels"
                                  : name + " does not take aux levels");
    }

    /// SC-DVPP-Ser with SP=3, CCP=4.
    static DvppConfig representative_ser() {
        return {Variant::sc_ser, {3}, {4}, {}, Reduction::average};
    }
    /// SC-DVPP-C-Ser with SP=4, CCP=2 and an extra CCP=3 branch.
    static DvppConfig representative_c_ser() {
        return {Variant::sc_c_ser, {4}, {2}, {3}, Reduction::average};
    }
};

/// Spatial pooling at level n: every spatial axis is split into n adaptive
/// bins, output shape C x n x ... x n. Level 1 with average is GAP.
inline FeatureMap sp_pool(const FeatureMap& x, int n, Reduction reduction = Reduction::average) {
    detail::require(n >= 1, "sp_pool: level must be >= 1");
    const auto levels = static_cast<std::size_t>(n);
    const std::size_t rank = x.spatial_rank();
    const auto ext = x.spatial_shape();

    Shape out_shape{x.channels()};
    out_shape.insert(out_shape.end(), rank, levels);
    std::size_t cells = 1;
    for (std::size_t a = 0; a < rank; ++a) cells *= levels;

    std::vector<double> out;
    out.reserve(x.channels() * cells);
    std::vector<Range> region(rank);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t c = 0; c < x.channels(); ++c) {
        std::fill(idx.begin(), idx.end(), 0);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            for (std::size_t a = 0; a < rank; ++a) region[a] = adaptive_bin(idx[a], ext[a], levels);
            const Range ch{c, c + 1};
            out.push_back(reduction == Reduction::average ? region_mean(x, ch, region)
                                                          : region_max(x, ch, region));
            for (std::size_t a = rank; a-- > 0;) {
                if (++idx[a] < levels) break;
                idx[a] = 0;
            }
        }
    }
    return FeatureMap(std::move(out_shape), std::move(out));
}

/// Cross-channel pooling at level m: the channel axis is split into m
/// adaptive bins and reduced per spatial position, output shape m x spatial.
/// Level 1 with average is CAP.
inline FeatureMap ccp_pool(const FeatureMap& x, int m, Reduction reduction = Reduction::average) {
    detail::require(m >= 1, "ccp_pool: level must be >= 1");
    const auto groups = static_cast<std::size_t>(m);
    const std::size_t plane = x.spatial_size();
    const auto data = x.data();

    Shape out_shape{groups};
    out_shape.insert(out_shape.end(), x.spatial_shape().begin(), x.spatial_shape().end());
    std::vector<double> out;
    out.reserve(groups * plane);
    for (std::size_t g = 0; g < groups; ++g) {
        const Range bin = adaptive_bin(g, x.channels(), groups);
        for (std::size_t p = 0; p < plane; ++p) {
            if (reduction == Reduction::average) {
                detail::CompensatedSum sum;
                for (std::size_t c = bin.begin; c < bin.end; ++c) sum.add(data[c * plane + p]);
                out.push_back(sum.value() / static_cast<double>(bin.size()));
            } else {
                double best = data[bin.begin * plane + p];
                for (std::size_t c = bin.begin + 1; c < bin.end; ++c)
                    best = std::max(best, data[c * plane + p]);
                out.push_back(best);
            }
        }
    }
    return FeatureMap(std::move(out_shape), std::move(out));
}

inline FeatureMap pool(const FeatureMap& x, Axis axis, int level, Reduction reduction) {
    return axis == Axis::spatial ? sp_pool(x, level, reduction) : ccp_pool(x, level, reduction);
}

namespace detail {

inline std::string level_name(Axis axis, int level) {
    return (axis == Axis::spatial ? "sp" : "ccp") + std::to_string(level);
}

inline std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    while (exp--) r *= base;
    return r;
}

}  // namespace detail

/// Multi-level SP (SPP) or CCP (CCPP): levels ascending, each flattened
/// row-major, concatenated with one provenance segment per level.
inline FeatureVector pyramid(const FeatureMap& x, const PyramidLevels& levels, Axis axis,
                             Reduction reduction = Reduction::average) {
    detail::require(!levels.empty(), "pyramid: levels must be non-empty");
    std::vector<FeatureVector> parts;
    parts.reserve(levels.size());
    for (int level : levels)
        parts.push_back(flatten(pool(x, axis, level, reduction), detail::level_name(axis, level)));
    return concat(parts);
}

namespace detail {

/// Serial composition over the full sp x ccp cross product, pairs in
/// lexicographic (n, m) order. ccp_first selects f_SP(f_CCP(X)) over
/// f_CCP(f_SP(X)).
inline FeatureVector serial_branch(const FeatureMap& x, const DvppConfig& cfg, bool ccp_first) {
    std::vector<FeatureVector> parts;
    for (int n : cfg.sp_levels) {
        for (int m : cfg.ccp_levels) {
            if (ccp_first) {
                parts.push_back(flatten(sp_pool(ccp_pool(x, m, cfg.reduction), n, cfg.reduction),
                                        level_name(Axis::spatial, n) + "(" +
                                            level_name(Axis::channel, m) + ")"));
            } else {
                parts.push_back(flatten(ccp_pool(sp_pool(x, n, cfg.reduction), m, cfg.reduction),
                                        level_name(Axis::channel, m) + "(" +
                                            level_name(Axis::spatial, n) + ")"));
            }
        }
    }
    return concat(parts);
}

}  // namespace detail

/// Runs the configured DVPP variant. Branch order follows the variant's
/// bracket, left to right:
///   sc-ser   : CCP(SP(X))
///   sc-s-ser : [CCP(SP(X)), SP_aux(X)]
///   sc-c-ser : [CCP(SP(X)), CCP_aux(X)]
///   sc-par   : [SP(X), CCP(X)]
///   twins    : [SP(CCP(X)), CCP(X), SP(X)]
inline FeatureVector dvpp(const FeatureMap& x, const DvppConfig& cfg) {
    cfg.validate();
    const auto r = cfg.reduction;
    switch (cfg.variant) {
        case Variant::sp_only: return pyramid(x, cfg.sp_levels, Axis::spatial, r);
        case Variant::ccp_only: return pyramid(x, cfg.ccp_levels, Axis::channel, r);
        case Variant::sc_ser: return detail::serial_branch(x, cfg, false);
        case Variant::sc_s_ser:
            return concat({detail::serial_branch(x, cfg, false),
                           pyramid(x, cfg.aux_levels, Axis::spatial, r)});
        case Variant::sc_c_ser:
            return concat({detail::serial_branch(x, cfg, false),
                           pyramid(x, cfg.aux_levels, Axis::channel, r)});
        case Variant::sc_par:
            return concat({pyramid(x, cfg.sp_levels, Axis::spatial, r),
                           pyramid(x, cfg.ccp_levels, Axis::channel, r)});
        case Variant::twins:
            return concat({detail::serial_branch(x, cfg, true),
                           pyramid(x, cfg.ccp_levels, Axis::channel, r),
                           pyramid(x, cfg.sp_levels, Axis::spatial, r)});
    }
    throw ContractViolation("dvpp: unknown variant");
}

/// Length dvpp(x, cfg) would produce for a map of the given shape.
inline std::size_t output_len(const DvppConfig& cfg, std::span<const std::size_t> shape) {
    cfg.validate();
    detail::require(shape.size() == 3 || shape.size() == 4,
                    "output_len: shape must have rank 3 or 4, got " + shape_string(shape));
    for (auto d : shape) detail::require(d > 0, "output_len: dimensions must be positive");
    const std::size_t channels = shape[0];
    const std::size_t rank = shape.size() - 1;
    const std::size_t plane = shape_product(shape.subspan(1));

    auto sp_cells = [&](const PyramidLevels& lv) {
        std::size_t s = 0;
        for (int n : lv) s += detail::ipow(static_cast<std::size_t>(n), rank);
        return s;
    };
    auto ccp_groups = [](const PyramidLevels& lv) {
        std::size_t s = 0;
        for (int m : lv) s += static_cast<std::size_t>(m);
        return s;
    };
    const std::size_t serial = sp_cells(cfg.sp_levels) * ccp_groups(cfg.ccp_levels);

    switch (cfg.variant) {
        case Variant::sp_only: return channels * sp_cells(cfg.sp_levels);
        case Variant::ccp_only: return ccp_groups(cfg.ccp_levels) * plane;
        case Variant::sc_ser: return serial;
        case Variant::sc_s_ser: return serial + channels * sp_cells(cfg.aux_levels);
        case Variant::sc_c_ser: return serial + ccp_groups(cfg.aux_levels) * plane;
        case Variant::sc_par:
            return channels * sp_cells(cfg.sp_levels) + ccp_groups(cfg.ccp_levels) * plane;
        case Variant::twins:
            return serial + ccp_groups(cfg.ccp_levels) * plane +
                   channels * sp_cells(cfg.sp_levels);
    }
    throw ContractViolation("output_len: unknown variant");
}

/// GAP: per-channel global average, length C.
inline FeatureVector global_average_pool(const FeatureMap& x) {
    return flatten(sp_pool(x, 1, Reduction::average), "gap");
}

/// GMP: per-channel global max, length C.
inline FeatureVector global_max_pool(const FeatureMap& x) {
    return flatten(sp_pool(x, 1, Reduction::max), "gmp");
}

/// CAP: per-position channel average, length prod(spatial).
inline FeatureVector cross_channel_average_pool(const FeatureMap& x) {
    return flatten(ccp_pool(x, 1, Reduction::average), "cap");
}

/// Mixed pooling: [GAP, GMP], length 2C.
inline FeatureVector mixed_pool(const FeatureMap& x) {
    return concat({global_average_pool(x), global_max_pool(x)});
}

}  // namespace dvpool
