#pragma once

// Test-only reference implementations. Nothing here calls into the library's
// pooling or binning code; bins are materialized by explicit index
// enumeration so the oracle stays independent of the kernels it checks.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "dvpool/matrix.hpp"
#include "dvpool/pooling.hpp"
#include "dvpool/tensor.hpp"

namespace oracle {

/// C x D x H x W tensor; 2D maps use D = 1 and remember their rank.
struct Naive {
    std::size_t c = 0, d = 1, h = 0, w = 0;
    bool volumetric = false;
    std::vector<double> v;

    double at(std::size_t ci, std::size_t di, std::size_t hi, std::size_t wi) const {
        return v[((ci * d + di) * h + hi) * w + wi];
    }
};

inline Naive from_map(const dvpool::FeatureMap& x) {
    Naive t;
    const auto& s = x.shape();
    t.volumetric = s.size() == 4;
    t.c = s[0];
    t.d = t.volumetric ? s[1] : 1;
    t.h = s[s.size() - 2];
    t.w = s[s.size() - 1];
    t.v.assign(x.data().begin(), x.data().end());
    return t;
}

/// Indices k in [0, extent) covered by bin i of n: floor(i*S/n) <= k < ceil((i+1)*S/n).
inline std::vector<std::size_t> bin_members(std::size_t i, std::size_t extent, std::size_t n) {
    const double lo = std::floor(static_cast<double>(i) * static_cast<double>(extent) / static_cast<double>(n));
    const double hi = std::ceil(static_cast<double>(i + 1) * static_cast<double>(extent) / static_cast<double>(n));
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < extent; ++k) {
        const double kd = static_cast<double>(k);
        if (kd >= lo && kd < hi) out.push_back(k);
    }
    return out;
}

inline double reduce(const std::vector<double>& xs, dvpool::Reduction r) {
    if (r == dvpool::Reduction::max) {
        double m = xs.front();
        for (double x : xs) m = x > m ? x : m;
        return m;
    }
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline Naive sp(const Naive& x, std::size_t n, dvpool::Reduction r) {
    Naive out;
    out.volumetric = x.volumetric;
    out.c = x.c;
    out.d = x.volumetric ? n : 1;
    out.h = n;
    out.w = n;
    for (std::size_t c = 0; c < x.c; ++c)
        for (std::size_t bd = 0; bd < out.d; ++bd)
            for (std::size_t bh = 0; bh < n; ++bh)
                for (std::size_t bw = 0; bw < n; ++bw) {
                    const auto ds = x.volumetric ? bin_members(bd, x.d, n) : std::vector<std::size_t>{0};
                    std::vector<double> xs;
                    for (auto di : ds)
                        for (auto hi : bin_members(bh, x.h, n))
                            for (auto wi : bin_members(bw, x.w, n)) xs.push_back(x.at(c, di, hi, wi));
                    out.v.push_back(reduce(xs, r));
                }
    return out;
}

inline Naive ccp(const Naive& x, std::size_t m, dvpool::Reduction r) {
    Naive out = x;
    out.c = m;
    out.v.clear();
    for (std::size_t g = 0; g < m; ++g)
        for (std::size_t di = 0; di < x.d; ++di)
            for (std::size_t hi = 0; hi < x.h; ++hi)
                for (std::size_t wi = 0; wi < x.w; ++wi) {
                    std::vector<double> xs;
                    for (auto c : bin_members(g, x.c, m)) xs.push_back(x.at(c, di, hi, wi));
                    out.v.push_back(reduce(xs, r));
                }
    return out;
}

inline void append(std::vector<double>& out, const Naive& t) { out.insert(out.end(), t.v.begin(), t.v.end()); }

inline std::vector<double> dvpp(const dvpool::FeatureMap& map, const dvpool::DvppConfig& cfg) {
    using dvpool::Variant;
    const Naive x = from_map(map);
    const auto r = cfg.reduction;
    std::vector<double> out;
    auto sp_pyramid = [&](const dvpool::PyramidLevels& lv) {
        for (int n : lv) append(out, sp(x, static_cast<std::size_t>(n), r));
    };
    auto ccp_pyramid = [&](const dvpool::PyramidLevels& lv) {
        for (int m : lv) append(out, ccp(x, static_cast<std::size_t>(m), r));
    };
    auto ccp_of_sp = [&] {
        for (int n : cfg.sp_levels)
            for (int m : cfg.ccp_levels)
                append(out, ccp(sp(x, static_cast<std::size_t>(n), r), static_cast<std::size_t>(m), r));
    };
    switch (cfg.variant) {
        case Variant::sp_only: sp_pyramid(cfg.sp_levels); break;
        case Variant::ccp_only: ccp_pyramid(cfg.ccp_levels); break;
        case Variant::sc_ser: ccp_of_sp(); break;
        case Variant::sc_s_ser: ccp_of_sp(); sp_pyramid(cfg.aux_levels); break;
        case Variant::sc_c_ser: ccp_of_sp(); ccp_pyramid(cfg.aux_levels); break;
        case Variant::sc_par: sp_pyramid(cfg.sp_levels); ccp_pyramid(cfg.ccp_levels); break;
        case Variant::twins:
            for (int n : cfg.sp_levels)
                for (int m : cfg.ccp_levels)
                    append(out, sp(ccp(x, static_cast<std::size_t>(m), r), static_cast<std::size_t>(n), r));
            ccp_pyramid(cfg.ccp_levels);
            sp_pyramid(cfg.sp_levels);
            break;
    }
    return out;
}

/// ECE by grouping samples per bin with a linear scan over bin edges.
inline double ece_by_grouping(const dvpool::Matrix& probs, const std::vector<std::int64_t>& labels,
                              std::size_t bins) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    const auto n = probs.rows();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t top = 0;
        for (std::size_t k = 1; k < probs.cols(); ++k)
            if (probs(i, k) > probs(i, top)) top = k;
        const double conf = probs(i, top);
        for (std::size_t b = 0; b < bins; ++b) {
            const double lo = static_cast<double>(b) / static_cast<double>(bins);
            const double hi = static_cast<double>(b + 1) / static_cast<double>(bins);
            if (conf >= lo && (conf < hi || b + 1 == bins)) {
                groups[b].push_back(i);
                break;
            }
        }
    }
    double total = 0.0;
    for (const auto& [b, members] : groups) {
        double conf_sum = 0.0;
        double hit_sum = 0.0;
        for (auto i : members) {
            std::size_t top = 0;
            for (std::size_t k = 1; k < probs.cols(); ++k)
                if (probs(i, k) > probs(i, top)) top = k;
            conf_sum += probs(i, top);
            hit_sum += static_cast<std::int64_t>(top) == labels[i] ? 1.0 : 0.0;
        }
        const double count = static_cast<double>(members.size());
        total += (count / static_cast<double>(n)) * std::abs(hit_sum / count - conf_sum / count);
    }
    return total;
}

}  // namespace oracle

namespace testutil {

inline dvpool::FeatureMap random_map(std::mt19937_64& rng, dvpool::Shape shape, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> v(dvpool::shape_product(shape));
    for (double& x : v) x = normal(rng);
    return dvpool::FeatureMap(std::move(shape), std::move(v));
}

inline dvpool::FeatureMap iota_map(dvpool::Shape shape, double start = 0.0) {
    std::vector<double> v(dvpool::shape_product(shape));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + static_cast<double>(i);
    return dvpool::FeatureMap(std::move(shape), std::move(v));
}

/// Random probability matrix with rows drawn from a softmax of Gaussian logits.
inline dvpool::Matrix random_probs(std::mt19937_64& rng, std::size_t n, std::size_t k, double spread = 2.0) {
    std::normal_distribution<double> normal(0.0, spread);
    dvpool::Matrix p(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p(i, j) = std::exp(normal(rng));
            s += p(i, j);
        }
        for (std::size_t j = 0; j < k; ++j) p(i, j) /= s;
    }
    return p;
}

inline std::vector<std::int64_t> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::uniform_int_distribution<std::int64_t> u(0, static_cast<std::int64_t>(k) - 1);
    std::vector<std::int64_t> y(n);
    for (auto& v : y) v = u(rng);
    return y;
}

/// Draws logits and samples each label from softmax(logits), so the logits
/// are calibrated at T = 1 by construction.
inline void calibrated_logits(std::mt19937_64& rng, std::size_t n, std::size_t k, dvpool::Matrix& logits,
                              std::vector<std::int64_t>& labels) {
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    logits = dvpool::Matrix(n, k);
    labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double top = -1e300;
        for (std::size_t j = 0; j < k; ++j) {
            logits(i, j) = normal(rng);
            top = std::max(top, logits(i, j));
        }
        std::vector<double> p(k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += p[j] = std::exp(logits(i, j) - top);
        double u = unif(rng) * s;
        std::size_t pick = k - 1;
        for (std::size_t j = 0; j < k; ++j) {
            if (u < p[j]) {
                pick = j;
                break;
            }
            u -= p[j];
        }
        labels[i] = static_cast<std::int64_t>(pick);
    }
}

}  // namespace testutil
