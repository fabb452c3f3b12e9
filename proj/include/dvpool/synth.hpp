#pragma once

// Synthetic dual-view datasets. Classes come in pairs: a pair shares a
// per-channel signature (visible to spatial pooling), and the two members
// of a pair differ only in a zero-mean spatial template added to every
// channel (visible to cross-channel pooling).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dvpool/error.hpp"
#include "dvpool/parallel.hpp"
#include "dvpool/tensor.hpp"

namespace dvpool {

struct SynthSpec {
    std::size_t classes = 4;
    std::size_t channels = 16;
    Shape spatial{8, 8};
    std::size_t samples_per_class = 100;
    double alpha = 1.0;  // spatial-template strength
    double beta = 1.0;   // channel-signature strength
    double sigma = 0.5;  // elementwise noise
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(classes >= 2 && classes % 2 == 0, "SynthSpec: classes must be even and >= 2");
        detail::require(channels > 0, "SynthSpec: channels must be positive");
        detail::require(spatial.size() == 2 || spatial.size() == 3,
                        "SynthSpec: spatial shape must have 2 or 3 axes");
        for (auto d : spatial) detail::require(d > 0, "SynthSpec: spatial extents must be positive");
        detail::require(samples_per_class > 0, "SynthSpec: samples_per_class must be positive");
        detail::require(std::isfinite(alpha) && std::isfinite(beta),
                        "SynthSpec: alpha and beta must be finite");
        detail::require(std::isfinite(sigma) && sigma >= 0.0, "SynthSpec: sigma must be >= 0");
    }

    Shape map_shape() const {
        Shape s{channels};
        s.insert(s.end(), spatial.begin(), spatial.end());
        return s;
    }
    std::size_t total_samples() const { return classes * samples_per_class; }
    friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// Everything needed to regenerate a dataset and to reason about it.
struct SynthManifest {
    SynthSpec spec;
    /// One zero-mean channel signature per class pair (length C each).
    std::vector<std::vector<double>> signatures;
    /// One zero-mean spatial template per class (length prod(spatial) each).
    std::vector<std::vector<double>> templates;
};

struct SynthDataset {
    std::vector<FeatureMap> maps;
    std::vector<std::int64_t> labels;
    SynthManifest manifest;
};

namespace detail {

/// SplitMix64 finalizer; derives independent per-sample seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline void center(std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double& x : v) x -= mean;
}

}  // namespace detail

/// Draws the signatures and templates for a spec.
///
/// Templates are keyed by class parity: T_{2j} = A and T_{2j+1} = B for
/// every pair j. Channel-averaged maps then separate the members of a pair
/// but not the pairs themselves, while channel means separate pairs but
/// not members.
///
/// A is a centered Gaussian draw and B is a seeded permutation of A, so
/// both hold the same multiset of values. At sigma = 0 every channel of a
/// class-2j sample is then a rearrangement of the matching class-2j+1
/// channel and their channel means agree bit-for-bit.
inline SynthManifest make_manifest(const SynthSpec& spec) {
    spec.validate();
    SynthManifest m;
    m.spec = spec;
    std::mt19937_64 rng(detail::mix_seed(spec.seed, 0xFFFF'FFFF'FFFF'FFFFULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < spec.classes / 2; ++j) {
        std::vector<double> s(spec.channels);
        for (double& v : s) v = normal(rng);
        detail::center(s);
        m.signatures.push_back(std::move(s));
    }
    std::vector<double> even(shape_product(spec.spatial));
    for (double& v : even) v = normal(rng);
    detail::center(even);
    std::vector<double> odd = even;
    std::shuffle(odd.begin(), odd.end(), rng);
    for (std::size_t k = 0; k < spec.classes; ++k) m.templates.push_back(k % 2 == 0 ? even : odd);
    return m;
}

/// Sample i, with its own RNG substream so generation order is irrelevant.
inline FeatureMap synth_sample(const SynthManifest& m, std::size_t index, std::int64_t label) {
    const auto& spec = m.spec;
    const auto k = static_cast<std::size_t>(label);
    const auto& signature = m.signatures[k / 2];
    const auto& tmpl = m.templates[k];
    const std::size_t plane = tmpl.size();
    std::mt19937_64 rng(detail::mix_seed(spec.seed, index));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> data(spec.channels * plane);
    for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            double v = spec.beta * signature[c] + spec.alpha * tmpl[p];
            if (spec.sigma > 0.0) v += spec.sigma * normal(rng);
            data[c * plane + p] = v;
        }
    }
    return FeatureMap(spec.map_shape(), std::move(data));
}

/// Samples are ordered class-major: sample i has label i / samples_per_class.
inline SynthDataset generate(const SynthSpec& spec, unsigned threads = 1) {
    SynthDataset ds;
    ds.manifest = make_manifest(spec);
    const std::size_t n = spec.total_samples();
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ds.labels[i] = static_cast<std::int64_t>(i / spec.samples_per_class);
    std::vector<std::optional<FeatureMap>> slots(n);
    parallel_for(n, threads,
                 [&](std::size_t i) { slots[i].emplace(synth_sample(ds.manifest, i, ds.labels[i])); });
    ds.maps.reserve(n);
    for (auto& s : slots) ds.maps.push_back(std::move(*s));
    return ds;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified split: per class, a seeded shuffle sends round(train_fraction
/// * count) samples to train and the rest to test. Index lists are sorted.
inline Split stratified_split(std::span<const std::int64_t> labels, std::uint64_t seed,
                              double train_fraction = 0.8) {
    detail::require(train_fraction > 0.0 && train_fraction < 1.0,
                    "stratified_split: train_fraction must be in (0, 1)");
    std::int64_t max_label = -1;
    for (auto y : labels) {
        detail::require(y >= 0, "stratified_split: labels must be non-negative");
        max_label = std::max(max_label, y);
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    Split split;
    std::mt19937_64 rng(detail::mix_seed(seed, 0x5917ULL));
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto cut = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        split.train.insert(split.train.end(), members.begin(), members.begin() + cut);
        split.test.insert(split.test.end(), members.begin() + cut, members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

}  // namespace dvpool
