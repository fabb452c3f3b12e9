#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dvpool/pooling.hpp"
#include "dvpool/synth.hpp"

using namespace dvpool;

namespace {

SynthSpec noiseless() {
    SynthSpec s;
    s.sigma = 0.0;
    s.samples_per_class = 3;
    return s;
}

}  // namespace

TEST(Synth, SpecValidation) {
    SynthSpec s;
    s.classes = 3;
    EXPECT_THROW(generate(s), ContractViolation);
    s = SynthSpec{};
    s.sigma = -1.0;
    EXPECT_THROW(generate(s), ContractViolation);
    s = SynthSpec{};
    s.spatial = {8};
    EXPECT_THROW(generate(s), ContractViolation);
    s = SynthSpec{};
    s.channels = 0;
    EXPECT_THROW(generate(s), ContractViolation);
}

TEST(Synth, DefaultShapeAndLabels) {
    const auto ds = generate(SynthSpec{});
    ASSERT_EQ(ds.maps.size(), 400u);
    EXPECT_EQ(ds.maps[0].shape(), (Shape{16, 8, 8}));
    EXPECT_EQ(ds.manifest.templates.size(), 4u);
    EXPECT_EQ(ds.manifest.signatures.size(), 2u);
    for (std::int64_t k = 0; k < 4; ++k)
        EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), k), 100);
}

TEST(Synth, SignaturesAndTemplatesAreZeroMean) {
    const auto m = make_manifest(SynthSpec{});
    for (const auto& s : m.signatures) EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 0.0, 1e-12);
    for (const auto& t : m.templates) EXPECT_NEAR(std::accumulate(t.begin(), t.end(), 0.0), 0.0, 1e-12);
    EXPECT_NE(m.templates[0], m.templates[1]);
    EXPECT_EQ(m.templates[0], m.templates[2]);
}

TEST(Synth, NoiselessGapIdenticalWithinPairs) {
    const auto ds = generate(noiseless());
    const std::size_t per = 3;
    for (std::size_t j = 0; j < 2; ++j) {
        const auto a = global_average_pool(ds.maps[(2 * j) * per]);
        const auto b = global_average_pool(ds.maps[(2 * j + 1) * per]);
        EXPECT_EQ(a.data, b.data);
    }
    // ... but not across pairs.
    EXPECT_NE(global_average_pool(ds.maps[0]).data, global_average_pool(ds.maps[2 * per]).data);
}

TEST(Synth, NoiselessCapDiffersByTemplateDifference) {
    const auto ds = generate(noiseless());
    const auto& m = ds.manifest;
    const std::size_t per = 3;
    for (std::size_t j = 0; j < 2; ++j) {
        const auto a = cross_channel_average_pool(ds.maps[(2 * j) * per]);
        const auto b = cross_channel_average_pool(ds.maps[(2 * j + 1) * per]);
        for (std::size_t p = 0; p < a.size(); ++p)
            EXPECT_NEAR(a.data[p] - b.data[p], m.templates[2 * j][p] - m.templates[2 * j + 1][p], 1e-12);
    }
    // CAP cannot tell pairs apart: classes 0 and 2 share the template.
    const auto c0 = cross_channel_average_pool(ds.maps[0]);
    const auto c2 = cross_channel_average_pool(ds.maps[2 * per]);
    for (std::size_t p = 0; p < c0.size(); ++p) EXPECT_NEAR(c0.data[p], c2.data[p], 1e-12);
}

TEST(Synth, DeterministicAcrossThreadCounts) {
    SynthSpec s;
    s.samples_per_class = 20;
    s.seed = 99;
    const auto a = generate(s, 1);
    const auto b = generate(s, 4);
    const auto c = generate(s, 7);
    ASSERT_EQ(a.maps.size(), b.maps.size());
    for (std::size_t i = 0; i < a.maps.size(); ++i) {
        EXPECT_TRUE(std::ranges::equal(a.maps[i].data(), b.maps[i].data()));
        EXPECT_TRUE(std::ranges::equal(a.maps[i].data(), c.maps[i].data()));
    }
    s.seed = 100;
    const auto d = generate(s, 1);
    EXPECT_FALSE(std::ranges::equal(a.maps[0].data(), d.maps[0].data()));
}

TEST(Synth, ManifestRegeneratesSamples) {
    const auto ds = generate(SynthSpec{});
    for (std::size_t i : {0u, 57u, 399u}) {
        const auto again = synth_sample(ds.manifest, i, ds.labels[i]);
        EXPECT_TRUE(std::ranges::equal(again.data(), ds.maps[i].data()));
    }
}

TEST(Synth, ChannelShuffleKeepsCapAndPermutesGap) {
    SynthSpec spec;
    spec.samples_per_class = 2;
    const auto ds = generate(spec);
    std::mt19937_64 rng(5);
    std::vector<std::size_t> perm(spec.channels);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (const auto& x : ds.maps) {
        const std::size_t plane = x.spatial_size();
        std::vector<double> v(x.size());
        for (std::size_t c = 0; c < spec.channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) v[c * plane + p] = x.at(perm[c], p);
        const FeatureMap y(x.shape(), v);
        const auto cx = cross_channel_average_pool(x), cy = cross_channel_average_pool(y);
        for (std::size_t p = 0; p < plane; ++p) EXPECT_NEAR(cx.data[p], cy.data[p], 1e-12);
        const auto gx = global_average_pool(x), gy = global_average_pool(y);
        for (std::size_t c = 0; c < spec.channels; ++c) EXPECT_EQ(gy.data[c], gx.data[perm[c]]);
    }
}

TEST(Synth, Volumetric) {
    SynthSpec s;
    s.spatial = {3, 4, 4};
    s.samples_per_class = 2;
    const auto ds = generate(s);
    EXPECT_EQ(ds.maps[0].shape(), (Shape{16, 3, 4, 4}));
}

TEST(Split, StratifiedEightyTwenty) {
    const auto ds = generate(SynthSpec{});
    const auto split = stratified_split(ds.labels, 0);
    EXPECT_EQ(split.train.size(), 320u);
    EXPECT_EQ(split.test.size(), 80u);
    std::vector<int> per_class(4, 0);
    for (auto i : split.test) ++per_class[static_cast<std::size_t>(ds.labels[i])];
    EXPECT_EQ(per_class, (std::vector<int>{20, 20, 20, 20}));
    std::vector<std::size_t> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
    const auto again = stratified_split(ds.labels, 0);
    EXPECT_EQ(again.test, split.test);
    EXPECT_NE(stratified_split(ds.labels, 1).test, split.test);
}
