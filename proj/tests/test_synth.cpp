// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "calibkit/calibrators.hpp"
#include "calibkit/synth.hpp"

namespace calibkit {
namespace {

double ece_at(const LogitMatrix& logits, const LabelVector& labels) {
    return ece(reliability_table(predict(softmax(logits), labels), 10));
}

TEST(Synth, DeterministicPerSeed) {
    const SynthSpec spec{500, 7, 1.5, 4.0, 42};
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_EQ(a.logits.values(), b.logits.values());
    EXPECT_EQ(a.labels, b.labels);

    auto other = spec;
    other.seed = 43;
    EXPECT_NE(generate(other).logits.values(), a.logits.values());
}

TEST(Synth, RowsIndependentOfN) {
    const auto small = generate({10, 5, 1.0, 5.0, 3});
    const auto large = generate({100, 5, 1.0, 5.0, 3});
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(small.logits.values()(i, c), large.logits.values()(i, c));
        EXPECT_EQ(small.labels.labels[i], large.labels.labels[i]);
    }
}

TEST(Synth, ShapesAndFloat32Values) {
    const auto d = generate({64, 12, 2.0, 5.0, 9});
    EXPECT_EQ(d.logits.rows(), 64u);
    EXPECT_EQ(d.logits.cols(), 12u);
    EXPECT_EQ(d.labels.num_classes, 12u);
    d.labels.validate();
    for (double v : d.logits.values().data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Synth, RejectsBadParameters) {
    EXPECT_THROW(generate({0, 10, 1.0, 5.0, 0}), ValidationError);
    EXPECT_THROW(generate({10, 1, 1.0, 5.0, 0}), ValidationError);
    EXPECT_THROW(generate({10, 10, 0.0, 5.0, 0}), RangeError);
    EXPECT_THROW(generate({10, 10, -1.0, 5.0, 0}), RangeError);
    EXPECT_THROW(generate({10, 10, 1.0, 0.0, 0}), RangeError);
}

TEST(SampleCategorical, InverseCdf) {
    const std::vector<double> p{0.2, 0.5, 0.3};
    EXPECT_EQ(sample_categorical(p, 0.0), 0u);
    EXPECT_EQ(sample_categorical(p, 0.19), 0u);
    EXPECT_EQ(sample_categorical(p, 0.2), 1u);
    EXPECT_EQ(sample_categorical(p, 0.69), 1u);
    EXPECT_EQ(sample_categorical(p, 0.7), 2u);
    EXPECT_EQ(sample_categorical(p, 0.999999), 2u);
}

TEST(Synth, CalibratedWhenPlantedAtOne) {
    const auto d = generate({100000, 10, 1.0, 5.0, 1});
    EXPECT_LT(ece_at(d.logits, d.labels), 0.01);
    const double t = fit_temperature(d.logits, d.labels).temperature;
    EXPECT_GE(t, 0.95);
    EXPECT_LE(t, 1.05);
}

TEST(Synth, OverconfidentWhenPlantedAtThree) {
    const auto d = generate({50000, 10, 3.0, 5.0, 2});
    const auto preds = predict(softmax(d.logits), d.labels);
    const auto table = reliability_table(preds, 10);
    const double before = ece(table);
    const double after = ece_at(apply_temperature(d.logits, 3.0), d.labels);
    EXPECT_LT(after, before);
    EXPECT_GT(before, 0.1);
    for (const auto& bin : table.bins) {
        if (bin.count >= 500) {
            EXPECT_GE(bin.mean_confidence - bin.accuracy, 0.0);
        }
    }
}

}  // namespace
}  // namespace calibkit
