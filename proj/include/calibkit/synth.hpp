// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Synthetic prediction problems with a planted temperature.
//
// Row i draws C standard normals from Xoshiro256::for_stream(seed, i), scales
// them by logit_scale and rounds them to float32 (the on-disk precision), then
// samples the label by inverse CDF from softmax(row / T*) with one further
// uniform from the same stream. Dividing the logits by T* therefore yields a
// model that is calibrated in expectation.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/random.hpp"
#include "calibkit/types.hpp"
#include "calibkit/zeroshot.hpp"

namespace calibkit {

struct SynthSpec {
    std::size_t n = 1000;
    std::size_t c = 10;
    double planted_temperature = 1.0;
    double logit_scale = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw ValidationError("synth: n must be >= 1");
        if (c < 2) throw ValidationError("synth: c must be >= 2");
        if (!(planted_temperature > 0.0) || !std::isfinite(planted_temperature)) {
            throw RangeError("synth: planted temperature must be positive and finite");
        }
        if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) {
            throw RangeError("synth: logit scale must be positive and finite");
        }
    }
};

struct SynthData {
    LogitMatrix logits;
    LabelVector labels;
};

/// Inverse-CDF draw from a probability row given u in [0, 1).
inline std::uint32_t sample_categorical(std::span<const double> probs, double u) {
    double cumulative = 0.0;
    for (std::size_t c = 0; c + 1 < probs.size(); ++c) {
        cumulative += probs[c];
        if (u < cumulative) return static_cast<std::uint32_t>(c);
    }
    return static_cast<std::uint32_t>(probs.size() - 1);
}

inline SynthData generate(const SynthSpec& spec) {
    spec.validate();
    Matrix<double> logits(spec.n, spec.c);
    LabelVector labels{std::vector<std::uint32_t>(spec.n), static_cast<std::uint32_t>(spec.c)};
    std::vector<double> scaled(spec.c);
    std::vector<double> probs(spec.c);
    for (std::size_t i = 0; i < spec.n; ++i) {
        auto rng = Xoshiro256::for_stream(spec.seed, i);
        auto row = logits.row(i);
        for (std::size_t c = 0; c < spec.c; ++c) {
            row[c] = static_cast<double>(static_cast<float>(spec.logit_scale * rng.normal()));
            scaled[c] = row[c] / spec.planted_temperature;
        }
        softmax_row(scaled, probs);
        labels.labels[i] = sample_categorical(probs, rng.uniform());
    }
    return {LogitMatrix(std::move(logits)), std::move(labels)};
}

}  // namespace calibkit
