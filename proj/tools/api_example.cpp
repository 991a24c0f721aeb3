// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Library walkthrough: fit a temperature once on an auxiliary problem, then
// reuse it on a different problem from the same model.

#include <cstdio>

#include "calibkit/calibkit.hpp"

int main() {
    using namespace calibkit;

    // Stand-ins for a model's logits on an auxiliary set and on a new task.
    const auto auxiliary = generate({.n = 20000, .c = 10, .planted_temperature = 1.5, .seed = 1});
    const auto downstream = generate({.n = 5000, .c = 37, .planted_temperature = 1.5, .seed = 2});

    const auto record = fit_zero_shot_temperature(auxiliary.logits, auxiliary.labels, {"ViT-B-16", "laion400m"});

    const auto before = evaluate(downstream.logits, downstream.labels);
    const auto after = evaluate(apply_temperature(downstream.logits, record.temperature), downstream.labels);

    std::printf("T = %.4f\n", record.temperature);
    std::printf("accuracy %.2f%% -> %.2f%%\n", 100 * before.accuracy, 100 * after.accuracy);
    std::printf("ECE      %.2f%% -> %.2f%%\n", 100 * before.ece, 100 * after.ece);
    std::printf("NLL      %.4f -> %.4f\n", before.nll, after.nll);
    return after.ece < before.ece ? 0 : 1;
}
