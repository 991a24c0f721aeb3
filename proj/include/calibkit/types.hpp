// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/matrix.hpp"

namespace calibkit {

/// N x D image or class-text embeddings, stored as float32.
using EmbeddingMatrix = Matrix<float>;

/// Ground-truth class indices in [0, num_classes).
struct LabelVector {
    std::vector<std::uint32_t> labels;
    std::uint32_t num_classes = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }

    void validate() const {
        if (num_classes < 2) {
            throw ValidationError("num_classes must be >= 2, got " + std::to_string(num_classes));
        }
        if (labels.empty()) throw ValidationError("label vector is empty");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= num_classes) {
                throw RangeError("label " + std::to_string(labels[i]) + " at index " +
                                 std::to_string(i) + " is not < num_classes " +
                                 std::to_string(num_classes));
            }
        }
    }

    [[nodiscard]] LabelVector select(std::span<const std::size_t> indices) const {
        LabelVector out{{}, num_classes};
        out.labels.reserve(indices.size());
        for (auto i : indices) out.labels.push_back(labels[i]);
        return out;
    }

    friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

enum class Provenance { cosine_head, external };

inline std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::cosine_head ? "cosine_head" : "external";
}

inline Provenance provenance_from_string(std::string_view s) {
    if (s == "cosine_head") return Provenance::cosine_head;
    if (s == "external") return Provenance::external;
    throw FormatError("unknown logit provenance '" + std::string(s) + "'");
}

/// Fixed multiplier applied to cosine similarities by the zero-shot head.
inline constexpr double kCosineLogitScale = 100.0;

/// N x C pre-softmax scores.
///
/// `applied_temperature` tracks the product of every temperature divided out
/// so far; cosine-head logits stay within +-100 / applied_temperature.
class LogitMatrix {
public:
    LogitMatrix() = default;

    explicit LogitMatrix(Matrix<double> values, Provenance provenance = Provenance::external,
                         double applied_temperature = 1.0)
        : values_(std::move(values)),
          provenance_(provenance),
          applied_temperature_(applied_temperature) {
        if (!(applied_temperature_ > 0.0) || !std::isfinite(applied_temperature_)) {
            throw RangeError("applied temperature must be positive and finite");
        }
        const double bound = kCosineLogitScale / applied_temperature_;
        for (std::size_t i = 0; i < values_.rows(); ++i) {
            for (std::size_t c = 0; c < values_.cols(); ++c) {
                const double v = values_(i, c);
                if (!std::isfinite(v)) {
                    throw NonFiniteError("logit (" + std::to_string(i) + ", " + std::to_string(c) +
                                         ") is not finite");
                }
                if (provenance_ == Provenance::cosine_head && std::abs(v) > bound) {
                    throw RangeError("cosine-head logit (" + std::to_string(i) + ", " +
                                     std::to_string(c) + ") = " + std::to_string(v) +
                                     " outside [-100, 100] / T");
                }
            }
        }
    }

    [[nodiscard]] const Matrix<double>& values() const noexcept { return values_; }
    [[nodiscard]] Provenance provenance() const noexcept { return provenance_; }
    [[nodiscard]] double applied_temperature() const noexcept { return applied_temperature_; }
    [[nodiscard]] std::size_t rows() const noexcept { return values_.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return values_.cols(); }

    [[nodiscard]] LogitMatrix select_rows(std::span<const std::size_t> indices) const {
        return LogitMatrix(values_.select_rows(indices), provenance_, applied_temperature_);
    }

private:
    Matrix<double> values_;
    Provenance provenance_ = Provenance::external;
    double applied_temperature_ = 1.0;
};

/// Row-stochastic N x C matrix.
class ProbabilityMatrix {
public:
    static constexpr double kRowSumTolerance = 1e-9;

    ProbabilityMatrix() = default;

    explicit ProbabilityMatrix(Matrix<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.rows(); ++i) {
            double sum = 0.0;
            for (double p : values_.row(i)) {
                if (!(p >= 0.0) || p > 1.0) {
                    throw RangeError("probability outside [0, 1] in row " + std::to_string(i));
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                throw ValidationError("row " + std::to_string(i) + " sums to " +
                                      std::to_string(sum));
            }
        }
    }

    [[nodiscard]] const Matrix<double>& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t rows() const noexcept { return values_.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return values_.cols(); }

private:
    Matrix<double> values_;
};

/// Top-label predictions: argmax class, its probability, and whether it hit.
struct PredictionSet {
    std::vector<std::uint32_t> predicted;
    std::vector<double> confidence;
    std::vector<bool> correct;

    [[nodiscard]] std::size_t size() const noexcept { return confidence.size(); }

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

}  // namespace calibkit
