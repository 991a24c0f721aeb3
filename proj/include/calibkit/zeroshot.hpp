// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Zero-shot classification head: logits are 100 x cosine similarity between an
// image embedding and each class-text embedding, then a softmax.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/types.hpp"

namespace calibkit {

namespace detail {

inline std::vector<double> row_norms(const EmbeddingMatrix& m, const char* which) {
    std::vector<double> norms(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double ss = 0.0;
        for (float v : m.row(i)) ss += static_cast<double>(v) * static_cast<double>(v);
        norms[i] = std::sqrt(ss);
        if (!(norms[i] > 0.0)) {
            throw DegenerateEmbeddingError(std::string(which) + " row " + std::to_string(i) +
                                           " has zero norm");
        }
    }
    return norms;
}

}  // namespace detail

/// out(i, c) = 100 * cos(image_i, class_c), accumulated in double.
inline LogitMatrix cosine_logits(const EmbeddingMatrix& image_embs, const EmbeddingMatrix& class_embs) {
    if (image_embs.cols() != class_embs.cols()) {
        throw ShapeError("image embeddings have D = " + std::to_string(image_embs.cols()) +
                         " but class embeddings have D = " + std::to_string(class_embs.cols()));
    }
    if (image_embs.rows() == 0 || class_embs.rows() == 0) {
        throw ShapeError("embedding matrices must be non-empty");
    }
    const auto image_norms = detail::row_norms(image_embs, "image embedding");
    const auto class_norms = detail::row_norms(class_embs, "class embedding");

    Matrix<double> out(image_embs.rows(), class_embs.rows());
    for (std::size_t i = 0; i < image_embs.rows(); ++i) {
        const auto u = image_embs.row(i);
        for (std::size_t c = 0; c < class_embs.rows(); ++c) {
            const auto v = class_embs.row(c);
            double dot = 0.0;
            for (std::size_t d = 0; d < u.size(); ++d) {
                dot += static_cast<double>(u[d]) * static_cast<double>(v[d]);
            }
            const double cosine = std::clamp(dot / (image_norms[i] * class_norms[c]), -1.0, 1.0);
            out(i, c) = kCosineLogitScale * cosine;
        }
    }
    return LogitMatrix(std::move(out), Provenance::cosine_head);
}

/// Exp-normalizes one row in place after subtracting its maximum.
inline void softmax_row(std::span<const double> logits, std::span<double> out) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - peak);
        total += out[c];
    }
    for (double& p : out) p /= total;
}

inline ProbabilityMatrix softmax(const LogitMatrix& logits) {
    Matrix<double> probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        softmax_row(logits.values().row(i), probs.row(i));
    }
    return ProbabilityMatrix(std::move(probs));
}

/// Index of the row maximum; ties resolve to the lowest index.
template <typename T>
std::uint32_t argmax(std::span<const T> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return static_cast<std::uint32_t>(best);
}

inline PredictionSet predict(const ProbabilityMatrix& probs, const LabelVector& labels) {
    if (probs.rows() != labels.size()) {
        throw ShapeError("probabilities have " + std::to_string(probs.rows()) + " rows but there are " +
                         std::to_string(labels.size()) + " labels");
    }
    if (probs.cols() != labels.num_classes) {
        throw ShapeError("probabilities have " + std::to_string(probs.cols()) +
                         " classes but labels declare " + std::to_string(labels.num_classes));
    }
    PredictionSet out;
    out.predicted.reserve(probs.rows());
    out.confidence.reserve(probs.rows());
    out.correct.reserve(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto row = probs.values().row(i);
        const auto k = argmax(row);
        out.predicted.push_back(k);
        out.confidence.push_back(row[k]);
        out.correct.push_back(k == labels.labels[i]);
    }
    return out;
}

}  // namespace calibkit
