// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Calibration diagnostics.
//
// Confidences are grouped into M equal-width bins. Bin m (1-based) covers
// ((m-1)/M, m/M], except bin 1 which is closed at zero: [0, 1/M]. A
// confidence sitting exactly on an interior edge m/M therefore belongs to
// bin m. Empty bins report mean confidence and accuracy of 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/tensor_io.hpp"
#include "calibkit/types.hpp"
#include "calibkit/zeroshot.hpp"

namespace calibkit {

inline constexpr std::size_t kDefaultNumBins = 10;

/// Floor applied to the true-class probability before taking its log.
inline constexpr double kNllProbabilityFloor = 1e-300;

/// Lower edge of 0-based bin `b`.
inline double bin_lower(std::size_t b, std::size_t num_bins) noexcept {
    return static_cast<double>(b) / static_cast<double>(num_bins);
}

/// Upper edge of 0-based bin `b`.
inline double bin_upper(std::size_t b, std::size_t num_bins) noexcept {
    return static_cast<double>(b + 1) / static_cast<double>(num_bins);
}

/// 0-based bin holding `confidence`, consistent with bin_lower/bin_upper.
inline std::size_t bin_index(double confidence, std::size_t num_bins) {
    if (num_bins == 0) throw RangeError("num_bins must be >= 1");
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw RangeError("confidence " + std::to_string(confidence) + " outside [0, 1]");
    }
    const double scaled = std::ceil(confidence * static_cast<double>(num_bins));
    std::size_t b = scaled <= 1.0 ? 0 : static_cast<std::size_t>(scaled) - 1;
    b = std::min(b, num_bins - 1);
    // confidence * M can round across an edge; settle against the exact edges.
    while (b > 0 && confidence <= bin_lower(b, num_bins)) --b;
    while (b + 1 < num_bins && confidence > bin_upper(b, num_bins)) ++b;
    return b;
}

struct ReliabilityBin {
    std::size_t count = 0;
    std::size_t correct = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;

    friend bool operator==(const ReliabilityBin&, const ReliabilityBin&) = default;
};

struct ReliabilityTable {
    std::vector<ReliabilityBin> bins;

    [[nodiscard]] std::size_t num_bins() const noexcept { return bins.size(); }

    [[nodiscard]] std::size_t total() const noexcept {
        std::size_t n = 0;
        for (const auto& b : bins) n += b.count;
        return n;
    }

    friend bool operator==(const ReliabilityTable&, const ReliabilityTable&) = default;
};

inline ReliabilityTable reliability_table(const PredictionSet& preds, std::size_t num_bins = kDefaultNumBins) {
    if (num_bins == 0) throw RangeError("num_bins must be >= 1");
    if (preds.size() == 0) throw ValidationError("prediction set is empty");
    if (preds.correct.size() != preds.size()) {
        throw ShapeError("prediction set has mismatched confidence/correct lengths");
    }
    std::vector<double> conf_sum(num_bins, 0.0);
    ReliabilityTable table{std::vector<ReliabilityBin>(num_bins)};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto b = bin_index(preds.confidence[i], num_bins);
        table.bins[b].count += 1;
        table.bins[b].correct += preds.correct[i] ? 1 : 0;
        conf_sum[b] += preds.confidence[i];
    }
    for (std::size_t b = 0; b < num_bins; ++b) {
        auto& bin = table.bins[b];
        if (bin.count == 0) continue;
        const auto n = static_cast<double>(bin.count);
        bin.mean_confidence = conf_sum[b] / n;
        bin.accuracy = static_cast<double>(bin.correct) / n;
    }
    return table;
}

/// Sum over bins of (|B_m| / N) * |mean confidence - accuracy|.
inline double ece(const ReliabilityTable& table) {
    const auto n = static_cast<double>(table.total());
    if (n == 0.0) return 0.0;
    double total = 0.0;
    for (const auto& bin : table.bins) {
        if (bin.count == 0) continue;
        total += (static_cast<double>(bin.count) / n) * std::abs(bin.mean_confidence - bin.accuracy);
    }
    return total;
}

inline double accuracy(const PredictionSet& preds) {
    if (preds.size() == 0) throw ValidationError("prediction set is empty");
    std::size_t hits = 0;
    for (bool c : preds.correct) hits += c ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// Mean negative log-likelihood of the true class, in nats per sample.
inline double nll(const ProbabilityMatrix& probs, const LabelVector& labels) {
    if (probs.rows() != labels.size() || probs.cols() != labels.num_classes) {
        throw ShapeError("probabilities are " + std::to_string(probs.rows()) + "x" +
                         std::to_string(probs.cols()) + " but labels are " +
                         std::to_string(labels.size()) + " over " + std::to_string(labels.num_classes) +
                         " classes");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        total -= std::log(std::max(probs.values()(i, labels.labels[i]), kNllProbabilityFloor));
    }
    return total / static_cast<double>(probs.rows());
}

struct EvalReport {
    double ece = 0.0;
    double accuracy = 0.0;
    double nll = 0.0;
    ReliabilityTable table;
    std::size_t n = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline EvalReport make_report(const PredictionSet& preds, double nll_value, std::size_t num_bins) {
    EvalReport report;
    report.table = reliability_table(preds, num_bins);
    report.ece = ece(report.table);
    report.accuracy = accuracy(preds);
    report.nll = nll_value;
    report.n = preds.size();
    return report;
}

/// Full diagnostic pass over a logit matrix.
inline EvalReport evaluate(const LogitMatrix& logits, const LabelVector& labels,
                           std::size_t num_bins = kDefaultNumBins) {
    const auto probs = softmax(logits);
    return make_report(predict(probs, labels), nll(probs, labels), num_bins);
}

inline Json to_json(const ReliabilityTable& table) {
    Json bins = Json::array();
    const auto m = table.num_bins();
    for (std::size_t b = 0; b < m; ++b) {
        const auto& bin = table.bins[b];
        Json j = Json::object();
        j["bin"] = b + 1;
        j["lower"] = bin_lower(b, m);
        j["upper"] = bin_upper(b, m);
        j["count"] = bin.count;
        j["correct"] = bin.correct;
        j["mean_confidence"] = bin.mean_confidence;
        j["accuracy"] = bin.accuracy;
        bins.push_back(std::move(j));
    }
    Json doc = Json::object();
    doc["num_bins"] = m;
    doc["bins"] = std::move(bins);
    return doc;
}

inline ReliabilityTable table_from_json(const Json& doc) {
    ReliabilityTable table;
    const auto m = detail::json_field<std::size_t>(doc, "num_bins", "<reliability table>");
    const auto& bins = doc.at("bins");
    if (!bins.is_array() || bins.size() != m) throw FormatError("reliability table has wrong bin count");
    for (const auto& j : bins) {
        ReliabilityBin bin;
        bin.count = j.at("count").get<std::size_t>();
        bin.correct = j.at("correct").get<std::size_t>();
        bin.mean_confidence = j.at("mean_confidence").get<double>();
        bin.accuracy = j.at("accuracy").get<double>();
        table.bins.push_back(bin);
    }
    return table;
}

inline Json to_json(const EvalReport& report) {
    Json doc = Json::object();
    doc["n"] = report.n;
    doc["ece"] = report.ece;
    doc["accuracy"] = report.accuracy;
    doc["nll"] = report.nll;
    doc["reliability"] = to_json(report.table);
    return doc;
}

inline EvalReport report_from_json(const Json& doc) {
    EvalReport report;
    report.n = detail::json_field<std::size_t>(doc, "n", "<report>");
    report.ece = detail::json_field<double>(doc, "ece", "<report>");
    report.accuracy = detail::json_field<double>(doc, "accuracy", "<report>");
    report.nll = detail::json_field<double>(doc, "nll", "<report>");
    report.table = table_from_json(doc.at("reliability"));
    return report;
}

}  // namespace calibkit
