// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Post-hoc calibrators.
//
// Temperature scaling divides every logit by one scalar T > 0 and picks T by
// minimizing mean cross-entropy. The zero-shot variant fits T once on an
// auxiliary labeled set for a given (architecture, pre-training data) pair
// and reuses the stored record on any downstream dataset or prompt.
//
// Histogram binning and isotonic regression remap the top-label confidence
// only; predicted classes are never changed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/tensor_io.hpp"
#include "calibkit/types.hpp"
#include "calibkit/zeroshot.hpp"

namespace calibkit {

// ---- temperature scaling --------------------------------------------------

inline void check_temperature(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw RangeError("temperature must be positive and finite, got " + std::to_string(t));
    }
}

inline LogitMatrix apply_temperature(const LogitMatrix& logits, double temperature) {
    check_temperature(temperature);
    Matrix<double> scaled = logits.values();
    for (double& v : scaled.data()) v /= temperature;
    return LogitMatrix(std::move(scaled), logits.provenance(),
                       logits.applied_temperature() * temperature);
}

inline void check_shapes(const LogitMatrix& logits, const LabelVector& labels) {
    if (logits.rows() != labels.size()) {
        throw ShapeError("logits have " + std::to_string(logits.rows()) + " rows but there are " +
                         std::to_string(labels.size()) + " labels");
    }
    if (logits.cols() != labels.num_classes) {
        throw ShapeError("logits have " + std::to_string(logits.cols()) +
                         " columns but labels declare " + std::to_string(labels.num_classes) +
                         " classes");
    }
}

/// Mean NLL of softmax(logits / T) through log-sum-exp; agrees with
/// nll(softmax(apply_temperature(logits, T)), labels) up to rounding.
inline double temperature_nll(const LogitMatrix& logits, const LabelVector& labels, double temperature) {
    static const double log_floor = std::log(kNllProbabilityFloor);
    const double inv_t = 1.0 / temperature;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.values().row(i);
        const double peak = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp((v - peak) * inv_t);
        const double log_p = (row[labels.labels[i]] - peak) * inv_t - std::log(z);
        total -= std::max(log_p, log_floor);
    }
    return total / static_cast<double>(logits.rows());
}

struct TemperatureSearch {
    double t_min = 0.05;
    double t_max = 20.0;
    std::size_t grid_points = 200;
    double tolerance = 1e-4;
};

struct TracePoint {
    double temperature = 0.0;
    double nll = 0.0;
};

struct TemperatureFit {
    double temperature = 1.0;
    double nll_at_fit = 0.0;
    std::vector<TracePoint> sweep_trace;  // ascending in temperature
    std::vector<std::string> warnings;
};

/// `points` values geometrically spaced from t_min to t_max inclusive.
inline std::vector<double> log_spaced_grid(double t_min, double t_max, std::size_t points) {
    check_temperature(t_min);
    check_temperature(t_max);
    if (points == 0) throw RangeError("grid needs at least one point");
    if (points == 1) return {t_min};
    if (!(t_max > t_min)) throw RangeError("t_max must exceed t_min");
    std::vector<double> grid(points);
    const double lo = std::log(t_min);
    const double step = (std::log(t_max) - lo) / static_cast<double>(points - 1);
    for (std::size_t k = 0; k < points; ++k) grid[k] = std::exp(lo + step * static_cast<double>(k));
    grid.front() = t_min;
    grid.back() = t_max;
    return grid;
}

/// Minimizes mean NLL over T: a log-spaced grid scan, then golden-section
/// refinement inside the bracket around the best grid point. The returned T
/// is the minimum of every point evaluated (ties go to the smaller T).
inline TemperatureFit fit_temperature(const LogitMatrix& logits, const LabelVector& labels,
                                      const TemperatureSearch& search = {}) {
    check_shapes(logits, labels);
    if (search.grid_points < 3) throw RangeError("temperature search needs at least 3 grid points");
    if (!(search.tolerance > 0.0)) throw RangeError("search tolerance must be positive");

    TemperatureFit fit;
    if (labels.size() < labels.num_classes) {
        fit.warnings.push_back("small calibration set: N = " + std::to_string(labels.size()) +
                               " is below C = " + std::to_string(labels.num_classes) +
                               "; the fitted temperature may be unreliable");
    }

    const auto grid = log_spaced_grid(search.t_min, search.t_max, search.grid_points);
    std::vector<double> grid_nll(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) { grid_nll[k] = temperature_nll(logits, labels, grid[k]); });

    std::vector<TracePoint> trace;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        trace.push_back({grid[k], grid_nll[k]});
        if (std::isfinite(grid_nll[k]) && (!best || grid_nll[k] < grid_nll[*best])) best = k;
    }
    if (!best) throw FitError("NLL is non-finite at every grid temperature");

    auto eval = [&](double t) {
        const double v = temperature_nll(logits, labels, t);
        trace.push_back({t, v});
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    double a = grid[*best == 0 ? 0 : *best - 1];
    double b = grid[std::min(*best + 1, grid.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = eval(c);
    double fd = eval(d);
    while (b - a >= search.tolerance) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    eval(0.5 * (a + b));

    std::stable_sort(trace.begin(), trace.end(),
                     [](const TracePoint& x, const TracePoint& y) { return x.temperature < y.temperature; });
    const TracePoint* winner = nullptr;
    for (const auto& p : trace) {
        if (std::isfinite(p.nll) && (!winner || p.nll < winner->nll)) winner = &p;
    }
    fit.temperature = winner->temperature;
    fit.nll_at_fit = winner->nll;
    fit.sweep_trace = std::move(trace);
    return fit;
}

/// Identity of a CLIP-style model; one temperature is kept per pair.
struct ModelIdentity {
    std::string architecture;
    std::string pretrain_dataset;
};

struct AuxiliarySource {
    std::string dataset = "imagenet1k";
    std::string prompt_template = "a photo of {}";
};

/// Fits a transferable temperature on auxiliary data and packages it as a
/// record that can be applied to any downstream dataset and prompt.
inline TemperatureRecord fit_zero_shot_temperature(const LogitMatrix& aux_logits, const LabelVector& aux_labels,
                                                   const ModelIdentity& model, const AuxiliarySource& source = {},
                                                   Timestamp created_at = {},
                                                   const TemperatureSearch& search = {},
                                                   std::vector<std::string>* warnings = nullptr) {
    if (model.architecture.empty()) throw ValidationError("model identity is missing 'architecture'");
    if (model.pretrain_dataset.empty()) throw ValidationError("model identity is missing 'pretrain_dataset'");
    auto fit = fit_temperature(aux_logits, aux_labels, search);
    if (warnings) warnings->insert(warnings->end(), fit.warnings.begin(), fit.warnings.end());
    TemperatureRecord record;
    record.temperature = fit.temperature;
    record.architecture = model.architecture;
    record.pretrain_dataset = model.pretrain_dataset;
    record.auxiliary_dataset = source.dataset;
    record.prompt_template = source.prompt_template;
    record.fit_nll = fit.nll_at_fit;
    record.created_at = created_at;
    record.validate();
    return record;
}

struct SweepPoint {
    double temperature = 0.0;
    double ece = 0.0;
    double nll = 0.0;
};

/// ECE and NLL at every temperature in `grid`, in grid order.
inline std::vector<SweepPoint> temperature_sweep(const LogitMatrix& logits, const LabelVector& labels,
                                                 const std::vector<double>& grid,
                                                 std::size_t num_bins = kDefaultNumBins) {
    check_shapes(logits, labels);
    if (grid.empty()) throw RangeError("sweep grid is empty");
    for (double t : grid) check_temperature(t);
    std::vector<SweepPoint> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        const auto probs = softmax(apply_temperature(logits, grid[k]));
        const auto table = reliability_table(predict(probs, labels), num_bins);
        out[k] = {grid[k], ece(table), temperature_nll(logits, labels, grid[k])};
    });
    return out;
}

// ---- histogram binning ----------------------------------------------------

/// Equal-width bins over confidence; each bin maps to the calibration-set
/// accuracy observed there, or to its midpoint when no sample landed in it.
struct BinningCalibrator {
    std::size_t num_bins = kDefaultNumBins;
    std::vector<double> values;
    std::vector<std::size_t> counts;

    void validate() const {
        if (num_bins == 0) throw RangeError("num_bins must be >= 1");
        if (values.size() != num_bins || counts.size() != num_bins) {
            throw ShapeError("binning calibrator arrays must have num_bins entries");
        }
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) throw RangeError("binning value outside [0, 1]");
        }
    }

    [[nodiscard]] double map(double confidence) const { return values[bin_index(confidence, num_bins)]; }

    friend bool operator==(const BinningCalibrator&, const BinningCalibrator&) = default;
};

inline BinningCalibrator fit_histogram_binning(const PredictionSet& preds, std::size_t num_bins = kDefaultNumBins) {
    const auto table = reliability_table(preds, num_bins);
    BinningCalibrator cal{num_bins, std::vector<double>(num_bins), std::vector<std::size_t>(num_bins)};
    for (std::size_t b = 0; b < num_bins; ++b) {
        const auto& bin = table.bins[b];
        cal.counts[b] = bin.count;
        cal.values[b] = bin.count > 0 ? bin.accuracy : 0.5 * (bin_lower(b, num_bins) + bin_upper(b, num_bins));
    }
    return cal;
}

// ---- isotonic regression --------------------------------------------------

/// Weighted least-squares non-decreasing fit by pool-adjacent-violators.
/// Returns one fitted value per input, in input order.
inline std::vector<double> pava(const std::vector<double>& y, const std::vector<double>& w) {
    if (y.size() != w.size()) throw ShapeError("pava: values and weights differ in length");
    struct Block {
        double sum;
        double weight;
        std::size_t len;
    };
    std::vector<Block> stack;
    stack.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(w[i] > 0.0)) throw RangeError("pava: weights must be positive");
        stack.push_back({y[i] * w[i], w[i], 1});
        while (stack.size() > 1) {
            const auto& hi = stack[stack.size() - 1];
            const auto& lo = stack[stack.size() - 2];
            if (lo.sum / lo.weight <= hi.sum / hi.weight) break;
            Block merged{lo.sum + hi.sum, lo.weight + hi.weight, lo.len + hi.len};
            stack.pop_back();
            stack.back() = merged;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& blk : stack) out.insert(out.end(), blk.len, blk.sum / blk.weight);
    return out;
}

inline std::vector<double> pava(const std::vector<double>& y) {
    return pava(y, std::vector<double>(y.size(), 1.0));
}

/// Step function over confidence. A confidence maps to the value of the
/// nearest knot at or below it; anything below the first knot takes the first
/// value.
struct IsotonicCalibrator {
    std::vector<double> breakpoints;
    std::vector<double> values;

    void validate() const {
        if (breakpoints.empty() || breakpoints.size() != values.size()) {
            throw ShapeError("isotonic calibrator needs equal, non-zero numbers of knots and values");
        }
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!(values[k] >= 0.0 && values[k] <= 1.0)) throw RangeError("isotonic value outside [0, 1]");
            if (k > 0 && !(breakpoints[k] > breakpoints[k - 1])) {
                throw ValidationError("isotonic breakpoints must be strictly increasing");
            }
            if (k > 0 && values[k] < values[k - 1]) {
                throw ValidationError("isotonic values must be non-decreasing");
            }
        }
    }

    [[nodiscard]] double map(double confidence) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), confidence);
        const auto k = it == breakpoints.begin() ? 0 : static_cast<std::size_t>(it - breakpoints.begin()) - 1;
        return values[k];
    }

    friend bool operator==(const IsotonicCalibrator&, const IsotonicCalibrator&) = default;
};

/// Isotonic fit of correctness against confidence. Samples sharing a
/// confidence are pooled first, so each distinct confidence becomes one knot.
inline IsotonicCalibrator fit_isotonic(const PredictionSet& preds) {
    if (preds.size() == 0) throw ValidationError("prediction set is empty");
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds.confidence[a] < preds.confidence[b]; });

    IsotonicCalibrator cal;
    std::vector<double> hits;
    std::vector<double> weights;
    for (auto i : order) {
        const double x = preds.confidence[i];
        if (cal.breakpoints.empty() || x != cal.breakpoints.back()) {
            cal.breakpoints.push_back(x);
            hits.push_back(0.0);
            weights.push_back(0.0);
        }
        hits.back() += preds.correct[i] ? 1.0 : 0.0;
        weights.back() += 1.0;
    }
    std::vector<double> means(hits.size());
    for (std::size_t k = 0; k < hits.size(); ++k) means[k] = hits[k] / weights[k];
    cal.values = pava(means, weights);
    return cal;
}

using ConfidenceCalibrator = std::variant<BinningCalibrator, IsotonicCalibrator>;

template <typename Calibrator>
PredictionSet apply_confidence_calibrator(const Calibrator& calibrator, const PredictionSet& preds) {
    PredictionSet out = preds;
    for (double& c : out.confidence) c = calibrator.map(c);
    return out;
}

inline PredictionSet apply_confidence_calibrator(const ConfidenceCalibrator& calibrator,
                                                 const PredictionSet& preds) {
    return std::visit([&](const auto& cal) { return apply_confidence_calibrator(cal, preds); }, calibrator);
}

// ---- serialization --------------------------------------------------------

inline Json to_json(const BinningCalibrator& cal) {
    Json doc = Json::object();
    doc["kind"] = "histogram_binning";
    doc["num_bins"] = cal.num_bins;
    doc["values"] = cal.values;
    doc["counts"] = cal.counts;
    return doc;
}

inline Json to_json(const IsotonicCalibrator& cal) {
    Json doc = Json::object();
    doc["kind"] = "isotonic";
    doc["breakpoints"] = cal.breakpoints;
    doc["values"] = cal.values;
    return doc;
}

inline ConfidenceCalibrator calibrator_from_json(const Json& doc, const std::filesystem::path& origin = "<json>") {
    const auto kind = detail::json_field<std::string>(doc, "kind", origin);
    if (kind == "histogram_binning") {
        BinningCalibrator cal;
        cal.num_bins = detail::json_field<std::size_t>(doc, "num_bins", origin);
        cal.values = detail::json_field<std::vector<double>>(doc, "values", origin);
        cal.counts = detail::json_field<std::vector<std::size_t>>(doc, "counts", origin);
        cal.validate();
        return cal;
    }
    if (kind == "isotonic") {
        IsotonicCalibrator cal;
        cal.breakpoints = detail::json_field<std::vector<double>>(doc, "breakpoints", origin);
        cal.values = detail::json_field<std::vector<double>>(doc, "values", origin);
        cal.validate();
        return cal;
    }
    throw FormatError("'" + origin.string() + "' has unknown calibrator kind '" + kind + "'");
}

inline ConfidenceCalibrator read_calibrator(const std::filesystem::path& path) {
    return calibrator_from_json(detail::parse_json_file(path), path);
}

inline void write_calibrator(const ConfidenceCalibrator& calibrator, const std::filesystem::path& path) {
    std::visit(
        [&](const auto& cal) {
            cal.validate();
            detail::write_json_file(path, to_json(cal));
        },
        calibrator);
}

}  // namespace calibkit
