// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The CLI workflow as plain functions. tools/calibkit.cpp only parses flags
// and dispatches here, so every subcommand is also callable in-process.
//
// Commands throw calibkit::Error on bad input; Error::is_usage() decides
// between exit code 2 (usage/validation) and 1 (runtime failure).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "calibkit/calibrators.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/random.hpp"
#include "calibkit/report.hpp"
#include "calibkit/synth.hpp"
#include "calibkit/tensor_io.hpp"
#include "calibkit/zeroshot.hpp"

namespace calibkit::cli {

namespace fs = std::filesystem;

inline constexpr const char* kLogitsFile = "logits.calibmx";
inline constexpr const char* kLabelsFile = "labels.json";

// ---- shared plumbing ------------------------------------------------------

inline void require_file(const fs::path& path, const std::string& flag) {
    if (path.empty()) throw ValidationError(flag + " is required");
    if (!fs::is_regular_file(path)) throw ValidationError(flag + ": no such file '" + path.string() + "'");
}

inline void prepare_output(const fs::path& path) {
    if (path.empty()) throw ValidationError("output path is empty");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

/// Record timestamp: explicit value, else SOURCE_DATE_EPOCH, else now.
inline Timestamp resolve_created_at(const std::optional<std::string>& explicit_value) {
    if (explicit_value) return parse_timestamp(*explicit_value);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return Timestamp{std::chrono::seconds{std::stoll(epoch)}};
        } catch (...) {
            throw ValidationError("SOURCE_DATE_EPOCH is not an integer");
        }
    }
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

struct Split {
    std::vector<std::size_t> calibration;
    std::vector<std::size_t> evaluation;
};

/// Seeded calibration/evaluation split. `fraction` of the samples (rounded)
/// go to calibration; both halves keep the original sample order.
inline Split split_indices(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("--split must be in (0, 1]");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Xoshiro256 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    auto n_cal = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_cal = std::min(n_cal, n);
    if (fraction == 1.0) n_cal = n;
    if (n_cal == 0) throw ValidationError("--split leaves the calibration set empty");
    if (fraction < 1.0 && n_cal == n) throw ValidationError("--split leaves the evaluation set empty");

    Split s;
    s.calibration.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_cal));
    s.evaluation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_cal), perm.end());
    std::sort(s.calibration.begin(), s.calibration.end());
    std::sort(s.evaluation.begin(), s.evaluation.end());
    return s;
}

struct Dataset {
    LogitMatrix logits;
    LabelVector labels;
};

inline Dataset load_dataset(const fs::path& logits_path, const fs::path& labels_path) {
    require_file(logits_path, "--logits");
    require_file(labels_path, "--labels");
    Dataset d{read_logits(logits_path), read_labels(labels_path)};
    check_shapes(d.logits, d.labels);
    return d;
}

inline std::string percent(double v) { return detail::fmt("%.2f", 100.0 * v) + "%"; }

inline double ece_of(const LogitMatrix& logits, const LabelVector& labels, std::size_t num_bins) {
    return ece(reliability_table(predict(softmax(logits), labels), num_bins));
}

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
    SynthSpec spec;
    fs::path out_dir;
};

inline void cmd_synth(const SynthOptions& opt, std::ostream& out) {
    if (opt.out_dir.empty()) throw ValidationError("--out is required");
    opt.spec.validate();
    fs::create_directories(opt.out_dir);
    const auto data = generate(opt.spec);
    Json meta = Json::object();
    meta["generator"] = "calibkit-synth";
    meta["n"] = opt.spec.n;
    meta["c"] = opt.spec.c;
    meta["planted_temperature"] = opt.spec.planted_temperature;
    meta["logit_scale"] = opt.spec.logit_scale;
    meta["seed"] = opt.spec.seed;
    write_logits(data.logits, opt.out_dir / kLogitsFile, meta);
    write_labels(data.labels, opt.out_dir / kLabelsFile);
    out << "wrote " << (opt.out_dir / kLogitsFile).string() << " (" << opt.spec.n << "x" << opt.spec.c
        << ") and " << (opt.out_dir / kLabelsFile).string() << "\n";
}

// ---- logits ---------------------------------------------------------------

struct LogitsOptions {
    fs::path image_embeddings;
    fs::path class_embeddings;
    fs::path out;
};

inline LogitMatrix cmd_logits(const LogitsOptions& opt, std::ostream& out) {
    require_file(opt.image_embeddings, "--images");
    require_file(opt.class_embeddings, "--classes");
    const auto images = read_matrix(opt.image_embeddings);
    const auto classes = read_matrix(opt.class_embeddings);
    auto logits = cosine_logits(images.data, classes.data);
    prepare_output(opt.out);
    Json meta = Json::object();
    meta["image_embeddings"] = opt.image_embeddings.string();
    meta["class_embeddings"] = opt.class_embeddings.string();
    write_logits(logits, opt.out, meta);
    out << "wrote " << opt.out.string() << " (" << logits.rows() << "x" << logits.cols() << ")\n";
    return logits;
}

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
    fs::path logits;
    fs::path labels;
    std::optional<fs::path> temperature_record;
    std::optional<fs::path> calibrator;
    std::size_t num_bins = kDefaultNumBins;
    std::string out_prefix;
    std::string title;
};

struct EvalOutputs {
    fs::path report_json;
    fs::path reliability_svg;
    fs::path histogram_svg;
};

inline EvalOutputs eval_outputs(const std::string& prefix) {
    return {prefix + ".report.json", prefix + ".reliability.svg", prefix + ".histogram.svg"};
}

inline EvalReport cmd_eval(const EvalOptions& opt, std::ostream& out) {
    if (opt.out_prefix.empty()) throw ValidationError("--out-prefix is required");
    if (opt.num_bins == 0) throw ValidationError("--bins must be >= 1");
    auto data = load_dataset(opt.logits, opt.labels);
    std::optional<TemperatureRecord> record;
    if (opt.temperature_record) {
        require_file(*opt.temperature_record, "--temperature-record");
        record = read_temperature_record(*opt.temperature_record);
    }
    std::optional<ConfidenceCalibrator> calibrator;
    if (opt.calibrator) {
        require_file(*opt.calibrator, "--calibrator");
        calibrator = read_calibrator(*opt.calibrator);
    }

    if (record) data.logits = apply_temperature(data.logits, record->temperature);
    const auto probs = softmax(data.logits);
    auto preds = predict(probs, data.labels);
    if (calibrator) preds = apply_confidence_calibrator(*calibrator, preds);
    const auto report = make_report(preds, nll(probs, data.labels), opt.num_bins);

    const auto paths = eval_outputs(opt.out_prefix);
    prepare_output(paths.report_json);
    Json doc = to_json(report);
    if (record) doc["temperature"] = record->temperature;
    detail::write_json_file(paths.report_json, doc);
    render_reliability_svg(report, paths.reliability_svg, opt.title);
    render_histogram_svg(report, paths.histogram_svg, opt.title);

    out << "n = " << report.n << "  accuracy = " << percent(report.accuracy) << "  ECE = " << percent(report.ece)
        << "  NLL = " << detail::fmt("%.6f", report.nll);
    if (record) out << "  (T = " << detail::fmt("%.6g", record->temperature) << ")";
    out << "\n";
    return report;
}

// ---- temperature fitting --------------------------------------------------

struct FitTsOptions {
    fs::path logits;
    fs::path labels;
    double split = 0.5;
    std::uint64_t seed = 0;
    std::size_t num_bins = kDefaultNumBins;
    fs::path out;
    std::string architecture = "unspecified";
    std::string pretrain_dataset = "unspecified";
    std::string dataset;
    std::string prompt_template;
    std::optional<std::string> created_at;
};

inline TemperatureRecord cmd_fit_ts(const FitTsOptions& opt, std::ostream& out, std::ostream& err) {
    if (opt.out.empty()) throw ValidationError("--out is required");
    const auto data = load_dataset(opt.logits, opt.labels);
    if (data.labels.size() < 2) throw ValidationError("fit-ts needs at least 2 samples");
    const auto split = split_indices(data.labels.size(), opt.split, opt.seed);
    const auto cal_logits = data.logits.select_rows(split.calibration);
    const auto cal_labels = data.labels.select(split.calibration);

    const auto fit = fit_temperature(cal_logits, cal_labels);
    for (const auto& w : fit.warnings) err << "warning: " << w << "\n";

    TemperatureRecord record;
    record.temperature = fit.temperature;
    record.architecture = opt.architecture;
    record.pretrain_dataset = opt.pretrain_dataset;
    record.auxiliary_dataset = opt.dataset.empty() ? opt.logits.stem().string() : opt.dataset;
    record.prompt_template = opt.prompt_template;
    record.fit_nll = fit.nll_at_fit;
    record.created_at = resolve_created_at(opt.created_at);
    prepare_output(opt.out);
    write_temperature_record(record, opt.out);

    out << "T = " << detail::fmt("%.6f", fit.temperature) << "  calibration NLL = "
        << detail::fmt("%.6f", fit.nll_at_fit) << "  (" << split.calibration.size() << " samples)\n";
    if (split.evaluation.empty()) {
        err << "warning: --split 1.0 fits on all data; no held-out ECE is reported\n";
    } else {
        const auto ev_logits = data.logits.select_rows(split.evaluation);
        const auto ev_labels = data.labels.select(split.evaluation);
        out << "held-out ECE: uncalibrated " << percent(ece_of(ev_logits, ev_labels, opt.num_bins))
            << ", calibrated " << percent(ece_of(apply_temperature(ev_logits, fit.temperature), ev_labels, opt.num_bins))
            << "  (" << split.evaluation.size() << " samples)\n";
    }
    return record;
}

struct FitZstsOptions {
    fs::path logits;
    fs::path labels;
    std::string architecture;
    std::string pretrain_dataset;
    std::string auxiliary_dataset = "imagenet1k";
    std::string prompt_template = "a photo of {}";
    fs::path out;
    std::optional<std::string> created_at;
};

inline TemperatureRecord cmd_fit_zsts(const FitZstsOptions& opt, std::ostream& out, std::ostream& err) {
    if (opt.architecture.empty()) throw ValidationError("--arch is required");
    if (opt.pretrain_dataset.empty()) throw ValidationError("--pretrain is required");
    if (opt.out.empty()) throw ValidationError("--out is required");
    const auto data = load_dataset(opt.logits, opt.labels);
    std::vector<std::string> warnings;
    const auto record = fit_zero_shot_temperature(
        data.logits, data.labels, {opt.architecture, opt.pretrain_dataset},
        {opt.auxiliary_dataset, opt.prompt_template}, resolve_created_at(opt.created_at), {}, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    prepare_output(opt.out);
    write_temperature_record(record, opt.out);
    out << "T = " << detail::fmt("%.6f", record.temperature) << " for " << record.architecture << "/"
        << record.pretrain_dataset << " (auxiliary: " << record.auxiliary_dataset << ", NLL "
        << detail::fmt("%.6f", record.fit_nll) << ")\n";
    return record;
}

// ---- sweep ----------------------------------------------------------------

struct SweepOptions {
    fs::path logits;
    fs::path labels;
    double t_min = 0.5;
    double t_max = 5.0;
    std::size_t points = 46;
    std::size_t num_bins = kDefaultNumBins;
    fs::path out;
};

inline std::vector<SweepPoint> cmd_sweep(const SweepOptions& opt, std::ostream& out) {
    if (!(opt.t_min > 0.0)) throw ValidationError("--t-min must be positive");
    if (!(opt.t_max > opt.t_min)) throw ValidationError("--t-max must exceed --t-min");
    if (opt.points < 2) throw ValidationError("--points must be >= 2");
    if (opt.num_bins == 0) throw ValidationError("--bins must be >= 1");
    if (opt.out.empty()) throw ValidationError("--out is required");
    const auto data = load_dataset(opt.logits, opt.labels);
    const auto trace = temperature_sweep(data.logits, data.labels, log_spaced_grid(opt.t_min, opt.t_max, opt.points),
                                         opt.num_bins);
    prepare_output(opt.out);
    render_sweep_csv(trace, opt.out);
    const auto best = std::min_element(trace.begin(), trace.end(),
                                       [](const SweepPoint& a, const SweepPoint& b) { return a.ece < b.ece; });
    out << "wrote " << opt.out.string() << " (" << trace.size() << " points); minimum ECE "
        << percent(best->ece) << " at T = " << detail::fmt("%.6g", best->temperature) << "\n";
    return trace;
}

// ---- confidence calibrators -----------------------------------------------

enum class ConfidenceMethod { histogram_binning, isotonic };

struct FitConfidenceOptions {
    fs::path logits;
    fs::path labels;
    double split = 0.5;
    std::uint64_t seed = 0;
    std::size_t num_bins = kDefaultNumBins;
    fs::path out;
};

inline ConfidenceCalibrator cmd_fit_confidence(ConfidenceMethod method, const FitConfidenceOptions& opt,
                                               std::ostream& out, std::ostream& err) {
    if (opt.out.empty()) throw ValidationError("--out is required");
    if (opt.num_bins == 0) throw ValidationError("--bins must be >= 1");
    const auto data = load_dataset(opt.logits, opt.labels);
    if (data.labels.size() < 2) throw ValidationError("calibrator fitting needs at least 2 samples");
    const auto split = split_indices(data.labels.size(), opt.split, opt.seed);
    auto preds_of = [&](const std::vector<std::size_t>& idx) {
        return predict(softmax(data.logits.select_rows(idx)), data.labels.select(idx));
    };
    const auto cal_preds = preds_of(split.calibration);
    ConfidenceCalibrator calibrator = method == ConfidenceMethod::histogram_binning
                                          ? ConfidenceCalibrator{fit_histogram_binning(cal_preds, opt.num_bins)}
                                          : ConfidenceCalibrator{fit_isotonic(cal_preds)};
    prepare_output(opt.out);
    write_calibrator(calibrator, opt.out);
    out << "wrote " << opt.out.string() << " (fit on " << split.calibration.size() << " samples)\n";
    if (split.evaluation.empty()) {
        err << "warning: --split 1.0 fits on all data; no held-out ECE is reported\n";
    } else {
        const auto ev = preds_of(split.evaluation);
        const double before = ece(reliability_table(ev, opt.num_bins));
        const double after = ece(reliability_table(apply_confidence_calibrator(calibrator, ev), opt.num_bins));
        out << "held-out ECE: uncalibrated " << percent(before) << ", calibrated " << percent(after) << "  ("
            << split.evaluation.size() << " samples)\n";
    }
    return calibrator;
}

// ---- comparison table -----------------------------------------------------

/// Parses rows of "architecture,pretrain_dataset,clip,clip_zero_shot_ts,clip_ts"
/// (percentages; "-" or empty for a missing cell). A header line is skipped.
inline std::vector<ComparisonRow> parse_comparison_csv(const std::string& text) {
    std::vector<ComparisonRow> rows;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first && !cells.empty() && cells[0] == "architecture") {
            first = false;
            continue;
        }
        first = false;
        if (cells.size() != 5) throw FormatError("comparison row needs 5 fields: '" + line + "'");
        auto number = [&](const std::string& s) -> std::optional<double> {
            if (s.empty() || s == "-") return std::nullopt;
            try {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (const std::exception&) {
                throw FormatError("comparison cell '" + s + "' is not a number");
            }
        };
        rows.push_back({{cells[0], cells[1]}, number(cells[2]), number(cells[3]), number(cells[4])});
    }
    if (rows.empty()) throw ValidationError("comparison input has no rows");
    return rows;
}

struct TableOptions {
    fs::path rows;
    fs::path out;
};

inline void cmd_table(const TableOptions& opt, std::ostream& out) {
    require_file(opt.rows, "--rows");
    if (opt.out.empty()) throw ValidationError("--out is required");
    const auto rows = parse_comparison_csv(detail::slurp(opt.rows));
    prepare_output(opt.out);
    render_comparison_table(rows, opt.out);
    out << comparison_table_text(rows);
}

}  // namespace calibkit::cli
