// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// File artifacts: reliability diagrams and confidence histograms as SVG 1.1,
// temperature sweeps as CSV, and method-comparison tables as text + CSV.
//
// Every SVG carries its reliability table on <g class="bin"> elements
// (data-count, data-correct, data-confidence, data-accuracy at round-trip
// precision) so the printed ECE can be re-derived from the file itself.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calibkit/calibrators.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/tensor_io.hpp"

namespace calibkit {

namespace colors {
inline constexpr const char* kAccuracy = "#4c72b0";
inline constexpr const char* kOverconfident = "#f08bb4";   // pink
inline constexpr const char* kUnderconfident = "#8c6bc8";  // purple
inline constexpr const char* kHistogram = "#4c72b0";
inline constexpr const char* kIdentity = "#444444";
inline constexpr const char* kAxis = "#000000";
}  // namespace colors

namespace detail {

inline std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

/// Shortest form that reads back to the same double.
inline std::string exact(double v) { return fmt("%.17g", v); }

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

struct Frame {
    double left = 60, top = 40, width = 320, height = 320;
    double total_width = 400, total_height = 410;

    [[nodiscard]] double x(double u) const { return left + width * u; }
    [[nodiscard]] double y(double v) const { return top + height * (1.0 - v); }
};

inline void svg_open(std::ostringstream& os, const Frame& f, const std::string& title) {
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << f.total_width
       << "\" height=\"" << f.total_height << "\" viewBox=\"0 0 " << f.total_width << " "
       << f.total_height << "\" font-family=\"sans-serif\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << f.total_width << "\" height=\"" << f.total_height
       << "\" fill=\"#ffffff\"/>\n";
    if (!title.empty()) {
        os << "<text x=\"" << fmt("%.2f", f.left + f.width / 2) << "\" y=\"24\" font-size=\"15\" "
           << "text-anchor=\"middle\">" << xml_escape(title) << "</text>\n";
    }
}

inline void svg_axes(std::ostringstream& os, const Frame& f, const std::string& x_label,
                     const std::string& y_label, double y_max_value, bool y_is_count) {
    os << "<g class=\"axes\" stroke=\"" << colors::kAxis << "\" stroke-width=\"1\" fill=\"none\">\n"
       << "<rect x=\"" << fmt("%.2f", f.left) << "\" y=\"" << fmt("%.2f", f.top) << "\" width=\""
       << fmt("%.2f", f.width) << "\" height=\"" << fmt("%.2f", f.height) << "\"/>\n</g>\n";
    os << "<g class=\"ticks\" font-size=\"10\">\n";
    for (int k = 0; k <= 5; ++k) {
        const double u = k / 5.0;
        os << "<text x=\"" << fmt("%.2f", f.x(u)) << "\" y=\"" << fmt("%.2f", f.top + f.height + 14)
           << "\" text-anchor=\"middle\">" << fmt("%.1f", u) << "</text>\n";
        const double label = y_max_value * u;
        os << "<text x=\"" << fmt("%.2f", f.left - 6) << "\" y=\"" << fmt("%.2f", f.y(u) + 3)
           << "\" text-anchor=\"end\">" << (y_is_count ? fmt("%.0f", label) : fmt("%.1f", label))
           << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << fmt("%.2f", f.left + f.width / 2) << "\" y=\"" << fmt("%.2f", f.top + f.height + 32)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << fmt("%.2f", f.top + f.height / 2) << "\" font-size=\"12\" "
       << "text-anchor=\"middle\" transform=\"rotate(-90 16 " << fmt("%.2f", f.top + f.height / 2) << ")\">"
       << xml_escape(y_label) << "</text>\n";
}

inline std::string bin_attributes(const ReliabilityBin& bin, std::size_t b) {
    std::ostringstream os;
    os << "class=\"bin\" data-bin=\"" << b + 1 << "\" data-count=\"" << bin.count << "\" data-correct=\""
       << bin.correct << "\" data-confidence=\"" << exact(bin.mean_confidence) << "\" data-accuracy=\""
       << exact(bin.accuracy) << "\"";
    return os.str();
}

inline void svg_ece_annotation(std::ostringstream& os, const Frame& f, double ece_value) {
    os << "<text class=\"ece\" x=\"" << fmt("%.2f", f.left + f.width - 8) << "\" y=\""
       << fmt("%.2f", f.top + f.height - 10) << "\" font-size=\"14\" text-anchor=\"end\">"
       << "ECE = " << fmt("%.2f", 100.0 * ece_value) << "%</text>\n";
}

}  // namespace detail

/// Text printed on every diagram for an ECE value.
inline std::string ece_label(double ece_value) { return "ECE = " + detail::fmt("%.2f", 100.0 * ece_value) + "%"; }

/// What a diagram shows, derived from a report.
struct DiagramSpec {
    std::string title;
    double ece_annotation = 0.0;
    struct Bar {
        double accuracy = 0.0;
        double gap = 0.0;  // mean confidence - accuracy; > 0 is overconfidence
    };
    std::vector<Bar> bars;
    std::vector<std::size_t> histogram;
};

inline DiagramSpec make_diagram_spec(const EvalReport& report, std::string title = {}) {
    DiagramSpec spec;
    spec.title = std::move(title);
    spec.ece_annotation = ece(report.table);
    for (const auto& bin : report.table.bins) {
        spec.bars.push_back({bin.accuracy, bin.count > 0 ? bin.mean_confidence - bin.accuracy : 0.0});
        spec.histogram.push_back(bin.count);
    }
    return spec;
}

/// Reliability diagram: accuracy bars per bin, the gap to mean confidence
/// shaded pink (overconfident) or purple (underconfident), and y = x.
inline std::string reliability_svg(const EvalReport& report, const std::string& title = {}) {
    const auto spec = make_diagram_spec(report, title);
    const detail::Frame f;
    const auto m = report.table.num_bins();
    const double bar_w = f.width / static_cast<double>(m);
    std::ostringstream os;
    detail::svg_open(os, f, spec.title);
    for (std::size_t b = 0; b < m; ++b) {
        const auto& bin = report.table.bins[b];
        os << "<g " << detail::bin_attributes(bin, b) << ">\n";
        if (bin.count > 0) {
            const double x = f.x(bin_lower(b, m));
            os << "<rect class=\"accuracy\" x=\"" << detail::fmt("%.2f", x) << "\" y=\""
               << detail::fmt("%.2f", f.y(bin.accuracy)) << "\" width=\"" << detail::fmt("%.2f", bar_w)
               << "\" height=\"" << detail::fmt("%.2f", f.height * bin.accuracy) << "\" fill=\""
               << colors::kAccuracy << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
            const double gap = spec.bars[b].gap;
            if (gap != 0.0) {
                const bool over = gap > 0.0;
                const double top = std::max(bin.accuracy, bin.mean_confidence);
                os << "<rect class=\"gap " << (over ? "over" : "under") << "\" data-gap=\""
                   << detail::exact(gap) << "\" x=\"" << detail::fmt("%.2f", x) << "\" y=\""
                   << detail::fmt("%.2f", f.y(top)) << "\" width=\"" << detail::fmt("%.2f", bar_w)
                   << "\" height=\"" << detail::fmt("%.2f", f.height * std::abs(gap)) << "\" fill=\""
                   << (over ? colors::kOverconfident : colors::kUnderconfident)
                   << "\" fill-opacity=\"0.75\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
            }
        }
        os << "</g>\n";
    }
    os << "<line class=\"identity\" x1=\"" << detail::fmt("%.2f", f.x(0)) << "\" y1=\""
       << detail::fmt("%.2f", f.y(0)) << "\" x2=\"" << detail::fmt("%.2f", f.x(1)) << "\" y2=\""
       << detail::fmt("%.2f", f.y(1)) << "\" stroke=\"" << colors::kIdentity
       << "\" stroke-width=\"1.5\" stroke-dasharray=\"5,4\"/>\n";
    detail::svg_axes(os, f, "Confidence", "Accuracy", 1.0, false);
    detail::svg_ece_annotation(os, f, spec.ece_annotation);
    os << "</svg>\n";
    return os.str();
}

/// Confidence histogram: bar height proportional to the bin population.
inline std::string histogram_svg(const EvalReport& report, const std::string& title = {}) {
    const auto spec = make_diagram_spec(report, title);
    const detail::Frame f;
    const auto m = report.table.num_bins();
    const double bar_w = f.width / static_cast<double>(m);
    const std::size_t peak = std::max<std::size_t>(
        1, *std::max_element(spec.histogram.begin(), spec.histogram.end()));
    std::ostringstream os;
    detail::svg_open(os, f, spec.title);
    for (std::size_t b = 0; b < m; ++b) {
        const auto& bin = report.table.bins[b];
        os << "<g " << detail::bin_attributes(bin, b) << ">\n";
        if (bin.count > 0) {
            const double h = f.height * static_cast<double>(bin.count) / static_cast<double>(peak);
            os << "<rect class=\"count\" x=\"" << detail::fmt("%.2f", f.x(bin_lower(b, m))) << "\" y=\""
               << detail::fmt("%.2f", f.top + f.height - h) << "\" width=\"" << detail::fmt("%.2f", bar_w)
               << "\" height=\"" << detail::fmt("%.2f", h) << "\" fill=\"" << colors::kHistogram
               << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
        }
        os << "</g>\n";
    }
    detail::svg_axes(os, f, "Confidence", "Count", static_cast<double>(peak), true);
    os << "<text class=\"total\" x=\"" << detail::fmt("%.2f", f.left + 8) << "\" y=\""
       << detail::fmt("%.2f", f.top + 18) << "\" font-size=\"12\">N = " << report.table.total() << "</text>\n";
    detail::svg_ece_annotation(os, f, spec.ece_annotation);
    os << "</svg>\n";
    return os.str();
}

inline void render_reliability_svg(const EvalReport& report, const std::filesystem::path& path,
                                   const std::string& title = {}) {
    detail::spit(path, reliability_svg(report, title));
}

inline void render_histogram_svg(const EvalReport& report, const std::filesystem::path& path,
                                 const std::string& title = {}) {
    detail::spit(path, histogram_svg(report, title));
}

// ---- sweep CSV --------------------------------------------------------------

inline std::string sweep_csv(std::vector<SweepPoint> trace) {
    if (trace.empty()) throw ValidationError("sweep trace is empty");
    std::stable_sort(trace.begin(), trace.end(),
                     [](const SweepPoint& a, const SweepPoint& b) { return a.temperature < b.temperature; });
    std::string out = "temperature,ece,nll\n";
    for (const auto& p : trace) {
        out += detail::fmt("%.10g", p.temperature) + "," + detail::fmt("%.10g", p.ece) + "," +
               detail::fmt("%.10g", p.nll) + "\n";
    }
    return out;
}

inline void render_sweep_csv(const std::vector<SweepPoint>& trace, const std::filesystem::path& path) {
    detail::spit(path, sweep_csv(trace));
}

inline std::vector<SweepPoint> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "temperature,ece,nll") {
        throw FormatError("sweep CSV header must be 'temperature,ece,nll'");
    }
    std::vector<SweepPoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        SweepPoint p;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.temperature, &p.ece, &p.nll) != 3) {
            throw FormatError("malformed sweep CSV row '" + line + "'");
        }
        out.push_back(p);
    }
    return out;
}

// ---- comparison table -------------------------------------------------------

/// One model's ECE under the three methods, in percent. Missing cells
/// render as "-".
struct ComparisonRow {
    ModelIdentity model;
    std::optional<double> uncalibrated;
    std::optional<double> zero_shot_ts;
    std::optional<double> supervised_ts;
};

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? fmt("%.2f", *v) : "-"; }

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string pad(const std::string& s, std::size_t width, bool right) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

}  // namespace detail

/// Plain-text layout: architecture printed once per group, groups separated
/// by rules, method columns right-aligned.
inline std::string comparison_table_text(const std::vector<ComparisonRow>& rows) {
    if (rows.empty()) throw ValidationError("comparison table has no rows");
    const std::vector<std::string> head = {"Architecture", "Pre-Train Data", "CLIP", "CLIP + 0-Shot-Enabled TS",
                                           "CLIP + TS"};
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        body.push_back({r.model.architecture, r.model.pretrain_dataset, detail::cell(r.uncalibrated),
                        detail::cell(r.zero_shot_ts), detail::cell(r.supervised_ts)});
    }
    std::vector<std::size_t> width(head.size());
    for (std::size_t k = 0; k < head.size(); ++k) {
        width[k] = head[k].size();
        for (const auto& b : body) width[k] = std::max(width[k], b[k].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string s = detail::pad(cells[0], width[0], false) + "  " + detail::pad(cells[1], width[1], false);
        for (std::size_t k = 2; k < cells.size(); ++k) s += " | " + detail::pad(cells[k], width[k], true);
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    };
    std::size_t total = width[0] + 2 + width[1];
    for (std::size_t k = 2; k < width.size(); ++k) total += 3 + width[k];
    const std::string rule(total, '-');

    std::string out = line(head) + rule + "\n";
    for (std::size_t i = 0; i < body.size(); ++i) {
        auto cells = body[i];
        const bool continues_group = i > 0 && rows[i].model.architecture == rows[i - 1].model.architecture;
        if (i > 0 && !continues_group) out += rule + "\n";
        if (continues_group) cells[0].clear();
        out += line(cells);
    }
    return out + rule + "\n";
}

inline std::string comparison_table_csv(const std::vector<ComparisonRow>& rows) {
    if (rows.empty()) throw ValidationError("comparison table has no rows");
    std::string out = "architecture,pretrain_dataset,clip,clip_zero_shot_ts,clip_ts\n";
    for (const auto& r : rows) {
        out += detail::csv_field(r.model.architecture) + "," + detail::csv_field(r.model.pretrain_dataset) + "," +
               detail::cell(r.uncalibrated) + "," + detail::cell(r.zero_shot_ts) + "," +
               detail::cell(r.supervised_ts) + "\n";
    }
    return out;
}

/// Writes the text table to `path` with extension .txt and the CSV next to it
/// with extension .csv.
inline void render_comparison_table(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
    auto text_path = path;
    auto csv_path = path;
    text_path.replace_extension(".txt");
    csv_path.replace_extension(".csv");
    detail::spit(text_path, comparison_table_text(rows));
    detail::spit(csv_path, comparison_table_csv(rows));
}

}  // namespace calibkit
