// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// On-disk formats.
//
// Matrix file (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "CALIBMX1"
//   8       4     dtype code, u32 (1 = float32)
//   12      8     rows, u64
//   20      8     cols, u64
//   28      ...   rows * cols IEEE-754 float32, row-major
//
// Optional metadata lives next to it in "<path>.meta.json". Labels and
// temperature records are JSON documents.

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calibkit/errors.hpp"
#include "calibkit/types.hpp"
#include "json.hpp"

namespace calibkit {

using Json = nlohmann::ordered_json;

inline constexpr std::array<char, 8> kMatrixMagic = {'C', 'A', 'L', 'I', 'B', 'M', 'X', '1'};
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::size_t kMatrixHeaderSize = 28;

struct MatrixFile {
    Matrix<float> data;
    std::optional<Json> sidecar;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

namespace detail {

template <typename UInt>
void put_le(std::string& out, UInt v) {
    for (std::size_t b = 0; b < sizeof(UInt); ++b) {
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
    UInt v = 0;
    for (std::size_t b = 0; b < sizeof(UInt); ++b) {
        v |= static_cast<UInt>(p[b]) << (8 * b);
    }
    return v;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    return bytes;
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

inline Json parse_json_file(const std::filesystem::path& path) {
    const std::string text = slurp(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const Json& doc) {
    spit(path, doc.dump(2) + "\n");
}

template <typename T>
T json_field(const Json& doc, const char* key, const std::filesystem::path& path) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw FormatError("'" + path.string() + "' is missing field '" + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw FormatError("'" + path.string() + "' field '" + key + "': " + e.what());
    }
}

}  // namespace detail

/// Serializes a matrix to the exact on-disk byte layout.
inline std::string encode_matrix(const Matrix<float>& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw FormatError("matrix must have at least one row and one column");
    }
    std::string out;
    out.reserve(kMatrixHeaderSize + m.size() * 4);
    out.append(kMatrixMagic.data(), kMatrixMagic.size());
    detail::put_le<std::uint32_t>(out, kDtypeFloat32);
    detail::put_le<std::uint64_t>(out, m.rows());
    detail::put_le<std::uint64_t>(out, m.cols());
    for (float v : m.data()) {
        if (!std::isfinite(v)) throw NonFiniteError("refusing to write a non-finite value");
        detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

inline Matrix<float> decode_matrix(const std::string& bytes, const std::string& origin = "<memory>") {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t magic_len = std::min(bytes.size(), kMatrixMagic.size());
    if (std::memcmp(bytes.data(), kMatrixMagic.data(), magic_len) != 0) {
        throw FormatError("'" + origin + "' does not start with magic CALIBMX1");
    }
    if (bytes.size() < kMatrixHeaderSize) {
        throw TruncationError("'" + origin + "' header is " + std::to_string(bytes.size()) +
                              " bytes, expected " + std::to_string(kMatrixHeaderSize));
    }
    const auto dtype = detail::get_le<std::uint32_t>(p + 8);
    if (dtype != kDtypeFloat32) {
        throw FormatError("'" + origin + "' has unsupported dtype code " + std::to_string(dtype));
    }
    const auto rows = detail::get_le<std::uint64_t>(p + 12);
    const auto cols = detail::get_le<std::uint64_t>(p + 20);
    if (rows == 0 || cols == 0) {
        throw FormatError("'" + origin + "' declares an empty matrix");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 4;
    if (rows > limit / cols) throw FormatError("'" + origin + "' declared shape overflows");
    const std::uint64_t expected = rows * cols * 4;
    const std::uint64_t payload = bytes.size() - kMatrixHeaderSize;
    if (payload != expected) {
        throw TruncationError("'" + origin + "' payload is " + std::to_string(payload) +
                              " bytes, header claims " + std::to_string(expected));
    }
    std::vector<float> values(rows * cols);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const float v = std::bit_cast<float>(detail::get_le<std::uint32_t>(p + kMatrixHeaderSize + 4 * k));
        if (!std::isfinite(v)) {
            throw NonFiniteError("'" + origin + "' element (" + std::to_string(k / cols) + ", " +
                                 std::to_string(k % cols) + ") is not finite");
        }
        values[k] = v;
    }
    return Matrix<float>(rows, cols, std::move(values));
}

inline MatrixFile read_matrix(const std::filesystem::path& path) {
    MatrixFile file{decode_matrix(detail::slurp(path), path.string()), std::nullopt};
    const auto meta = sidecar_path(path);
    if (std::filesystem::exists(meta)) file.sidecar = detail::parse_json_file(meta);
    return file;
}

inline void write_matrix(const MatrixFile& file, const std::filesystem::path& path) {
    detail::spit(path, encode_matrix(file.data));
    if (file.sidecar) detail::write_json_file(sidecar_path(path), *file.sidecar);
}

// ---- logits ---------------------------------------------------------------

/// Loads logits; provenance comes from the sidecar (absent means external).
inline LogitMatrix read_logits(const std::filesystem::path& path) {
    MatrixFile file = read_matrix(path);
    Provenance provenance = Provenance::external;
    if (file.sidecar && file.sidecar->contains("provenance")) {
        provenance = provenance_from_string(
            detail::json_field<std::string>(*file.sidecar, "provenance", sidecar_path(path)));
    }
    const auto& src = file.data;
    Matrix<double> values(src.rows(), src.cols());
    std::copy(src.data().begin(), src.data().end(), values.data().begin());
    return LogitMatrix(std::move(values), provenance);
}

inline void write_logits(const LogitMatrix& logits, const std::filesystem::path& path,
                         Json extra_meta = Json::object()) {
    Matrix<float> stored(logits.rows(), logits.cols());
    auto src = logits.values().data();
    auto dst = stored.data();
    for (std::size_t k = 0; k < src.size(); ++k) {
        const auto v = static_cast<float>(src[k]);
        if (!std::isfinite(v)) throw NonFiniteError("logit overflows float32");
        dst[k] = v;
    }
    Json meta = Json::object();
    meta["provenance"] = std::string(to_string(logits.provenance()));
    for (auto& [k, v] : extra_meta.items()) meta[k] = v;
    write_matrix(MatrixFile{std::move(stored), std::move(meta)}, path);
}

// ---- labels ---------------------------------------------------------------

inline Json to_json(const LabelVector& labels) {
    Json doc = Json::object();
    doc["num_classes"] = labels.num_classes;
    doc["labels"] = labels.labels;
    return doc;
}

inline LabelVector labels_from_json(const Json& doc, const std::filesystem::path& origin = "<json>") {
    LabelVector out;
    const auto c = detail::json_field<std::int64_t>(doc, "num_classes", origin);
    const auto raw = detail::json_field<std::vector<std::int64_t>>(doc, "labels", origin);
    if (c < 2 || c > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("num_classes must be in [2, 2^32), got " + std::to_string(c));
    }
    out.num_classes = static_cast<std::uint32_t>(c);
    out.labels.reserve(raw.size());
    for (auto v : raw) {
        if (v < 0 || v >= c) {
            throw RangeError("label " + std::to_string(v) + " is not in [0, " + std::to_string(c) + ")");
        }
        out.labels.push_back(static_cast<std::uint32_t>(v));
    }
    out.validate();
    return out;
}

inline LabelVector read_labels(const std::filesystem::path& path) {
    return labels_from_json(detail::parse_json_file(path), path);
}

inline void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
    labels.validate();
    detail::write_json_file(path, to_json(labels));
}

// ---- temperature records --------------------------------------------------

using Timestamp = std::chrono::sys_seconds;

/// ISO-8601 UTC, e.g. 2026-10-15T08:30:00Z.
inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

inline Timestamp parse_timestamp(const std::string& text) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char z = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%uT%u:%u:%u%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 || z != 'Z') {
        throw FormatError("timestamp '" + text + "' is not ISO-8601 UTC (YYYY-MM-DDTHH:MM:SSZ)");
    }
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
        throw FormatError("timestamp '" + text + "' is out of range");
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

/// A fitted temperature tagged with the model and data it was fit for. One
/// record per (architecture, pretrain_dataset) pair.
struct TemperatureRecord {
    double temperature = 1.0;
    std::string architecture;
    std::string pretrain_dataset;
    std::string auxiliary_dataset;
    std::string prompt_template;
    double fit_nll = 0.0;  // nats per sample
    Timestamp created_at{};

    void validate() const {
        if (!(temperature > 0.0) || !std::isfinite(temperature)) {
            throw RangeError("temperature must be positive and finite, got " + std::to_string(temperature));
        }
        if (architecture.empty()) throw ValidationError("record is missing 'architecture'");
        if (pretrain_dataset.empty()) throw ValidationError("record is missing 'pretrain_dataset'");
        if (!std::isfinite(fit_nll)) throw NonFiniteError("fit_nll is not finite");
    }

    friend bool operator==(const TemperatureRecord&, const TemperatureRecord&) = default;
};

inline Json to_json(const TemperatureRecord& r) {
    Json doc = Json::object();
    doc["temperature"] = r.temperature;
    doc["architecture"] = r.architecture;
    doc["pretrain_dataset"] = r.pretrain_dataset;
    doc["auxiliary_dataset"] = r.auxiliary_dataset;
    doc["prompt_template"] = r.prompt_template;
    doc["fit_nll"] = r.fit_nll;
    doc["created_at"] = format_timestamp(r.created_at);
    return doc;
}

inline TemperatureRecord record_from_json(const Json& doc, const std::filesystem::path& origin = "<json>") {
    TemperatureRecord r;
    r.temperature = detail::json_field<double>(doc, "temperature", origin);
    r.architecture = detail::json_field<std::string>(doc, "architecture", origin);
    r.pretrain_dataset = detail::json_field<std::string>(doc, "pretrain_dataset", origin);
    r.auxiliary_dataset = detail::json_field<std::string>(doc, "auxiliary_dataset", origin);
    r.prompt_template = detail::json_field<std::string>(doc, "prompt_template", origin);
    r.fit_nll = detail::json_field<double>(doc, "fit_nll", origin);
    r.created_at = parse_timestamp(detail::json_field<std::string>(doc, "created_at", origin));
    r.validate();
    return r;
}

inline TemperatureRecord read_temperature_record(const std::filesystem::path& path) {
    return record_from_json(detail::parse_json_file(path), path);
}

inline void write_temperature_record(const TemperatureRecord& record, const std::filesystem::path& path) {
    record.validate();
    detail::write_json_file(path, to_json(record));
}

}  // namespace calibkit
