// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace calibkit {

/// Base for every error raised by the library.
///
/// `is_usage()` separates bad input (shape, range, format, validation) from
/// runtime failures (I/O, fitting); the CLI maps them to exit codes 2 and 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, bool usage = true)
        : std::runtime_error(what), usage_(usage) {}

    [[nodiscard]] bool is_usage() const noexcept { return usage_; }

private:
    bool usage_;
};

#define CALIBKIT_DEFINE_ERROR(Name, usage)                                     \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name ": " + what, usage) {} \
    }

CALIBKIT_DEFINE_ERROR(FormatError, true);
CALIBKIT_DEFINE_ERROR(TruncationError, true);
CALIBKIT_DEFINE_ERROR(NonFiniteError, true);
CALIBKIT_DEFINE_ERROR(RangeError, true);
CALIBKIT_DEFINE_ERROR(ShapeError, true);
CALIBKIT_DEFINE_ERROR(ValidationError, true);
CALIBKIT_DEFINE_ERROR(DegenerateEmbeddingError, true);
CALIBKIT_DEFINE_ERROR(IoError, false);
CALIBKIT_DEFINE_ERROR(FitError, false);

#undef CALIBKIT_DEFINE_ERROR

}  // namespace calibkit
