// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "test_util.hpp"

#ifndef CALIBKIT_CLI_PATH
#error "CALIBKIT_CLI_PATH must point at the built calibkit executable"
#endif

namespace calibkit::testing {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

/// Runs the CLI with `args` (already shell-safe), capturing both streams.
inline RunResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out_path = scratch / "stdout.txt";
    const auto err_path = scratch / "stderr.txt";
    const std::string command = std::string("'") + CALIBKIT_CLI_PATH + "' " + args + " >'" + out_path.string() +
                                "' 2>'" + err_path.string() + "'";
    const int status = std::system(command.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_bytes(out_path);
    r.err = read_bytes(err_path);
    return r;
}

}  // namespace calibkit::testing
