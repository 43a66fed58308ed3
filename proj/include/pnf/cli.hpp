// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace pnf::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestFile = "run_manifest.json";

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand; `args` excludes the program name. Diagnostics go to
/// stderr as a single line.
int run_command(const std::vector<std::string>& args);

/// Run root: $PNF_RUNS_DIR if set, else "runs".
std::filesystem::path runs_root();

/// Executes a command from its fully resolved configuration (the
/// "config" block of a run manifest).
void execute(const std::string& command, const nlohmann::json& resolved);

}  // namespace pnf::cli
