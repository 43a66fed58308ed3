// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include <json.hpp>

#include "pnf/backbone.hpp"

namespace pnf {

inline constexpr char kCheckpointMagic[8] = {'P', 'N', 'F', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to rebuild a trained model for inference.
struct Checkpoint {
  BackboneConfig config;
  MarkerStats marker_stats;
  nn::ParamSet<float> params;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json marker_stats_to_json(const MarkerStats& s);
MarkerStats marker_stats_from_json(const nlohmann::json& j);

/// Layout: see docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CheckpointError on I/O failure, bad magic/version, checksum
/// mismatch, truncation, or a parameter table that does not fit the config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally rejects a config that differs from `expected`,
/// naming the differing fields.
Checkpoint load_checkpoint(const std::filesystem::path& path, const BackboneConfig& expected);

}  // namespace pnf
