// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnf/backbone.hpp"
#include "pnf/checkpoint.hpp"
#include "pnf/metrics.hpp"
#include "pnf/objective.hpp"

namespace pnf::train {

struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 35;
  int batch_size = 8;
  double weight_decay = 0.0;
  int max_translate_px = 32;
  std::uint64_t seed = 0;
  HeadMode head_mode = HeadMode::both;
  std::vector<Marker> prompt_markers;
  /// Architecture; its prompt_markers and head_mode are overridden by the fields above.
  BackboneConfig backbone = BackboneConfig::toy();
  double positive_weight = 1.0;

  void validate() const;
  BackboneConfig model_config() const;

  nlohmann::json to_json() const;
  /// Overlays keys present in `j` onto `base`; unknown keys are rejected.
  /// "backbone" may be a preset name or an object.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Cosine annealing: 0.5 * lr0 * (1 + cos(pi * step / total)).
double lr_at(long long step, long long total_steps, const TrainConfig& cfg);

struct Translated {
  Image image;
  Mask mask;
  int dy = 0;
  int dx = 0;
};

/// Integer offsets (dy, dx) drawn uniformly from [-max_px, max_px] (clamped
/// to the image size). Vacated pixels are zero.
Translated augment_translate(const Image& image, const Mask& mask, std::uint64_t seed, int max_px);
/// Shift by a given offset.
Translated translate(const Image& image, const Mask& mask, int dy, int dx);

struct EpochLog {
  int epoch = 0;
  objective::LossBreakdown loss;  // mean over the epoch's training cores
  double lr = 0.0;                // rate used by the epoch's last update
};

struct RunRecord {
  int fold = -1;  // -1: trained on every subject
  std::vector<EpochLog> epochs;
  std::optional<std::filesystem::path> checkpoint;
  nlohmann::json config;
  double wall_seconds = 0.0;
};

struct FoldOutcome {
  RunRecord record;
  Checkpoint model;
  std::vector<metrics::CorePrediction> predictions;  // validation cores
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
};

struct RunOptions {
  /// When set, fold<i>/{checkpoint.pnf, epoch_log.csv, config.json} are written here.
  std::optional<std::filesystem::path> out_dir;
  /// Keep quantised validation heatmaps for figures.
  bool keep_heatmaps = false;
  /// Called after every optimiser step with (epoch, step, params).
  std::function<void(int, long long, nn::ParamSet<float>&)> after_step;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains on every subject outside `fold` and predicts the subjects inside
/// it. `fold` = -1 trains on all subjects and predicts none.
FoldOutcome train_fold(const Dataset& dataset, const FoldAssignment& folds, int fold, const TrainConfig& cfg,
                       const RunOptions& opt = {});

/// Runs a trained model over the given cores.
std::vector<metrics::CorePrediction> predict_cores(const Checkpoint& model, const Dataset& dataset,
                                                   std::span<const std::size_t> cores, bool keep_heatmaps,
                                                   int fold = -1);

struct Summary {
  std::string metric;
  std::vector<std::optional<double>> per_fold;
  std::optional<double> mean;
  std::optional<double> std;  // sample standard deviation
};

/// Arithmetic mean and sample standard deviation of the defined values.
Summary summarize(std::string metric, std::vector<std::optional<double>> values);

/// Fold-level metrics: PCa AUROC from the heatmap and csPCa AUROC from the
/// risk probability, each with its single-head fallback.
std::vector<metrics::TaskReport> fold_metrics(std::span<const metrics::CorePrediction> predictions,
                                              const Dataset& dataset);

struct CvResult {
  FoldAssignment folds;
  std::vector<FoldOutcome> outcomes;
  std::vector<Summary> summaries;  // pca_auroc, cspca_auroc
  std::string pca_source;
  std::string cspca_source;
  bool fallback = false;
};

struct CvOptions {
  RunOptions run;
  int workers = 1;
  std::uint64_t fold_seed = 0;
};

CvResult cross_validate(const Dataset& dataset, int k, const TrainConfig& cfg, const CvOptions& opt = {});

struct AblationCell {
  std::vector<Marker> markers;
  HeadMode head_mode = HeadMode::both;
};

struct AblationRow {
  AblationCell cell;
  Summary pca_auroc;
  Summary cspca_auroc;
  std::string pca_source;
  std::string cspca_source;
  bool fallback = false;
};

/// Cartesian product of marker sets and head modes.
std::vector<AblationCell> ablation_grid(const std::vector<std::vector<Marker>>& marker_sets,
                                        const std::vector<HeadMode>& head_modes);

/// One cross-validation per cell; cells may differ only in markers/head mode.
std::vector<AblationRow> run_ablation(const Dataset& dataset, std::span<const AblationCell> grid, int k,
                                      const TrainConfig& base, const CvOptions& opt = {});

nlohmann::json to_json(const Summary& s);
nlohmann::json to_json(std::span<const AblationRow> rows);
std::string to_csv(std::span<const AblationRow> rows);

void write_epoch_log(const std::filesystem::path& path, std::span<const EpochLog> epochs);

}  // namespace pnf::train
