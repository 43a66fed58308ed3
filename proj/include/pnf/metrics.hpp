// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnf/core_data.hpp"
#include "pnf/riskscore.hpp"

namespace pnf::metrics {

/// Mann-Whitney AUROC, ties counted one half. Throws UndefinedMetric unless
/// both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Largest sensitivity over thresholds tau in {observed scores, +inf}
/// (positive iff score >= tau) whose specificity is >= target.
double sensitivity_at_specificity(std::span<const double> scores, std::span<const int> labels, double target);

/// Mean heatmap value over the needle mask (same definition as the
/// involvement estimate used in training).
double core_pca_score(const Grid<double>& heatmap, const Mask& needle_mask);

inline constexpr std::array<double, 4> kDefaultBucketEdges{0.2, 0.4, 0.6, 0.8};
inline constexpr std::array<double, 3> kSpecificityTargets{0.2, 0.4, 0.6};

struct StratItem {
  double score = 0.0;       // task score
  double activation = 0.0;  // mean needle-region heatmap value
  double involvement = 0.0;
  bool positive = false;
  bool negative = false;    // shared negative class; cores that are neither are left out of AUROCs
};

struct Bucket {
  double lo = 0.0;  // (lo, hi]; the zero bucket is [0, 0]
  double hi = 0.0;
  int n_cores = 0;
  int n_positive = 0;
  std::optional<double> auroc;            // absent when the bucket has no positives
  std::optional<double> mean_activation;  // absent when the bucket is empty
};

/// Buckets are {I = 0}, then (0,e1], (e1,e2], ..., (ek,1]. Each non-zero
/// bucket's AUROC compares its positives with every negative in `items`.
std::vector<Bucket> stratify_by_involvement(std::span<const StratItem> items,
                                            std::span<const double> edges = kDefaultBucketEdges);

/// Per-core model outputs gathered for evaluation.
struct CorePrediction {
  std::string core_id;
  std::string subject_id;
  int fold = -1;
  std::optional<double> pca_score;  // mean needle-region heatmap value
  std::optional<double> risk;       // risk probability
  Grid<std::uint8_t> heatmap;       // quantised heatmap for figures; may be empty
};

enum class Task { csPCa_vs_rest, PCa_vs_rest };
std::string_view to_string(Task t);

struct TaskReport {
  Task task = Task::PCa_vs_rest;
  /// heatmap_mean | risk_score | risk_probability; "fallback" marks a
  /// single-head substitute for the usual score.
  std::string score_source;
  bool fallback = false;
  int n_cores = 0;
  int n_positive = 0;
  std::optional<double> auroc;
  std::array<std::optional<double>, 3> sensitivity{};  // at kSpecificityTargets
  std::vector<Bucket> buckets;
};

struct PatientRow {
  std::string subject_id;
  Category diagnosis = Category::benign;
  std::optional<int> patient_score;
  std::vector<std::string> core_ids;
  std::vector<int> core_grades;
  std::vector<int> core_scores;  // empty when no risk score is available
};

struct EvalReport {
  int n_cores = 0;
  std::vector<TaskReport> tasks;
  std::vector<PatientRow> patients;
  /// Among subjects with patient score 5, the fraction diagnosed benign.
  std::optional<double> benign_fraction_of_top_score;
  /// Sensitivity/specificity for csPCa at the operating threshold, if one was given.
  std::optional<double> operating_sensitivity;
  std::optional<double> operating_specificity;
};

struct EvalOptions {
  std::optional<risk::BinsFile> bins;  // required to report risk scores
  std::vector<double> bucket_edges{kDefaultBucketEdges.begin(), kDefaultBucketEdges.end()};
};

/// Scores the PCa task by needle-region heatmap mean and the csPCa task by
/// the discretised risk score. Without bins the csPCa task uses the raw risk
/// probability; single-head predictions fall back to the other head's score
/// and are flagged. Throws ConfigError if a core lacks every usable output.
EvalReport evaluate_run(std::span<const CorePrediction> predictions, const Dataset& dataset,
                        const EvalOptions& opt = {});

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const TaskReport& t);

/// Risk probability whose csPCa specificity on (scores, labels) is closest
/// to, and not below, `target_specificity`.
double threshold_at_specificity(std::span<const double> scores, std::span<const int> labels,
                                double target_specificity);

/// Overlay PNGs (one per prediction that carries a heatmap) plus
/// checkerboard.png and checkerboard.csv. Returns the written paths.
std::vector<std::filesystem::path> emit_figures(const EvalReport& report, std::span<const CorePrediction> predictions,
                                                const Dataset& dataset, const std::filesystem::path& out_dir);

/// Predictions table: core_id, subject_id, fold, pca_score, risk (empty when absent).
void save_predictions(const std::filesystem::path& path, std::span<const CorePrediction> predictions);
std::vector<CorePrediction> load_predictions(const std::filesystem::path& path);

/// Height of the legend strip under each overlay.
inline constexpr int kLegendHeight = 24;

}  // namespace pnf::metrics
