// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "pnf/image_io.hpp"
#include "pnf/objective.hpp"
#include "pnf/text.hpp"

namespace pnf::metrics {

namespace {

struct Counts {
  long long pos = 0;
  long long neg = 0;
};

Counts check_binary(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size())
    throw InvalidInput(std::string(what) + ": " + std::to_string(scores.size()) + " scores vs " +
                       std::to_string(labels.size()) + " labels");
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput(std::string(what) + ": labels must be 0 or 1");
    if (std::isnan(scores[i])) throw InvalidInput(std::string(what) + ": NaN score");
    (labels[i] ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0)
    throw UndefinedMetric(std::string(what) + ": needs at least one positive and one negative (got " +
                          std::to_string(c.pos) + " positive, " + std::to_string(c.neg) + " negative)");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

// Walks candidate thresholds in ascending order: every distinct score, then
// +inf. Calls f(tau, negatives below tau, positives at or above tau).
template <typename F>
void sweep_thresholds(std::span<const double> scores, std::span<const int> labels, F f) {
  const auto idx = order_by_score(scores);
  long long pos_total = 0;
  for (int l : labels) pos_total += l;
  long long neg_below = 0, pos_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double tau = scores[idx[i]];
    f(tau, neg_below, pos_total - pos_below);
    while (i < idx.size() && scores[idx[i]] == tau) {
      (labels[idx[i]] ? pos_below : neg_below)++;
      ++i;
    }
  }
  f(std::numeric_limits<double>::infinity(), neg_below, pos_total - pos_below);
}

std::optional<double> maybe_auroc(std::span<const double> s, std::span<const int> l) {
  try {
    return auroc(s, l);
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check_binary(scores, labels, "auroc");
  const auto idx = order_by_score(scores);
  // 2 * (concordant pairs) + tied pairs, accumulated in integers.
  long long twice = 0, neg_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    long long p = 0, n = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? p : n)++;
      ++j;
    }
    twice += 2 * p * neg_below + p * n;
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice) / static_cast<double>(2 * c.pos * c.neg);
}

double sensitivity_at_specificity(std::span<const double> scores, std::span<const int> labels, double target) {
  const Counts c = check_binary(scores, labels, "sensitivity_at_specificity");
  if (!(target >= 0.0 && target <= 1.0)) throw InvalidInput("sensitivity_at_specificity: target outside [0,1]");
  double best = 0.0;
  sweep_thresholds(scores, labels, [&](double, long long neg_below, long long pos_above) {
    const double spec = static_cast<double>(neg_below) / static_cast<double>(c.neg);
    const double sens = static_cast<double>(pos_above) / static_cast<double>(c.pos);
    if (spec >= target) best = std::max(best, sens);
  });
  return best;
}

double threshold_at_specificity(std::span<const double> scores, std::span<const int> labels,
                                double target_specificity) {
  const Counts c = check_binary(scores, labels, "threshold_at_specificity");
  std::optional<double> chosen;
  double max_score = -std::numeric_limits<double>::infinity();
  for (double s : scores) max_score = std::max(max_score, s);
  sweep_thresholds(scores, labels, [&](double tau, long long neg_below, long long) {
    if (chosen) return;
    if (static_cast<double>(neg_below) / static_cast<double>(c.neg) >= target_specificity) chosen = tau;
  });
  if (std::isinf(*chosen)) return std::nextafter(max_score, std::numeric_limits<double>::infinity());
  return *chosen;
}

double core_pca_score(const Grid<double>& heatmap, const Mask& needle_mask) {
  return objective::predicted_involvement(heatmap, needle_mask);
}

std::vector<Bucket> stratify_by_involvement(std::span<const StratItem> items, std::span<const double> edges) {
  double prev = 0.0;
  for (double e : edges) {
    if (!(e > prev && e < 1.0)) throw InvalidInput("stratify_by_involvement: edges must be strictly increasing in (0,1)");
    prev = e;
  }
  std::vector<Bucket> out;
  out.push_back({0.0, 0.0});
  double lo = 0.0;
  for (double e : edges) {
    out.push_back({lo, e});
    lo = e;
  }
  out.push_back({lo, 1.0});

  auto bucket_of = [&](double inv) -> std::size_t {
    if (!(inv >= 0.0 && inv <= 1.0)) throw InvalidInput("stratify_by_involvement: involvement outside [0,1]");
    if (inv == 0.0) return 0;
    for (std::size_t b = 1; b < out.size(); ++b)
      if (inv <= out[b].hi) return b;
    return out.size() - 1;
  };

  std::vector<double> neg_scores;
  for (const auto& it : items)
    if (it.negative) neg_scores.push_back(it.score);

  std::vector<std::vector<double>> pos_scores(out.size());
  std::vector<double> act_sum(out.size(), 0.0);
  std::vector<int> act_n(out.size(), 0);
  for (const auto& it : items) {
    const std::size_t b = bucket_of(it.involvement);
    ++out[b].n_cores;
    if (it.positive) {
      ++out[b].n_positive;
      pos_scores[b].push_back(it.score);
    }
    if (std::isfinite(it.activation)) {
      act_sum[b] += it.activation;
      ++act_n[b];
    }
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (act_n[b] > 0) out[b].mean_activation = act_sum[b] / act_n[b];
    if (b == 0 || pos_scores[b].empty() || neg_scores.empty()) continue;
    std::vector<double> s = pos_scores[b];
    std::vector<int> l(s.size(), 1);
    s.insert(s.end(), neg_scores.begin(), neg_scores.end());
    l.resize(s.size(), 0);
    out[b].auroc = auroc(s, l);
  }
  return out;
}

std::string_view to_string(Task t) { return t == Task::csPCa_vs_rest ? "csPCa_vs_rest" : "PCa_vs_rest"; }

namespace {

struct Row {
  const BiopsyCore* core;
  const CorePrediction* pred;
  CoreLabels labels;
};

TaskReport score_task(Task task, std::span<const Row> rows, std::span<const double> scores, std::string source,
                      bool fallback, std::span<const double> edges) {
  TaskReport t;
  t.task = task;
  t.score_source = std::move(source);
  t.fallback = fallback;
  t.n_cores = static_cast<int>(rows.size());
  std::vector<int> labels;
  std::vector<StratItem> items;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool pos = task == Task::csPCa_vs_rest ? rows[i].labels.is_cspca : rows[i].labels.is_pca;
    labels.push_back(pos ? 1 : 0);
    t.n_positive += pos ? 1 : 0;
    items.push_back({scores[i], rows[i].pred->pca_score.value_or(std::numeric_limits<double>::quiet_NaN()),
                     rows[i].core->involvement, pos, rows[i].core->grade_group == 0});
  }
  t.auroc = maybe_auroc(scores, labels);
  if (t.auroc)
    for (std::size_t k = 0; k < kSpecificityTargets.size(); ++k)
      t.sensitivity[k] = sensitivity_at_specificity(scores, labels, kSpecificityTargets[k]);
  t.buckets = stratify_by_involvement(items, edges);
  return t;
}

}  // namespace

EvalReport evaluate_run(std::span<const CorePrediction> predictions, const Dataset& dataset, const EvalOptions& opt) {
  if (predictions.empty()) throw InvalidInput("evaluate_run: no predictions");
  if (opt.bins) opt.bins->bins.validate();
  std::map<std::string, const BiopsyCore*> by_id;
  for (const auto& c : dataset.cores) by_id[c.core_id] = &c;

  std::vector<Row> rows;
  bool all_pca = true, all_risk = true;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.core_id);
    if (it == by_id.end()) throw ConfigError("prediction for unknown core '" + p.core_id + "'");
    if (!p.pca_score && !p.risk) throw ConfigError("prediction for core '" + p.core_id + "' has no outputs");
    all_pca = all_pca && p.pca_score.has_value();
    all_risk = all_risk && p.risk.has_value();
    rows.push_back({it->second, &p, grade_to_labels(it->second->grade_group)});
  }
  if (!all_pca && !all_risk) throw ConfigError("predictions mix heatmap-only and risk-only cores");

  EvalReport r;
  r.n_cores = static_cast<int>(rows.size());
  const bool use_bins = all_risk && opt.bins.has_value();
  std::vector<int> core_scores;
  if (use_bins)
    for (const auto& row : rows) core_scores.push_back(risk::discretize(*row.pred->risk, opt.bins->bins));

  // PCa task.
  {
    std::vector<double> s;
    for (const auto& row : rows) s.push_back(all_pca ? *row.pred->pca_score : *row.pred->risk);
    r.tasks.push_back(score_task(Task::PCa_vs_rest, rows, s, all_pca ? "heatmap_mean" : "risk_probability", !all_pca,
                                 opt.bucket_edges));
  }
  // csPCa task.
  {
    std::vector<double> s;
    std::string source;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (use_bins)
        s.push_back(core_scores[i]);
      else if (all_risk)
        s.push_back(*rows[i].pred->risk);
      else
        s.push_back(*rows[i].pred->pca_score);
    }
    source = use_bins ? "risk_score" : all_risk ? "risk_probability" : "heatmap_mean";
    r.tasks.push_back(score_task(Task::csPCa_vs_rest, rows, s, source, !all_risk, opt.bucket_edges));
  }

  // Patient table, in dataset subject order.
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < rows.size(); ++i) by_subject[rows[i].core->subject_id].push_back(i);
  int top = 0, top_benign = 0;
  for (const auto& s : dataset.subjects) {
    auto it = by_subject.find(s.subject_id);
    if (it == by_subject.end()) continue;
    PatientRow pr;
    pr.subject_id = s.subject_id;
    std::vector<CoreLabels> labels;
    for (std::size_t i : it->second) {
      pr.core_ids.push_back(rows[i].core->core_id);
      pr.core_grades.push_back(rows[i].core->grade_group);
      labels.push_back(rows[i].labels);
      if (use_bins) pr.core_scores.push_back(core_scores[i]);
    }
    pr.diagnosis = subject_diagnosis(labels);
    if (use_bins) {
      pr.patient_score = risk::patient_max_score(pr.core_scores);
      if (*pr.patient_score == 5) {
        ++top;
        top_benign += pr.diagnosis == Category::benign ? 1 : 0;
      }
    }
    r.patients.push_back(std::move(pr));
  }
  if (top > 0) r.benign_fraction_of_top_score = static_cast<double>(top_benign) / top;

  if (all_risk && opt.bins && opt.bins->operating_threshold) {
    const double thr = *opt.bins->operating_threshold;
    long long tp = 0, p = 0, tn = 0, n = 0;
    for (const auto& row : rows) {
      const bool hit = *row.pred->risk >= thr;
      if (row.labels.is_cspca) {
        ++p;
        tp += hit;
      } else {
        ++n;
        tn += !hit;
      }
    }
    if (p > 0) r.operating_sensitivity = static_cast<double>(tp) / p;
    if (n > 0) r.operating_specificity = static_cast<double>(tn) / n;
  }
  return r;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const TaskReport& t) {
  nlohmann::json j;
  j["task"] = std::string(to_string(t.task));
  j["score_source"] = t.score_source;
  j["fallback"] = t.fallback;
  j["n_cores"] = t.n_cores;
  j["n_positive"] = t.n_positive;
  j["auroc"] = opt_json(t.auroc);
  nlohmann::json sens = nlohmann::json::object();
  for (std::size_t k = 0; k < kSpecificityTargets.size(); ++k)
    sens[text::format_double(kSpecificityTargets[k])] = opt_json(t.sensitivity[k]);
  j["sensitivity_at_specificity"] = sens;
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : t.buckets)
    buckets.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"n_cores", b.n_cores},
                       {"n_positive", b.n_positive},
                       {"auroc", opt_json(b.auroc)},
                       {"mean_activation", opt_json(b.mean_activation)}});
  j["involvement_buckets"] = buckets;
  return j;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["n_cores"] = r.n_cores;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : r.tasks) j["tasks"].push_back(to_json(t));
  j["patients"] = nlohmann::json::array();
  for (const auto& p : r.patients) {
    nlohmann::json pj = {{"subject_id", p.subject_id},
                         {"diagnosis", std::string(to_string(p.diagnosis))},
                         {"core_ids", p.core_ids},
                         {"core_grades", p.core_grades},
                         {"core_scores", p.core_scores}};
    pj["patient_score"] = p.patient_score ? nlohmann::json(*p.patient_score) : nlohmann::json(nullptr);
    j["patients"].push_back(pj);
  }
  j["benign_fraction_of_top_score"] = opt_json(r.benign_fraction_of_top_score);
  j["operating_sensitivity"] = opt_json(r.operating_sensitivity);
  j["operating_specificity"] = opt_json(r.operating_specificity);
  return j;
}

// ---------------------------------------------------------------------------
// Figures

namespace {

// 3x5 glyphs, one row per string, '#' = ink.
const std::map<char, std::array<const char*, 5>>& font() {
  static const std::map<char, std::array<const char*, 5>> f = {
      {'0', {"###", "#.#", "#.#", "#.#", "###"}}, {'1', {".#.", "##.", ".#.", ".#.", "###"}},
      {'2', {"###", "..#", "###", "#..", "###"}}, {'3', {"###", "..#", "###", "..#", "###"}},
      {'4', {"#.#", "#.#", "###", "..#", "..#"}}, {'5', {"###", "#..", "###", "..#", "###"}},
      {'6', {"###", "#..", "###", "#.#", "###"}}, {'7', {"###", "..#", "..#", "..#", "..#"}},
      {'8', {"###", "#.#", "###", "#.#", "###"}}, {'9', {"###", "#.#", "###", "..#", "###"}},
      {'.', {"...", "...", "...", "...", ".#."}}, {'-', {"...", "...", "###", "...", "..."}},
      {' ', {"...", "...", "...", "...", "..."}}, {'R', {"##.", "#.#", "##.", "#.#", "#.#"}},
      {'I', {"###", ".#.", ".#.", ".#.", "###"}}, {'S', {"###", "#..", "###", "..#", "###"}},
      {'K', {"#.#", "#.#", "##.", "#.#", "#.#"}}, {'G', {"###", "#..", "#.#", "#.#", "###"}},
      {'P', {"###", "#.#", "###", "#..", "#.."}}, {'C', {"###", "#..", "#..", "#..", "###"}},
      {'A', {"###", "#.#", "###", "#.#", "#.#"}}};
  return f;
}

void draw_text(RgbImage& img, int row, int col, const std::string& s, int scale, std::array<std::uint8_t, 3> color) {
  for (char ch : s) {
    auto it = font().find(ch);
    if (it != font().end())
      for (int gy = 0; gy < 5; ++gy)
        for (int gx = 0; gx < 3; ++gx)
          if (it->second[gy][gx] == '#')
            for (int dy = 0; dy < scale; ++dy)
              for (int dx = 0; dx < scale; ++dx) {
                const int r = row + gy * scale + dy, c = col + gx * scale + dx;
                if (r >= 0 && r < img.rows && c >= 0 && c < img.cols) std::copy(color.begin(), color.end(), img.at(r, c));
              }
    col += 4 * scale;
  }
}

std::array<std::uint8_t, 3> hot(double v) {
  auto ch = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  return {ch(3.0 * v), ch(3.0 * v - 1.0), ch(3.0 * v - 2.0)};
}

std::array<std::uint8_t, 3> score_color(int s) {
  static const std::array<std::array<std::uint8_t, 3>, 6> pal = {{{90, 90, 90},
                                                                  {26, 150, 65},
                                                                  {166, 217, 106},
                                                                  {255, 255, 191},
                                                                  {253, 174, 97},
                                                                  {215, 25, 28}}};
  return pal[static_cast<std::size_t>(std::clamp(s, 0, 5))];
}

std::array<std::uint8_t, 3> grade_color(int gg) {
  if (gg >= 3) return {200, 0, 0};
  if (gg >= 1) return {230, 200, 0};
  return {255, 255, 255};
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<std::filesystem::path> emit_figures(const EvalReport& report, std::span<const CorePrediction> predictions,
                                                const Dataset& dataset, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  std::map<std::string, const BiopsyCore*> by_id;
  for (const auto& c : dataset.cores) by_id[c.core_id] = &c;
  std::map<std::string, int> score_of;
  for (const auto& p : report.patients)
    for (std::size_t i = 0; i < p.core_scores.size(); ++i) score_of[p.core_ids[i]] = p.core_scores[i];

  try {
    fs::create_directories(out_dir / "overlays");
  } catch (const fs::filesystem_error& e) {
    throw Error("cannot create figure directory '" + (out_dir / "overlays").string() + "': " + e.what());
  }

  for (const auto& p : predictions) {
    if (p.heatmap.empty()) continue;
    auto it = by_id.find(p.core_id);
    if (it == by_id.end()) throw ConfigError("prediction for unknown core '" + p.core_id + "'");
    const BiopsyCore& core = *it->second;
    const int n = core.image.rows;
    if (p.heatmap.rows != n || p.heatmap.cols != core.image.cols)
      throw InvalidInput("heatmap of core '" + p.core_id + "' does not match its image size");
    RgbImage img(n + kLegendHeight, core.image.cols);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < core.image.cols; ++c) {
        const double g = 255.0 * core.image(r, c);
        const double h = p.heatmap(r, c) / 255.0;
        const auto col = hot(h);
        const double a = 0.6 * h;
        std::uint8_t* px = img.at(r, c);
        for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>(std::lround((1.0 - a) * g + a * col[k]));
        const Mask& m = core.needle_mask;
        if (m(r, c)) {
          const bool edge = r == 0 || c == 0 || r == n - 1 || c == m.cols - 1 || !m(r - 1, c) || !m(r + 1, c) ||
                            !m(r, c - 1) || !m(r, c + 1);
          if (edge) px[0] = 0, px[1] = 255, px[2] = 0;
        }
      }
    std::string legend;
    auto s = score_of.find(p.core_id);
    if (s != score_of.end()) legend += "RISK " + std::to_string(s->second) + "  ";
    else if (p.risk) legend += "RISK " + fixed2(*p.risk) + "  ";
    if (p.pca_score) legend += "PCA " + fixed2(*p.pca_score) + "  ";
    legend += "GG " + std::to_string(core.grade_group);
    draw_text(img, n + 7, 4, legend, 2, {255, 255, 255});
    const fs::path path = out_dir / "overlays" / (p.core_id + ".png");
    write_png_rgb(path, img);
    written.push_back(path);
  }

  // Checkerboard: one row per subject, one cell per biopsy.
  constexpr int kCell = 16;
  std::size_t max_cores = 1;
  for (const auto& p : report.patients) max_cores = std::max(max_cores, p.core_ids.size());
  const int rows = std::max<int>(1, static_cast<int>(report.patients.size()));
  RgbImage board(rows * kCell, static_cast<int>(max_cores) * kCell);
  for (std::size_t i = 0; i < report.patients.size(); ++i) {
    const auto& p = report.patients[i];
    for (std::size_t j = 0; j < p.core_ids.size(); ++j) {
      const auto fill = score_color(p.core_scores.empty() ? 0 : p.core_scores[j]);
      const auto mark = grade_color(p.core_grades[j]);
      for (int y = 1; y < kCell - 1; ++y)
        for (int x = 1; x < kCell - 1; ++x) {
          const bool corner = y < 6 && x < 6;
          const auto& c = corner ? mark : fill;
          std::copy(c.begin(), c.end(), board.at(static_cast<int>(i) * kCell + y, static_cast<int>(j) * kCell + x));
        }
    }
  }
  const fs::path board_png = out_dir / "checkerboard.png";
  write_png_rgb(board_png, board);
  written.push_back(board_png);

  const fs::path board_csv = out_dir / "checkerboard.csv";
  std::ofstream csv(board_csv);
  if (!csv) throw Error("cannot write '" + board_csv.string() + "'");
  csv << "subject_id,diagnosis,patient_score";
  for (std::size_t j = 1; j <= max_cores; ++j) csv << ",core_" << j << "_id,core_" << j << "_score,core_" << j << "_gg";
  csv << "\n";
  for (const auto& p : report.patients) {
    csv << p.subject_id << "," << to_string(p.diagnosis) << ","
        << (p.patient_score ? std::to_string(*p.patient_score) : "");
    for (std::size_t j = 0; j < max_cores; ++j) {
      if (j < p.core_ids.size())
        csv << "," << p.core_ids[j] << "," << (p.core_scores.empty() ? "" : std::to_string(p.core_scores[j])) << ","
            << p.core_grades[j];
      else
        csv << ",,,";
    }
    csv << "\n";
  }
  if (!csv) throw Error("failed writing '" + board_csv.string() + "'");
  written.push_back(board_csv);
  return written;
}

// ---------------------------------------------------------------------------
// Predictions table

void save_predictions(const std::filesystem::path& path, std::span<const CorePrediction> predictions) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "core_id,subject_id,fold,pca_score,risk\n";
  for (const auto& p : predictions)
    out << p.core_id << "," << p.subject_id << "," << p.fold << ","
        << (p.pca_score ? text::format_double(*p.pca_score) : "") << ","
        << (p.risk ? text::format_double(*p.risk) : "") << "\n";
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<CorePrediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open predictions '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "core_id,subject_id,fold,pca_score,risk")
    throw LoadError("predictions '" + path.string() + "': unexpected header");
  std::vector<CorePrediction> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    try {
      const auto f = text::split_csv(line);
      if (f.size() != 5) throw InvalidInput("expected 5 fields, got " + std::to_string(f.size()));
      CorePrediction p;
      p.core_id = f[0];
      p.subject_id = f[1];
      p.fold = static_cast<int>(text::parse_int(f[2]));
      if (!text::trim(f[3]).empty()) p.pca_score = text::parse_double(f[3]);
      if (!text::trim(f[4]).empty()) p.risk = text::parse_double(f[4]);
      out.push_back(std::move(p));
    } catch (const Error& e) {
      throw LoadError("predictions '" + path.string() + "' row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pnf::metrics
