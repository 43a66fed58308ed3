// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "pnf/image_io.hpp"
#include "pnf/nn/adam.hpp"
#include "pnf/rng.hpp"
#include "pnf/text.hpp"

namespace pnf::train {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (epochs <= 0) fail("epochs must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(positive_weight > 0.0)) fail("positive_weight must be positive");
  model_config().validate();
  if (max_translate_px < 0 || max_translate_px >= backbone.image_size)
    fail("max_translate_px must lie in [0, image_size)");
}

BackboneConfig TrainConfig::model_config() const {
  BackboneConfig c = backbone;
  c.prompt_markers = prompt_markers;
  c.head_mode = head_mode;
  return c;
}

json TrainConfig::to_json() const {
  json markers = json::array();
  for (Marker m : prompt_markers) markers.push_back(std::string(to_string(m)));
  json b = backbone.to_json();
  b.erase("prompt_markers");
  b.erase("head_mode");
  return json{{"learning_rate", learning_rate},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"weight_decay", weight_decay},
              {"max_translate_px", max_translate_px},
              {"seed", seed},
              {"head_mode", std::string(to_string(head_mode))},
              {"prompt_markers", markers},
              {"positive_weight", positive_weight},
              {"backbone", b}};
}

TrainConfig TrainConfig::from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::set<std::string> known = {"learning_rate", "epochs",         "batch_size",     "weight_decay",
                                              "max_translate_px", "seed",        "head_mode",      "prompt_markers",
                                              "positive_weight", "backbone"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("train config: unknown key '" + k + "'");
  try {
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("max_translate_px")) c.max_translate_px = j.at("max_translate_px").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("positive_weight")) c.positive_weight = j.at("positive_weight").get<double>();
    if (j.contains("head_mode")) c.head_mode = parse_head_mode(j.at("head_mode").get<std::string>());
    if (j.contains("prompt_markers")) {
      const auto& pm = j.at("prompt_markers");
      if (pm.is_string()) {
        c.prompt_markers = parse_marker_list(pm.get<std::string>());
      } else {
        c.prompt_markers.clear();
        for (const auto& m : pm) c.prompt_markers.push_back(parse_marker(m.get<std::string>()));
      }
    }
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      if (b.is_string())
        c.backbone = BackboneConfig::preset(b.get<std::string>());
      else
        c.backbone = BackboneConfig::from_json(b, c.backbone);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::from_json(const json& j) { return from_json(j, TrainConfig{}); }

double lr_at(long long step, long long total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) throw InvalidInput("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw InvalidInput("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * frac)));
}

// ---------------------------------------------------------------------------
// Augmentation

Translated translate(const Image& image, const Mask& mask, int dy, int dx) {
  if (image.rows != mask.rows || image.cols != mask.cols)
    throw InvalidInput("translate: image and mask sizes differ");
  Translated t{Image(image.rows, image.cols, 0.0f), Mask(mask.rows, mask.cols, 0), dy, dx};
  for (int r = 0; r < image.rows; ++r) {
    const int sr = r - dy;
    if (sr < 0 || sr >= image.rows) continue;
    for (int c = 0; c < image.cols; ++c) {
      const int sc = c - dx;
      if (sc < 0 || sc >= image.cols) continue;
      t.image(r, c) = image(sr, sc);
      t.mask(r, c) = mask(sr, sc) ? 1 : 0;
    }
  }
  return t;
}

Translated augment_translate(const Image& image, const Mask& mask, std::uint64_t seed, int max_px) {
  const int limit = std::clamp(max_px, 0, std::max(0, std::min(image.rows, image.cols) - 1));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-limit, limit);
  const int dy = d(rng);
  const int dx = d(rng);
  return translate(image, mask, dy, dx);
}

// ---------------------------------------------------------------------------
// Training

namespace {

constexpr std::uint64_t kTagInit = 0x696e6974;
constexpr std::uint64_t kTagShuffle = 0x73687566;
constexpr std::uint64_t kTagAugment = 0x61756720;

std::vector<Subject> select_subjects(const Dataset& ds, std::span<const std::string> ids) {
  std::vector<Subject> out;
  for (const auto& id : ids) out.push_back(ds.subject(id));
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

}  // namespace

void write_epoch_log(const std::filesystem::path& path, std::span<const EpochLog> epochs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "epoch,loss,l_cspca,l_hmap,lr\n";
  for (const auto& e : epochs)
    out << e.epoch << "," << text::format_double(e.loss.total) << "," << text::format_double(e.loss.l_cspca) << ","
        << text::format_double(e.loss.l_hmap) << "," << text::format_double(e.lr) << "\n";
}

std::vector<metrics::CorePrediction> predict_cores(const Checkpoint& model, const Dataset& dataset,
                                                   std::span<const std::size_t> cores, bool keep_heatmaps, int fold) {
  const Backbone<float> net(model.config, model.params);
  std::vector<metrics::CorePrediction> out;
  out.reserve(cores.size());
  for (std::size_t idx : cores) {
    const BiopsyCore& core = dataset.cores.at(idx);
    const MarkerValues mv =
        subject_prompts(dataset.subject(core.subject_id), model.marker_stats, model.config.prompt_markers);
    ModelOutput o = net.predict(core.image, mv);
    metrics::CorePrediction p;
    p.core_id = core.core_id;
    p.subject_id = core.subject_id;
    p.fold = fold;
    if (o.heatmap) {
      p.pca_score = objective::predicted_involvement(*o.heatmap, core.needle_mask);
      if (keep_heatmaps) {
        p.heatmap = Grid<std::uint8_t>(o.heatmap->rows, o.heatmap->cols);
        for (std::size_t i = 0; i < p.heatmap.data.size(); ++i)
          p.heatmap.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(o.heatmap->data[i], 0.0, 1.0)));
      }
    }
    p.risk = o.risk;
    out.push_back(std::move(p));
  }
  return out;
}

FoldOutcome train_fold(const Dataset& dataset, const FoldAssignment& folds, int fold, const TrainConfig& cfg,
                       const RunOptions& opt) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (fold < -1 || fold >= folds.k) throw InvalidInput("train_fold: fold " + std::to_string(fold) + " out of range");
  const BackboneConfig mcfg = cfg.model_config();
  if (mcfg.image_size != kImageSize && !dataset.cores.empty() && dataset.cores.front().image.rows != mcfg.image_size)
    throw ConfigError("train_fold: model image_size " + std::to_string(mcfg.image_size) +
                      " does not match dataset images");

  FoldOutcome out;
  if (fold >= 0) {
    out.train_subjects = folds.subjects_outside(fold);
    out.val_subjects = folds.subjects_in(fold);
  } else {
    out.train_subjects = dataset.subject_ids();
  }
  const std::vector<std::size_t> train_cores = dataset.cores_of(out.train_subjects);
  const std::vector<std::size_t> val_cores = dataset.cores_of(out.val_subjects);
  assert_disjoint(dataset, train_cores, val_cores);
  if (train_cores.empty()) throw InvalidInput("train_fold: no training cores");

  const std::vector<Subject> train_subj = select_subjects(dataset, out.train_subjects);
  MarkerStats stats;
  if (!mcfg.prompt_markers.empty()) stats = MarkerStats::fit(train_subj, mcfg.prompt_markers);

  struct Sample {
    const BiopsyCore* core;
    MarkerValues prompts;
    CoreLabels labels;
    std::uint64_t id_hash;
  };
  std::vector<Sample> samples;
  for (std::size_t idx : train_cores) {
    const BiopsyCore& c = dataset.cores[idx];
    samples.push_back({&c, subject_prompts(dataset.subject(c.subject_id), stats, mcfg.prompt_markers),
                       grade_to_labels(c.grade_group), hash_string(c.core_id)});
  }

  Backbone<float> model(mcfg, derive_seed({cfg.seed, kTagInit}));
  nn::ParamSet<float> grads = model.params().zeros_like();
  nn::Adam<float> adam(model.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  const objective::LossOptions lopt{objective::kEps, cfg.positive_weight};

  const long long n = static_cast<long long>(samples.size());
  const long long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = steps_per_epoch * cfg.epochs;
  const std::uint64_t fold_tag = static_cast<std::uint64_t>(fold + 1);
  long long step = 0;

  std::vector<std::size_t> order(samples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed({cfg.seed, kTagShuffle, fold_tag, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    objective::LossBreakdown sum;
    double lr = 0.0;
    for (long long b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const long long b1 = std::min(n, b0 + cfg.batch_size);
      const float inv_b = 1.0f / static_cast<float>(b1 - b0);
      grads.set_zero();
      for (long long i = b0; i < b1; ++i) {
        const Sample& s = samples[order[static_cast<std::size_t>(i)]];
        Translated t = augment_translate(
            s.core->image, s.core->needle_mask,
            derive_seed({cfg.seed, kTagAugment, fold_tag, static_cast<std::uint64_t>(epoch), s.id_hash}),
            cfg.max_translate_px);
        // A shift that pushes the whole needle out of frame leaves nothing to supervise.
        if (count_set(t.mask) == 0) t = translate(s.core->image, s.core->needle_mask, 0, 0);
        const std::vector<int> px = objective::mask_pixels(t.mask);

        nn::Tape<float> tape;
        nn::Graph<float> g(tape, model.params(), &grads);
        auto o = model.forward(g, t.image, s.prompts, px);
        const objective::TapeItem<float> item{o.heatmap, o.risk, s.labels, px, s.core->involvement, true};
        objective::LossBreakdown lb;
        auto loss = objective::total_loss<float>(std::span(&item, 1), lopt, &lb);
        if (!std::isfinite(lb.total))
          throw TrainingDiverged("non-finite loss on core '" + s.core->core_id + "' at epoch " +
                                 std::to_string(epoch + 1) + ", step " + std::to_string(step) +
                                 " (l_cspca=" + std::to_string(lb.l_cspca) + ", l_hmap=" + std::to_string(lb.l_hmap) +
                                 ")");
        tape.backward(loss, inv_b);
        sum.l_cspca += lb.l_cspca;
        sum.l_hmap += lb.l_hmap;
      }
      lr = lr_at(step, total_steps, cfg);
      adam.step(model.params(), grads, lr);
      ++step;
      if (opt.after_step) opt.after_step(epoch, step, model.params());
      for (const auto& e : model.params().entries())
        for (float v : e.value.data)
          if (!std::isfinite(v))
            throw TrainingDiverged("parameter '" + e.name + "' became non-finite at epoch " +
                                   std::to_string(epoch + 1) + ", step " + std::to_string(step));
    }
    EpochLog log;
    log.epoch = epoch + 1;
    log.loss.l_cspca = sum.l_cspca / static_cast<double>(n);
    log.loss.l_hmap = sum.l_hmap / static_cast<double>(n);
    log.loss.total = log.loss.l_cspca + log.loss.l_hmap;
    log.lr = lr;
    out.record.epochs.push_back(log);
    if (opt.on_epoch) opt.on_epoch(log);
  }

  out.record.fold = fold;
  out.record.config = cfg.to_json();
  out.model.config = mcfg;
  out.model.marker_stats = stats;
  out.model.params = std::move(model.params());
  out.model.meta = {{"fold", fold}, {"k", folds.k}, {"train", out.record.config}};
  out.predictions = predict_cores(out.model, dataset, val_cores, opt.keep_heatmaps, fold);

  if (opt.out_dir) {
    const auto dir = *opt.out_dir / (fold >= 0 ? "fold" + std::to_string(fold) : std::string("all"));
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "checkpoint.pnf", out.model);
    write_epoch_log(dir / "epoch_log.csv", out.record.epochs);
    write_json(dir / "config.json", out.record.config);
    if (fold >= 0) metrics::save_predictions(dir / "predictions.csv", out.predictions);
    out.record.checkpoint = dir / "checkpoint.pnf";
  }
  out.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation and ablations

Summary summarize(std::string metric, std::vector<std::optional<double>> values) {
  Summary s{std::move(metric), std::move(values), std::nullopt, std::nullopt};
  std::vector<double> v;
  for (const auto& x : s.per_fold)
    if (x) v.push_back(*x);
  if (v.empty()) return s;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  s.mean = mean;
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::vector<metrics::TaskReport> fold_metrics(std::span<const metrics::CorePrediction> predictions,
                                              const Dataset& dataset) {
  return metrics::evaluate_run(predictions, dataset).tasks;
}

namespace {

template <typename F>
void parallel_for(int n, int workers, F f) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int w = std::clamp(workers, 1, std::max(1, n));
  if (w == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

CvResult cross_validate(const Dataset& dataset, int k, const TrainConfig& cfg, const CvOptions& opt) {
  cfg.validate();
  const auto ids = dataset.subject_ids();
  CvResult r;
  r.folds = make_folds(ids, k, opt.fold_seed);
  r.outcomes.resize(static_cast<std::size_t>(k));
  parallel_for(k, opt.workers, [&](int f) {
    r.outcomes[static_cast<std::size_t>(f)] = train_fold(dataset, r.folds, f, cfg, opt.run);
  });

  // Each subject must be validated exactly once.
  std::map<std::string, int> seen;
  for (const auto& o : r.outcomes)
    for (const auto& s : o.val_subjects) ++seen[s];
  for (const auto& id : ids)
    if (seen[id] != 1) throw SubjectLeakage("subject '" + id + "' validated " + std::to_string(seen[id]) + " times");

  std::vector<std::optional<double>> pca, cspca;
  for (const auto& o : r.outcomes) {
    const auto tasks = fold_metrics(o.predictions, dataset);
    pca.push_back(tasks[0].auroc);
    cspca.push_back(tasks[1].auroc);
    r.pca_source = tasks[0].score_source;
    r.cspca_source = tasks[1].score_source;
    r.fallback = tasks[0].fallback || tasks[1].fallback;
  }
  r.summaries.push_back(summarize("pca_auroc", pca));
  r.summaries.push_back(summarize("cspca_auroc", cspca));
  return r;
}

std::vector<AblationCell> ablation_grid(const std::vector<std::vector<Marker>>& marker_sets,
                                        const std::vector<HeadMode>& head_modes) {
  std::vector<AblationCell> out;
  for (HeadMode h : head_modes)
    for (const auto& m : marker_sets) out.push_back({m, h});
  return out;
}

std::vector<AblationRow> run_ablation(const Dataset& dataset, std::span<const AblationCell> grid, int k,
                                      const TrainConfig& base, const CvOptions& opt) {
  if (grid.empty()) throw InvalidInput("run_ablation: empty grid");
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    TrainConfig cfg = base;
    cfg.prompt_markers = cell.markers;
    cfg.head_mode = cell.head_mode;
    CvOptions o = opt;
    if (opt.run.out_dir) {
      const std::string m = cell.markers.empty() ? "none" : format_marker_list(cell.markers);
      std::string name = "markers_" + m + "__" + std::string(to_string(cell.head_mode));
      std::replace(name.begin(), name.end(), ',', '+');
      o.run.out_dir = *opt.run.out_dir / name;
    }
    CvResult cv = cross_validate(dataset, k, cfg, o);
    rows.push_back({cell, cv.summaries[0], cv.summaries[1], cv.pca_source, cv.cspca_source, cv.fallback});
  }
  return rows;
}

json to_json(const Summary& s) {
  json per = json::array();
  for (const auto& v : s.per_fold) per.push_back(v ? json(*v) : json(nullptr));
  return {{"metric", s.metric},
          {"per_fold", per},
          {"mean", s.mean ? json(*s.mean) : json(nullptr)},
          {"std", s.std ? json(*s.std) : json(nullptr)}};
}

json to_json(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"markers", r.cell.markers.empty() ? "none" : format_marker_list(r.cell.markers)},
                   {"head_mode", std::string(to_string(r.cell.head_mode))},
                   {"pca_auroc", to_json(r.pca_auroc)},
                   {"cspca_auroc", to_json(r.cspca_auroc)},
                   {"pca_source", r.pca_source},
                   {"cspca_source", r.cspca_source},
                   {"fallback", r.fallback}});
  return out;
}

std::string to_csv(std::span<const AblationRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
  std::ostringstream os;
  os << "markers,head_mode,pca_auroc_mean,pca_auroc_std,cspca_auroc_mean,cspca_auroc_std,pca_source,cspca_source,"
        "fallback\n";
  for (const auto& r : rows) {
    std::string m = r.cell.markers.empty() ? "none" : format_marker_list(r.cell.markers);
    std::replace(m.begin(), m.end(), ',', '+');
    os << m << "," << to_string(r.cell.head_mode) << "," << opt(r.pca_auroc.mean) << "," << opt(r.pca_auroc.std) << ","
       << opt(r.cspca_auroc.mean) << "," << opt(r.cspca_auroc.std) << "," << r.pca_source << "," << r.cspca_source
       << "," << (r.fallback ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace pnf::train
