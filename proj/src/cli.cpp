// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pnf/checkpoint.hpp"
#include "pnf/dataset_io.hpp"
#include "pnf/metrics.hpp"
#include "pnf/riskscore.hpp"
#include "pnf/synthgen.hpp"
#include "pnf/text.hpp"
#include "pnf/trainer.hpp"

namespace pnf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad flags, bad config values or missing inputs: exit 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw UsageError(what + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw UsageError(what + ": unknown key '" + k + "'");
}

fs::path need_path(const json& cfg, const char* key, const char* flag) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) throw UsageError(std::string("missing required flag ") + flag);
  return cfg.at(key).get<std::string>();
}

void need_exists(const fs::path& p, const char* flag) {
  if (!fs::exists(p)) throw UsageError(std::string(flag) + ": '" + p.string() + "' does not exist");
}

// --------------------------------------------------------------------------
// Generator config <-> JSON

json gen_to_json(const synth::GenConfig& g) {
  return {{"n_subjects", g.n_subjects},
          {"cores_per_subject", g.cores_per_subject},
          {"lesion_prevalence", g.lesion_prevalence},
          {"texture_contrast", g.texture_contrast},
          {"metadata_signal", g.metadata_signal},
          {"seed", g.seed},
          {"burden_coupling", g.burden_coupling},
          {"grade_cuts", g.grade_cuts},
          {"image_size", g.image_size}};
}

synth::GenConfig gen_from_json(const json& j) {
  require_keys(j,
               {"n_subjects", "cores_per_subject", "lesion_prevalence", "texture_contrast", "metadata_signal", "seed",
                "burden_coupling", "grade_cuts", "image_size"},
               "generator config");
  synth::GenConfig g;
  try {
    if (j.contains("n_subjects")) g.n_subjects = j.at("n_subjects").get<int>();
    if (j.contains("cores_per_subject")) g.cores_per_subject = j.at("cores_per_subject").get<int>();
    if (j.contains("lesion_prevalence")) g.lesion_prevalence = j.at("lesion_prevalence").get<double>();
    if (j.contains("texture_contrast")) g.texture_contrast = j.at("texture_contrast").get<double>();
    if (j.contains("metadata_signal")) g.metadata_signal = j.at("metadata_signal").get<double>();
    if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("burden_coupling")) g.burden_coupling = j.at("burden_coupling").get<double>();
    if (j.contains("grade_cuts")) g.grade_cuts = j.at("grade_cuts").get<std::array<double, 4>>();
    if (j.contains("image_size")) g.image_size = j.at("image_size").get<int>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("generator config: ") + e.what());
  }
  g.validate();
  return g;
}

// --------------------------------------------------------------------------
// Defaults per command

json default_config(const std::string& command) {
  const json train = train::TrainConfig{}.to_json();
  if (command == "synth") return {{"out", nullptr}, {"generator", gen_to_json(synth::GenConfig{})}};
  if (command == "train")
    return {{"out", nullptr}, {"dataset", nullptr}, {"train", train},
            {"fold", -1},     {"folds", 5},         {"fold_seed", 0}};
  if (command == "crossval")
    return {{"out", nullptr}, {"dataset", nullptr}, {"train", train}, {"folds", 5}, {"fold_seed", 0}, {"workers", 1}};
  if (command == "calibrate")
    return {{"out", nullptr},
            {"predictions", nullptr},
            {"reference_counts", nullptr},
            {"reference_dataset", nullptr},
            {"dataset", nullptr},
            {"operating_specificity", 0.7}};
  if (command == "eval")
    return {{"out", nullptr},
            {"checkpoint", nullptr},
            {"dataset", nullptr},
            {"bins", nullptr},
            {"bucket_edges", metrics::kDefaultBucketEdges},
            {"figures", true}};
  if (command == "ablate")
    return {{"out", nullptr},
            {"dataset", nullptr},
            {"train", train},
            {"folds", 5},
            {"fold_seed", 0},
            {"workers", 1},
            {"marker_sets", json::array({"none", "age,psa", "age,psa,psad"})},
            {"head_modes", json::array({"both", "mask_only", "class_only"})}};
  throw UsageError("unknown command '" + command + "'");
}

// Input paths named by a resolved config.
std::vector<fs::path> inputs_of(const json& cfg) {
  std::vector<fs::path> in;
  for (const char* k : {"dataset", "checkpoint", "bins", "predictions", "reference_dataset"})
    if (cfg.contains(k) && cfg.at(k).is_string()) in.emplace_back(cfg.at(k).get<std::string>());
  return in;
}

std::uint64_t seed_of(const std::string& command, const json& cfg) {
  if (command == "synth") return cfg.at("generator").at("seed").get<std::uint64_t>();
  if (cfg.contains("train")) return cfg.at("train").at("seed").get<std::uint64_t>();
  return 0;
}

std::vector<std::string> list_outputs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel != kManifestFile) out.push_back(std::move(rel));
  }
  std::sort(out.begin(), out.end());
  return out;
}

train::TrainConfig train_config(const json& cfg) {
  auto t = train::TrainConfig::from_json(cfg.at("train"));
  t.validate();
  return t;
}

void log_epoch(const train::EpochLog& e) {
  spdlog::info("epoch {} loss {:.6f} (cspca {:.6f}, hmap {:.6f}) lr {:.3g}", e.epoch, e.loss.total, e.loss.l_cspca,
               e.loss.l_hmap, e.lr);
}

// --------------------------------------------------------------------------
// Commands. Each reads only its resolved config and writes under cfg["out"].

void cmd_synth(const json& cfg, const fs::path& out) {
  const auto g = gen_from_json(cfg.at("generator"));
  spdlog::info("generating {} subjects x {} cores", g.n_subjects, g.cores_per_subject);
  synth::save_generated(synth::generate_dataset(g), out);
}

void cmd_train(const json& cfg, const fs::path& out) {
  const auto tc = train_config(cfg);
  const fs::path data = need_path(cfg, "dataset", "--dataset");
  need_exists(data, "--dataset");
  const auto ds = load_dataset(data);
  const int k = cfg.at("folds").get<int>();
  const int fold = cfg.at("fold").get<int>();
  if (fold < -1 || fold >= k) throw UsageError("--fold must be in [-1, folds)");
  const auto ids = ds.subject_ids();
  const auto folds = make_folds(ids, k, cfg.at("fold_seed").get<std::uint64_t>());
  train::RunOptions opt;
  opt.out_dir = out;
  opt.on_epoch = log_epoch;
  const auto r = train::train_fold(ds, folds, fold, tc, opt);
  spdlog::info("trained in {:.1f} s", r.record.wall_seconds);
}

void cmd_crossval(const json& cfg, const fs::path& out) {
  const auto tc = train_config(cfg);
  const fs::path data = need_path(cfg, "dataset", "--dataset");
  need_exists(data, "--dataset");
  const auto ds = load_dataset(data);
  train::CvOptions opt;
  opt.run.out_dir = out;
  opt.run.on_epoch = log_epoch;
  opt.workers = cfg.at("workers").get<int>();
  opt.fold_seed = cfg.at("fold_seed").get<std::uint64_t>();
  const auto r = train::cross_validate(ds, cfg.at("folds").get<int>(), tc, opt);

  std::vector<metrics::CorePrediction> all;
  for (const auto& o : r.outcomes) all.insert(all.end(), o.predictions.begin(), o.predictions.end());
  metrics::save_predictions(out / "predictions.csv", all);

  json summaries = json::array();
  for (const auto& s : r.summaries) summaries.push_back(train::to_json(s));
  json assignment = json::object();
  for (const auto& [id, f] : r.folds.fold_of) assignment[id] = f;
  write_json(out / "cv_summary.json", {{"folds", r.folds.k},
                                       {"fold_of", assignment},
                                       {"summaries", summaries},
                                       {"pca_source", r.pca_source},
                                       {"cspca_source", r.cspca_source},
                                       {"fallback", r.fallback}});
  for (const auto& s : r.summaries)
    if (s.mean) spdlog::info("{}: {:.4f} +- {:.4f}", s.metric, *s.mean, s.std.value_or(0.0));
}

void cmd_calibrate(const json& cfg, const fs::path& out) {
  const fs::path pred_path = need_path(cfg, "predictions", "--predictions");
  need_exists(pred_path, "--predictions");
  const auto preds = metrics::load_predictions(pred_path);
  std::vector<double> scores;
  for (const auto& p : preds)
    if (p.risk) scores.push_back(*p.risk);
  if (scores.empty()) throw UsageError("--predictions: no risk probabilities (mask-only model?)");

  const bool has_counts = !cfg.at("reference_counts").is_null();
  const bool has_ref_ds = !cfg.at("reference_dataset").is_null();
  if (has_counts == has_ref_ds) throw UsageError("exactly one of --reference and --reference-dataset is required");
  risk::ReferenceCounts counts{};
  if (has_counts) {
    try {
      counts = cfg.at("reference_counts").get<risk::ReferenceCounts>();
    } catch (const json::exception&) {
      throw UsageError("--reference: expected five counts");
    }
  } else {
    const fs::path ref = cfg.at("reference_dataset").get<std::string>();
    need_exists(ref, "--reference-dataset");
    std::vector<int> rs;
    for (const auto& c : load_dataset(ref).cores)
      if (c.reference_score) rs.push_back(*c.reference_score);
    if (rs.empty()) throw UsageError("--reference-dataset: no reference_score values");
    counts = risk::count_reference(rs);
  }

  risk::BinsFile f;
  f.bins = risk::fit_bins(scores, counts);
  f.provenance = {{"predictions", pred_path.generic_string()},
                  {"n_scores", scores.size()},
                  {"reference_counts", counts},
                  {"tool_version", kToolVersion}};
  if (!cfg.at("dataset").is_null()) {
    const fs::path data = cfg.at("dataset").get<std::string>();
    need_exists(data, "--dataset");
    const auto ds = load_dataset(data);
    std::map<std::string, const BiopsyCore*> by_id;
    for (const auto& c : ds.cores) by_id[c.core_id] = &c;
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& p : preds) {
      const auto it = by_id.find(p.core_id);
      if (it == by_id.end()) throw UsageError("--dataset: core '" + p.core_id + "' not found");
      if (!p.risk) continue;
      s.push_back(*p.risk);
      y.push_back(grade_to_labels(it->second->grade_group).is_cspca ? 1 : 0);
    }
    const double spec = cfg.at("operating_specificity").get<double>();
    f.operating_threshold = metrics::threshold_at_specificity(s, y, spec);
    f.provenance["operating_specificity"] = spec;
  }
  risk::save_bins(out / "bins.json", f);
  spdlog::info("bins t1..t4 = {:.4f} {:.4f} {:.4f} {:.4f}", f.bins.t[0], f.bins.t[1], f.bins.t[2], f.bins.t[3]);
}

void cmd_eval(const json& cfg, const fs::path& out) {
  const fs::path ck = need_path(cfg, "checkpoint", "--checkpoint");
  need_exists(ck, "--checkpoint");
  const fs::path data = need_path(cfg, "dataset", "--dataset");
  need_exists(data, "--dataset");
  const auto model = load_checkpoint(ck);
  metrics::EvalOptions opt;
  if (has_class_head(model.config.head_mode)) {
    const fs::path b = need_path(cfg, "bins", "--bins");
    need_exists(b, "--bins");
    opt.bins = risk::load_bins(b);
  }
  opt.bucket_edges = cfg.at("bucket_edges").get<std::vector<double>>();
  const bool figures = cfg.at("figures").get<bool>();

  const auto ds = load_dataset(data);
  std::vector<std::size_t> cores(ds.cores.size());
  std::iota(cores.begin(), cores.end(), std::size_t{0});
  const auto preds = train::predict_cores(model, ds, cores, figures);
  const auto report = metrics::evaluate_run(preds, ds, opt);

  metrics::save_predictions(out / "predictions.csv", preds);
  write_json(out / "eval_report.json", metrics::to_json(report));
  if (figures) metrics::emit_figures(report, preds, ds, out / "figures");
  for (const auto& t : report.tasks)
    spdlog::info("{} auroc {} ({})", metrics::to_string(t.task), t.auroc ? text::format_double(*t.auroc) : "n/a",
                 t.score_source);
}

void cmd_ablate(const json& cfg, const fs::path& out) {
  const auto tc = train_config(cfg);
  const fs::path data = need_path(cfg, "dataset", "--dataset");
  need_exists(data, "--dataset");
  std::vector<std::vector<Marker>> sets;
  for (const auto& s : cfg.at("marker_sets")) sets.push_back(parse_marker_list(s.get<std::string>()));
  std::vector<HeadMode> heads;
  for (const auto& h : cfg.at("head_modes")) heads.push_back(parse_head_mode(h.get<std::string>()));
  const auto grid = train::ablation_grid(sets, heads);

  const auto ds = load_dataset(data);
  train::CvOptions opt;
  opt.run.out_dir = out;
  opt.run.on_epoch = log_epoch;
  opt.workers = cfg.at("workers").get<int>();
  opt.fold_seed = cfg.at("fold_seed").get<std::uint64_t>();
  const auto rows = train::run_ablation(ds, grid, cfg.at("folds").get<int>(), tc, opt);

  std::ofstream(out / "ablation.csv", std::ios::binary) << train::to_csv(rows);
  write_json(out / "ablation.json", train::to_json(rows));
}

const std::set<std::string> kCommands = {"synth", "train", "crossval", "calibrate", "eval", "ablate"};

void dispatch(const std::string& command, const json& cfg, const fs::path& out) {
  if (command == "synth") return cmd_synth(cfg, out);
  if (command == "train") return cmd_train(cfg, out);
  if (command == "crossval") return cmd_crossval(cfg, out);
  if (command == "calibrate") return cmd_calibrate(cfg, out);
  if (command == "eval") return cmd_eval(cfg, out);
  if (command == "ablate") return cmd_ablate(cfg, out);
  throw UsageError("unknown command '" + command + "'");
}

// --------------------------------------------------------------------------
// Flag parsing

struct Flags {
  std::optional<std::string> config, out, dataset, checkpoint, bins, markers, head_mode, backbone, predictions,
      reference, reference_dataset, manifest;
  std::optional<std::uint64_t> seed, fold_seed;
  std::optional<int> folds, fold, workers, epochs, batch_size, subjects, cores_per_subject, max_translate;
  std::optional<double> lr, prevalence, texture_contrast, metadata_signal, operating_specificity;
  std::vector<std::string> marker_sets, head_modes;
  bool no_figures = false;
};

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

json flags_to_patch(const std::string& command, const Flags& f) {
  json p = json::object();
  if (f.out) p["out"] = *f.out;
  put(p, "dataset", f.dataset);
  put(p, "checkpoint", f.checkpoint);
  put(p, "bins", f.bins);
  put(p, "predictions", f.predictions);
  put(p, "reference_dataset", f.reference_dataset);
  put(p, "folds", f.folds);
  put(p, "fold", f.fold);
  put(p, "fold_seed", f.fold_seed);
  put(p, "workers", f.workers);
  put(p, "operating_specificity", f.operating_specificity);
  if (f.reference) {
    json counts = json::array();
    try {
      for (const auto& s : text::split_csv(*f.reference)) counts.push_back(text::parse_int(text::trim(s)));
    } catch (const InvalidInput&) {
      throw UsageError("--reference: expected five comma-separated counts");
    }
    if (counts.size() != 5) throw UsageError("--reference: expected five comma-separated counts");
    p["reference_counts"] = counts;
  }
  if (f.no_figures) p["figures"] = false;
  if (!f.marker_sets.empty()) p["marker_sets"] = f.marker_sets;
  if (!f.head_modes.empty()) p["head_modes"] = f.head_modes;

  if (command == "synth") {
    json g = json::object();
    put(g, "n_subjects", f.subjects);
    put(g, "cores_per_subject", f.cores_per_subject);
    put(g, "lesion_prevalence", f.prevalence);
    put(g, "texture_contrast", f.texture_contrast);
    put(g, "metadata_signal", f.metadata_signal);
    put(g, "seed", f.seed);
    if (!g.empty()) p["generator"] = g;
  } else {
    json t = json::object();
    put(t, "seed", f.seed);
    put(t, "epochs", f.epochs);
    put(t, "batch_size", f.batch_size);
    put(t, "learning_rate", f.lr);
    put(t, "max_translate_px", f.max_translate);
    put(t, "head_mode", f.head_mode);
    if (f.markers) t["prompt_markers"] = *f.markers;
    put(t, "backbone", f.backbone);
    if (!t.empty()) p["train"] = t;
  }
  return p;
}

json resolve(const std::string& command, const Flags& f) {
  json cfg = default_config(command);
  if (f.config) {
    const fs::path p = *f.config;
    need_exists(p, "--config");
    json file = read_json(p);
    require_keys(file, [&] {
      std::set<std::string> k;
      for (const auto& [key, v] : cfg.items()) k.insert(key);
      return k;
    }(), "--config");
    cfg.merge_patch(file);
  }
  cfg.merge_patch(flags_to_patch(command, f));
  // merge_patch treats null as deletion; restore absent optional keys.
  const json defaults = default_config(command);
  for (const auto& [k, v] : defaults.items())
    if (!cfg.contains(k)) cfg[k] = v;
  if (cfg.at("out").is_null()) {
    const auto seed = seed_of(command, cfg);
    cfg["out"] = (runs_root() / (command + "-seed" + std::to_string(seed))).generic_string();
  }
  // Normalise so the manifest echoes every effective value.
  if (cfg.contains("train")) cfg["train"] = train_config(cfg).to_json();
  if (command == "synth") cfg["generator"] = gen_to_json(gen_from_json(cfg.at("generator")));
  return cfg;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (overrides defaults, overridden by flags)");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--seed", f.seed, "Random seed");
}

void add_training(CLI::App* sub, Flags& f) {
  sub->add_option("--dataset", f.dataset, "Dataset directory or manifest.csv");
  sub->add_option("--markers", f.markers, "Prompt markers, e.g. age,psa or none");
  sub->add_option("--head-mode", f.head_mode, "both|mask_only|class_only");
  sub->add_option("--backbone", f.backbone, "Backbone preset: paper_scale|toy|tiny");
  sub->add_option("--epochs", f.epochs);
  sub->add_option("--lr", f.lr, "Peak learning rate");
  sub->add_option("--batch-size", f.batch_size);
  sub->add_option("--max-translate", f.max_translate, "Translation augmentation range in pixels");
  sub->add_option("--folds", f.folds, "Number of folds K");
  sub->add_option("--fold-seed", f.fold_seed, "Seed of the subject-to-fold assignment");
}

void run_with_manifest(const std::string& command, const json& cfg) {
  const fs::path out = cfg.at("out").get<std::string>();
  const auto inputs = inputs_of(cfg);
  for (const auto& in : inputs)
    if (fs::exists(out) && fs::exists(in) && fs::equivalent(out, in))
      throw UsageError("--out must differ from input '" + in.string() + "'");
  fs::create_directories(out);

  json inputs_json = json::array();
  for (const auto& p : inputs) inputs_json.push_back(p.generic_string());
  json manifest = {{"command", command},       {"config", cfg},
                   {"inputs", inputs_json},    {"outputs", json::array()},
                   {"seed", seed_of(command, cfg)}, {"tool_version", kToolVersion},
                   {"started_at", utc_now()},  {"finished_at", nullptr},
                   {"wall_seconds", nullptr},  {"status", "running"}};
  write_json(out / kManifestFile, manifest);

  const auto t0 = std::chrono::steady_clock::now();
  dispatch(command, cfg, out);
  manifest["outputs"] = list_outputs(out);
  manifest["finished_at"] = utc_now();
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["status"] = "complete";
  write_json(out / kManifestFile, manifest);
}

bool is_usage_error(const std::exception& e) {
  return dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
         dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const LoadError*>(&e) ||
         dynamic_cast<const MissingMarker*>(&e) || dynamic_cast<const CheckpointError*>(&e) ||
         dynamic_cast<const nlohmann::json::exception*>(&e);
}

}  // namespace

fs::path runs_root() {
  const char* env = std::getenv("PNF_RUNS_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

void execute(const std::string& command, const json& resolved) {
  if (!kCommands.count(command)) throw UsageError("unknown command '" + command + "'");
  const json defaults = default_config(command);
  std::set<std::string> known;
  for (const auto& [k, v] : defaults.items()) known.insert(k);
  require_keys(resolved, known, "manifest config");
  run_with_manifest(command, resolved);
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Prompt-conditioned needle-region cancer detection toolkit", "pnf"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  Flags f;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, f);
  synth->add_option("--subjects", f.subjects, "Number of subjects");
  synth->add_option("--cores-per-subject", f.cores_per_subject);
  synth->add_option("--prevalence", f.prevalence, "Probability that a core carries cancer");
  synth->add_option("--texture-contrast", f.texture_contrast);
  synth->add_option("--metadata-signal", f.metadata_signal);

  auto* trn = app.add_subcommand("train", "Train one model");
  add_common(trn, f);
  add_training(trn, f);
  trn->add_option("--fold", f.fold, "Held-out fold; -1 trains on every subject");

  auto* cv = app.add_subcommand("crossval", "K-fold cross-validation");
  add_common(cv, f);
  add_training(cv, f);
  cv->add_option("--workers", f.workers, "Folds trained in parallel");

  auto* cal = app.add_subcommand("calibrate", "Fit risk-score bins by histogram matching");
  add_common(cal, f);
  cal->add_option("--predictions", f.predictions, "predictions.csv with risk probabilities");
  cal->add_option("--reference", f.reference, "Reference counts of scores 1..5, e.g. 30,25,20,15,10");
  cal->add_option("--reference-dataset", f.reference_dataset, "Dataset whose reference_score column is the reference");
  cal->add_option("--dataset", f.dataset, "Labels for the operating threshold");
  cal->add_option("--operating-specificity", f.operating_specificity);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, f);
  ev->add_option("--checkpoint", f.checkpoint);
  ev->add_option("--dataset", f.dataset);
  ev->add_option("--bins", f.bins, "bins.json from calibrate; required when the model has a risk head");
  ev->add_flag("--no-figures", f.no_figures);

  auto* ab = app.add_subcommand("ablate", "Cross-validate every marker set x head mode cell");
  add_common(ab, f);
  add_training(ab, f);
  ab->add_option("--workers", f.workers);
  ab->add_option("--marker-sets", f.marker_sets, "Marker sets separated by ';', e.g. none;age,psa")->delimiter(';');
  ab->add_option("--head-modes", f.head_modes, "Head modes separated by ','")->delimiter(',');

  auto* rp = app.add_subcommand("replay", "Re-run a command from its run manifest");
  rp->add_option("--manifest", f.manifest)->required();
  rp->add_option("--out", f.out)->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "pnf: error: " << e.what() << '\n';
    return kExitUsage;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    if (command == "replay") {
      need_exists(*f.manifest, "--manifest");
      const json m = read_json(*f.manifest);
      if (!m.contains("command") || !m.contains("config")) throw UsageError("--manifest: not a run manifest");
      json cfg = m.at("config");
      cfg["out"] = *f.out;
      execute(m.at("command").get<std::string>(), cfg);
    } else {
      run_with_manifest(command, resolve(command, f));
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "pnf: error: " << msg << '\n';
    return is_usage_error(e) ? kExitUsage : kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pnf::cli
