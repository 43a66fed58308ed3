// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/riskscore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "pnf/error.hpp"

namespace pnf::risk {

void RiskBins::validate() const {
  double prev = 0.0;
  for (int g = 0; g < 4; ++g) {
    if (!(t[g] >= 0.0 && t[g] <= 1.0))
      throw InvalidInput("risk bins: t" + std::to_string(g + 1) + " = " + std::to_string(t[g]) + " outside [0,1]");
    if (t[g] < prev) throw InvalidInput("risk bins: thresholds must be non-decreasing");
    prev = t[g];
  }
}

ReferenceCounts count_reference(std::span<const int> reference_scores) {
  ReferenceCounts c{};
  for (int s : reference_scores) {
    if (s < 1 || s > 5) throw InvalidInput("reference score " + std::to_string(s) + " outside 1..5");
    ++c[static_cast<std::size_t>(s - 1)];
  }
  return c;
}

RiskBins fit_bins(std::span<const double> model_scores, std::span<const int> reference_scores) {
  if (reference_scores.empty()) throw InvalidInput("fit_bins: empty reference scores");
  return fit_bins(model_scores, count_reference(reference_scores));
}

RiskBins fit_bins(std::span<const double> model_scores, const ReferenceCounts& reference) {
  if (model_scores.empty()) throw InvalidInput("fit_bins: empty model scores");
  long long total = 0;
  for (long long c : reference) {
    if (c < 0) throw InvalidInput("fit_bins: negative reference count");
    total += c;
  }
  if (total == 0) throw InvalidInput("fit_bins: empty reference distribution");
  std::vector<double> sorted(model_scores.begin(), model_scores.end());
  for (double s : sorted)
    if (!(s >= 0.0 && s <= 1.0)) throw InvalidInput("fit_bins: model score outside [0,1]");
  std::sort(sorted.begin(), sorted.end());
  const long long n = static_cast<long long>(sorted.size());
  // Above every observed score; scores can then never reach this bin.
  const double sentinel = std::min(1.0, std::nextafter(sorted.back(), 2.0));

  RiskBins b;
  long long cum = 0;
  for (int g = 0; g < 4; ++g) {
    cum += reference[static_cast<std::size_t>(g)];
    // Number of scores that must fall below t_g: ceil(cum * n / total).
    const long long k = (cum * n + total - 1) / total;
    if (k <= 0)
      b.t[g] = 0.0;
    else if (k >= n)
      b.t[g] = sentinel;
    else
      b.t[g] = sorted[static_cast<std::size_t>(k)];
  }
  return b;
}

int discretize(double score, const RiskBins& bins) {
  if (!(score >= 0.0 && score <= 1.0)) throw InvalidInput("discretize: score " + std::to_string(score) + " outside [0,1]");
  int g = 1;
  for (double t : bins.t)
    if (score >= t) ++g;
  return g;
}

int patient_max_score(std::span<const int> core_scores) {
  if (core_scores.empty()) throw InvalidInput("patient_max_score: no core scores");
  for (int s : core_scores)
    if (s < 1 || s > 5) throw InvalidInput("patient_max_score: score " + std::to_string(s) + " outside 1..5");
  return *std::max_element(core_scores.begin(), core_scores.end());
}

nlohmann::json to_json(const BinsFile& f) {
  nlohmann::json j = {{"t1", f.bins.t[0]}, {"t2", f.bins.t[1]}, {"t3", f.bins.t[2]}, {"t4", f.bins.t[3]},
                      {"provenance", f.provenance}};
  if (f.operating_threshold) j["operating_threshold"] = *f.operating_threshold;
  return j;
}

BinsFile bins_from_json(const nlohmann::json& j) {
  BinsFile f;
  try {
    f.bins.t = {j.at("t1").get<double>(), j.at("t2").get<double>(), j.at("t3").get<double>(), j.at("t4").get<double>()};
    if (j.contains("operating_threshold")) f.operating_threshold = j.at("operating_threshold").get<double>();
    f.provenance = j.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("risk bins: ") + e.what());
  }
  f.bins.validate();
  return f;
}

void save_bins(const std::filesystem::path& path, const BinsFile& f) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_json(f).dump(2) << "\n";
}

BinsFile load_bins(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open bins file '" + path.string() + "'");
  try {
    return bins_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("bins file '" + path.string() + "': " + e.what());
  }
}

}  // namespace pnf::risk
