// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/synthgen.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "pnf/dataset_io.hpp"
#include "pnf/image_io.hpp"
#include "pnf/rng.hpp"
#include "pnf/text.hpp"

namespace pnf::synth {

void GenConfig::validate() const {
  if (n_subjects < 1) throw InvalidInput("GenConfig: n_subjects must be >= 1");
  if (cores_per_subject < 1) throw InvalidInput("GenConfig: cores_per_subject must be >= 1");
  if (!(lesion_prevalence >= 0.0 && lesion_prevalence <= 1.0))
    throw InvalidInput("GenConfig: lesion_prevalence must lie in [0,1]");
  if (!(texture_contrast >= 0.0)) throw InvalidInput("GenConfig: texture_contrast must be >= 0");
  if (!(metadata_signal >= 0.0 && metadata_signal <= 1.0))
    throw InvalidInput("GenConfig: metadata_signal must lie in [0,1]");
  if (!(burden_coupling >= 0.0 && burden_coupling <= 1.0))
    throw InvalidInput("GenConfig: burden_coupling must lie in [0,1]");
  if (!std::is_sorted(grade_cuts.begin(), grade_cuts.end()))
    throw InvalidInput("GenConfig: grade_cuts must be non-decreasing");
  if (image_size < 64) throw InvalidInput("GenConfig: image_size must be >= 64");
}

namespace {

struct Frame {
  double ux, uy;  // unit axis (col, row)
  double nx, ny;  // unit normal
};

Frame frame_for(double angle) {
  const double s = std::sin(angle), c = std::cos(angle);
  return {s, c, c, -s};
}

Mask rasterize_needle(const NeedleSpec& n, int size) {
  const Frame f = frame_for(n.angle);
  Mask m(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double dx = c - n.cx, dy = r - n.cy;
      const double along = dx * f.ux + dy * f.uy;
      const double across = dx * f.nx + dy * f.ny;
      if (std::abs(along) <= n.length / 2 && std::abs(across) <= n.width / 2) m(r, c) = 1;
    }
  return m;
}

Mask rasterize_lesion(const LesionSpec& l, int size) {
  const Frame f = frame_for(l.angle);
  Mask m(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double dx = c - l.cx, dy = r - l.cy;
      const double along = (dx * f.ux + dy * f.uy) / l.ry;
      const double across = (dx * f.nx + dy * f.ny) / l.rx;
      if (along * along + across * across <= 1.0) m(r, c) = 1;
    }
  return m;
}

/// Half extents of the rotated ellipse's bounding box (cols, rows).
std::pair<double, double> lesion_half_extent(const LesionSpec& l) {
  const Frame f = frame_for(l.angle);
  const double hx = std::hypot(l.ry * f.ux, l.rx * f.nx);
  const double hy = std::hypot(l.ry * f.uy, l.rx * f.ny);
  return {hx, hy};
}

bool lesion_in_bounds(const LesionSpec& l, int size) {
  auto [hx, hy] = lesion_half_extent(l);
  return l.cx - hx >= 0 && l.cx + hx <= size - 1 && l.cy - hy >= 0 && l.cy + hy <= size - 1;
}

}  // namespace

RenderedCore render_core(std::uint64_t background_seed, const std::optional<LesionSpec>& lesion,
                         const NeedleSpec& needle, int size) {
  if (size < 8) throw InvalidInput("render_core: image too small");
  if (!(needle.width >= 3.0)) throw InvalidInput("render_core: needle width must be >= 3 px");
  if (!(needle.length > 0.0)) throw InvalidInput("render_core: needle length must be positive");
  {
    const Frame f = frame_for(needle.angle);
    for (double s : {-0.5, 0.5}) {
      const double ex = needle.cx + s * needle.length * f.ux;
      const double ey = needle.cy + s * needle.length * f.uy;
      if (ex < 0 || ey < 0 || ex > size - 1 || ey > size - 1)
        throw InvalidInput("render_core: needle trace leaves the image");
    }
  }
  if (lesion) {
    if (!(lesion->rx > 0 && lesion->ry > 0)) throw InvalidInput("render_core: lesion axes must be positive");
    if (!(lesion->contrast >= 0)) throw InvalidInput("render_core: lesion contrast must be >= 0");
    if (!lesion_in_bounds(*lesion, size)) throw InvalidInput("render_core: lesion ellipse leaves the image");
  }

  RenderedCore out;
  out.needle_mask = rasterize_needle(needle, size);
  if (count_set(out.needle_mask) == 0) throw InvalidInput("render_core: needle covers no pixel");
  out.lesion_mask = lesion ? rasterize_lesion(*lesion, size) : Mask(size, size);

  std::mt19937_64 rng(background_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(size) * size);
  for (auto& v : noise) v = gauss(rng);

  // [1 2 1]/4 smoothing in both directions; 0.375 restores unit variance.
  std::vector<double> tmp(noise.size());
  auto idx = [size](int r, int c) { return static_cast<std::size_t>(r) * size + c; };
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const int cl = std::max(c - 1, 0), cr = std::min(c + 1, size - 1);
      tmp[idx(r, c)] = 0.25 * noise[idx(r, cl)] + 0.5 * noise[idx(r, c)] + 0.25 * noise[idx(r, cr)];
    }
  out.image = Image(size, size);
  const double contrast = lesion ? lesion->contrast : 0.0;
  const double shift = contrast * kLogShiftPerContrast;
  const double spread = 1.0 + contrast * kLogSpreadPerContrast;
  for (int r = 0; r < size; ++r) {
    const int ru = std::max(r - 1, 0), rd = std::min(r + 1, size - 1);
    for (int c = 0; c < size; ++c) {
      const double g =
          (0.25 * tmp[idx(ru, c)] + 0.5 * tmp[idx(r, c)] + 0.25 * tmp[idx(rd, c)]) / 0.375;
      const bool in_lesion = out.lesion_mask(r, c) != 0;
      const double log_i = in_lesion ? kLogMean + shift + kLogStd * spread * g : kLogMean + kLogStd * g;
      out.image(r, c) = static_cast<float>(std::min(1.0, std::exp(log_i)));
    }
  }
  return out;
}

double oracle_involvement(const Mask& needle_mask, const Mask& lesion_mask) {
  if (needle_mask.rows != lesion_mask.rows || needle_mask.cols != lesion_mask.cols)
    throw InvalidInput("oracle_involvement: mask shapes differ");
  std::size_t needle = 0, both = 0;
  for (std::size_t i = 0; i < needle_mask.size(); ++i) {
    if (!needle_mask.data[i]) continue;
    ++needle;
    if (lesion_mask.data[i]) ++both;
  }
  if (needle == 0) throw InvalidInput("oracle_involvement: empty needle mask");
  return static_cast<double>(both) / static_cast<double>(needle);
}

namespace {

double cancer_threshold(double prevalence) {
  if (prevalence <= 0.0) return std::numeric_limits<double>::infinity();
  if (prevalence >= 1.0) return -std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal(), 1.0 - prevalence);
}

std::string format_id(const char* fmt, int a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

/// Places a lesion on the needle axis so that roughly `target` of the trace
/// is covered, anchored at one end of the trace.
LesionSpec place_lesion(const NeedleSpec& n, double target, double strength, double contrast,
                        std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = size / 256.0;
  const double covered = target * n.length;
  double ry = std::max(scale * (12.0 + 48.0 * unit(rng)), covered / 2.0 + 1.0);
  const double rx = n.width * (1.5 + 2.5 * unit(rng));
  const bool from_top = unit(rng) < 0.5;
  const Frame f = frame_for(n.angle);
  LesionSpec l;
  l.rx = rx;
  l.angle = n.angle;
  l.contrast = contrast * strength;
  for (int attempt = 0; attempt < 64; ++attempt) {
    l.ry = ry;
    const double t = from_top ? -n.length / 2 + covered - ry : n.length / 2 - covered + ry;
    l.cx = n.cx + t * f.ux;
    l.cy = n.cy + t * f.uy;
    if (lesion_in_bounds(l, size)) return l;
    ry = std::max(covered / 2.0 + 1.0, ry * 0.9);
  }
  // Fall back to a lesion centred on the trace.
  l.ry = std::max(covered / 2.0, 2.0);
  l.cx = n.cx;
  l.cy = n.cy;
  return l;
}

}  // namespace

Generated generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  const double threshold = cancer_threshold(cfg.lesion_prevalence);
  const double rho = cfg.burden_coupling;
  const double m = cfg.metadata_signal;
  const int size = cfg.image_size;
  const double scale = size / 256.0;

  Generated gen;
  for (int si = 0; si < cfg.n_subjects; ++si) {
    Subject subj;
    subj.subject_id = format_id("S%04d", si + 1);
    std::mt19937_64 srng(derive_seed({cfg.seed, hash_string(subj.subject_id), 0x5b}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double burden = gauss(srng);
    const double z_psa = gauss(srng), z_age = gauss(srng), z_vol = gauss(srng);
    subj.psa = std::exp(std::log(6.5) + 0.55 * (m * burden + std::sqrt(1.0 - m * m) * z_psa));
    subj.age = std::clamp(64.0 + 7.0 * (0.6 * m * burden + std::sqrt(1.0 - 0.36 * m * m) * z_age),
                          40.0, 90.0);
    subj.psad = subj.psa / std::exp(std::log(45.0) + 0.3 * z_vol);
    subj.family_history = unit(srng) < 0.15;
    gen.truth.subject_burden[subj.subject_id] = burden;

    for (int ci = 0; ci < cfg.cores_per_subject; ++ci) {
      BiopsyCore core;
      core.subject_id = subj.subject_id;
      core.core_id = subj.subject_id + format_id("_C%02d", ci + 1);
      std::mt19937_64 crng(derive_seed({cfg.seed, hash_string(core.core_id), 0xc0}));

      const double latent = rho * burden + std::sqrt(1.0 - rho * rho) * gauss(crng);
      const bool cancer = latent > threshold;

      NeedleSpec needle;
      needle.angle = (unit(crng) - 0.5) * 0.52;  // within ±15° of vertical
      needle.length = 0.4 * size;
      needle.width = std::max(3.0, 6.0 * scale);
      needle.cx = size * (0.3 + 0.4 * unit(crng));
      needle.cy = size * (0.35 + 0.3 * unit(crng));

      CoreTruth truth;
      truth.core_id = core.core_id;
      std::optional<LesionSpec> lesion;
      double target = 0.0;
      if (cancer) {
        target = 0.05 + 0.95 * unit(crng);
        truth.lesion_strength = 0.5 + unit(crng);
        lesion = place_lesion(needle, target, truth.lesion_strength, cfg.texture_contrast, crng, size);
      }
      const std::uint64_t bg_seed = crng();
      RenderedCore rc = render_core(bg_seed, lesion, needle, size);
      core.image = std::move(rc.image);
      core.needle_mask = std::move(rc.needle_mask);
      truth.lesion_mask = std::move(rc.lesion_mask);
      core.involvement = cancer ? oracle_involvement(core.needle_mask, truth.lesion_mask) : 0.0;

      const double n_sev = gauss(crng), n_ref = gauss(crng);
      if (cancer && core.involvement > 0.0) {
        const double z_strength = (truth.lesion_strength - 1.0) / 0.288675;
        const double z_size = (core.involvement - 0.525) / 0.274;
        truth.severity =
            (0.7 * z_strength + 0.5 * z_size + 0.4 * burden + 0.5 * n_sev) / std::sqrt(1.15);
        core.grade_group = 1 + static_cast<int>(std::count_if(
                                   cfg.grade_cuts.begin(), cfg.grade_cuts.end(),
                                   [&](double cut) { return truth.severity > cut; }));
      } else {
        core.involvement = 0.0;
        core.grade_group = 0;
        truth.lesion_strength = 0.0;
      }
      // Expert-style 1..5 score, noisy in severity.
      const double ref_latent =
          core.grade_group == 0 ? -1.0 + 0.8 * n_ref : 0.3 + 0.6 * truth.severity + 0.6 * n_ref;
      const double ref_cuts[4] = {-0.9, -0.2, 0.5, 1.2};
      core.reference_score =
          1 + static_cast<int>(std::count_if(std::begin(ref_cuts), std::end(ref_cuts),
                                             [&](double cut) { return ref_latent > cut; }));
      truth.grade_group = core.grade_group;

      subj.cores.push_back(core.core_id);
      gen.dataset.cores.push_back(std::move(core));
      gen.truth.cores.push_back(std::move(truth));
    }
    gen.dataset.subjects.push_back(std::move(subj));
  }
  return gen;
}

void save_generated(const Generated& gen, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  save_dataset(gen.dataset, dir);
  const fs::path gt = dir / "ground_truth";
  fs::create_directories(gt / "lesions");
  std::ofstream cores(gt / "cores.csv", std::ios::binary);
  cores << "core_id,grade_group,lesion_strength,severity,lesion_mask_path\n";
  for (const auto& t : gen.truth.cores) {
    Raster8 m(t.lesion_mask.rows, t.lesion_mask.cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = t.lesion_mask.data[i] ? 255 : 0;
    const std::string rel = "lesions/" + t.core_id + ".png";
    write_png_gray(gt / rel, m);
    cores << t.core_id << ',' << t.grade_group << ',' << text::format_double(t.lesion_strength) << ','
          << text::format_double(t.severity) << ',' << rel << '\n';
  }
  std::ofstream subjects(gt / "subjects.csv", std::ios::binary);
  subjects << "subject_id,burden\n";
  for (const auto& s : gen.dataset.subjects)
    subjects << s.subject_id << ',' << text::format_double(gen.truth.subject_burden.at(s.subject_id))
             << '\n';
  if (!cores || !subjects) throw Error("failed writing ground truth under '" + gt.string() + "'");
}

}  // namespace pnf::synth
