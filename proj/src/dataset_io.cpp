// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pnf/image_io.hpp"
#include "pnf/text.hpp"

namespace pnf {

namespace fs = std::filesystem;

std::string involvement_to_pct(double fraction) {
  if (!std::isfinite(fraction)) throw InvalidInput("involvement must be finite");
  // Shortest scientific form, then move the decimal point two places right.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, fraction, std::chars_format::scientific);
  const std::string sci(buf, res.ptr);
  const auto e = sci.find('e');
  std::string digits;
  for (char ch : sci.substr(0, e))
    if (ch >= '0' && ch <= '9') digits.push_back(ch);
  const bool neg = sci[0] == '-';
  const int point = std::stoi(sci.substr(e + 1)) + 2;  // decimal exponent of the first digit
  std::string out;
  const int n = static_cast<int>(digits.size());
  if (point >= n - 1) {
    out = digits + std::string(static_cast<std::size_t>(point - n + 1), '0');
  } else if (point >= 0) {
    out = digits.substr(0, static_cast<std::size_t>(point) + 1) + "." + digits.substr(static_cast<std::size_t>(point) + 1);
  } else {
    out = "0." + std::string(static_cast<std::size_t>(-point - 1), '0') + digits;
  }
  return neg ? "-" + out : out;
}

double pct_to_involvement(std::string_view pct) {
  const std::string t = text::trim(pct);
  if (t.find_first_of("eE") != std::string::npos) throw InvalidInput("involvement_pct must be plain decimal: '" + t + "'");
  // Exact decimal division by 100, rounded once.
  return text::parse_double(t + "e-2");
}

namespace {

std::string opt_to_string(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string();
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw Error("cannot write manifest in '" + dir.string() + "'");
  out << kManifestHeader << '\n';
  for (const auto& core : ds.cores) {
    const Subject& s = ds.subject(core.subject_id);
    const std::string image_rel = "images/" + core.core_id + ".png";
    const std::string mask_rel = "masks/" + core.core_id + ".png";
    write_png_gray(dir / image_rel, quantize(core.image));
    Raster8 mask(core.needle_mask.rows, core.needle_mask.cols);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = core.needle_mask.data[i] ? 255 : 0;
    write_png_gray(dir / mask_rel, mask);
    out << s.subject_id << ',' << core.core_id << ',' << core.grade_group << ','
        << involvement_to_pct(core.involvement) << ',' << text::format_double(s.age) << ','
        << text::format_double(s.psa) << ',' << opt_to_string(s.psad) << ','
        << (s.family_history ? (*s.family_history ? "1" : "0") : "") << ','
        << (core.reference_score ? std::to_string(*core.reference_score) : "") << ','
        << image_rel << ',' << mask_rel << '\n';
  }
  if (!out) throw Error("failed writing manifest in '" + dir.string() + "'");
}

Dataset load_dataset(const fs::path& manifest_path) {
  fs::path manifest = manifest_path;
  if (fs::is_directory(manifest)) manifest /= kManifestName;
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw LoadError("cannot open manifest '" + manifest.string() + "'");
  const fs::path root = manifest.parent_path();

  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kManifestHeader)
    throw LoadError("manifest '" + manifest.string() + "': header must be '" +
                    std::string(kManifestHeader) + "'");

  Dataset ds;
  std::map<std::string, std::size_t> subject_index;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    const std::string where = manifest.filename().string() + " row " + std::to_string(row);
    if (f.size() != 11)
      throw LoadError(where + ": expected 11 fields, got " + std::to_string(f.size()));
    const std::string& core_id = f[1];
    const std::string ctx = where + " (core_id '" + core_id + "')";
    try {
      Subject s;
      s.subject_id = f[0];
      s.age = text::parse_double(f[4]);
      s.psa = text::parse_double(f[5]);
      if (!text::trim(f[6]).empty()) s.psad = text::parse_double(f[6]);
      const std::string fh = text::trim(f[7]);
      if (fh == "1" || fh == "true") s.family_history = true;
      else if (fh == "0" || fh == "false") s.family_history = false;
      else if (!fh.empty()) throw InvalidInput("family_history must be 0/1, got '" + fh + "'");

      BiopsyCore core;
      core.core_id = core_id;
      core.subject_id = s.subject_id;
      core.grade_group = static_cast<int>(text::parse_int(f[2]));
      core.involvement = pct_to_involvement(f[3]);
      if (!text::trim(f[8]).empty()) core.reference_score = static_cast<int>(text::parse_int(f[8]));

      Raster8 raw = read_png_gray(root / text::trim(f[9]));
      core.image = (raw.rows == kImageSize && raw.cols == kImageSize) ? to_unit(raw)
                                                                      : preprocess_image(raw);
      Raster8 mask_raw = read_png_gray(root / text::trim(f[10]));
      Mask mask(mask_raw.rows, mask_raw.cols);
      for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = mask_raw.data[i] >= 128 ? 1 : 0;
      core.needle_mask = (mask.rows == kImageSize && mask.cols == kImageSize) ? mask
                                                                              : resize_mask(mask);
      core.validate();

      auto it = subject_index.find(s.subject_id);
      if (it == subject_index.end()) {
        s.cores.push_back(core.core_id);
        subject_index[s.subject_id] = ds.subjects.size();
        ds.subjects.push_back(std::move(s));
      } else {
        Subject& known = ds.subjects[it->second];
        if (known.age != s.age || known.psa != s.psa || known.psad != s.psad ||
            known.family_history != s.family_history)
          throw InvalidInput("subject '" + s.subject_id + "' metadata differs between rows");
        known.cores.push_back(core.core_id);
      }
      ds.cores.push_back(std::move(core));
    } catch (const LoadError& e) {
      throw LoadError(ctx + ": " + e.what());
    } catch (const Error& e) {
      throw LoadError(ctx + ": " + e.what());
    }
  }
  try {
    ds.validate();
  } catch (const Error& e) {
    throw LoadError("manifest '" + manifest.string() + "': " + e.what());
  }
  return ds;
}

}  // namespace pnf
