// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace pnf {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : p_(data), end_(data + size) {}
  void bytes(void* dst, std::size_t n) {
    if (static_cast<std::size_t>(end_ - p_) < n) throw CheckpointError("checkpoint is truncated");
    std::memcpy(dst, p_, n);
    p_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (static_cast<std::size_t>(end_ - p_) < n) throw CheckpointError("checkpoint is truncated");
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  const char* p_;
  const char* end_;
};

std::uint32_t crc(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

json marker_stats_to_json(const MarkerStats& s) {
  json j = json::object();
  for (const auto& [m, mo] : s.moments) j[std::string(to_string(m))] = {{"mean", mo.mean}, {"std", mo.std}};
  return j;
}

MarkerStats marker_stats_from_json(const json& j) {
  MarkerStats s;
  try {
    for (const auto& [k, v] : j.items())
      s.moments[parse_marker(k)] = {v.at("mean").get<double>(), v.at("std").get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("marker stats: ") + e.what());
  }
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.config.validate();
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const json header = {{"config", ckpt.config.to_json()},
                       {"marker_stats", marker_stats_to_json(ckpt.marker_stats)},
                       {"meta", ckpt.meta}};
  w.str(header.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& e : ckpt.params.entries()) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.shape.size()));
    for (int d : e.value.shape) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(e.value.data.data(), e.value.numel() * sizeof(float));
  }
  auto& buf = w.buffer();
  const std::uint32_t sum = crc(buf.data(), buf.size());
  w.u32(sum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint '" + path.string() + "': ";
  if (buf.size() < sizeof kCheckpointMagic + 8) throw CheckpointError(where + "file is truncated");
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError(where + "bad magic (not a pnf checkpoint)");
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  if (crc(buf.data(), buf.size() - 4) != stored)
    throw CheckpointError(where + "checksum mismatch (file is corrupt or truncated)");

  try {
    Reader r(buf.data() + sizeof kCheckpointMagic, buf.size() - sizeof kCheckpointMagic - 4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported version " + std::to_string(version));
    const json header = json::parse(r.str());
    Checkpoint ck;
    ck.config = BackboneConfig::from_json(header.at("config"));
    ck.marker_stats = marker_stats_from_json(header.at("marker_stats"));
    ck.meta = header.value("meta", json::object());
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = r.str();
      const std::uint32_t nd = r.u32();
      std::vector<int> shape(nd);
      for (auto& d : shape) d = static_cast<int>(r.u32());
      nn::Tensor<float> t(shape);
      r.bytes(t.data.data(), t.numel() * sizeof(float));
      ck.params.add(std::move(name), std::move(t));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after parameter table");
    // Validates names and shapes, and restores trainable flags.
    Backbone<float> model(ck.config, std::move(ck.params));
    ck.params = std::move(model.params());
    return ck;
  } catch (const CheckpointError& e) {
    throw CheckpointError(where + e.what());
  } catch (const std::exception& e) {
    throw CheckpointError(where + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const BackboneConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const auto diff = ck.config.diff(expected);
  if (!diff.empty()) {
    std::string names;
    for (const auto& d : diff) names += (names.empty() ? "" : ", ") + d;
    const json a = ck.config.to_json(), b = expected.to_json();
    throw CheckpointError("checkpoint '" + path.string() + "': config mismatch in " + names + " (file has " +
                          a.at(diff.front()).dump() + ", expected " + b.at(diff.front()).dump() + ")");
  }
  return ck;
}

}  // namespace pnf
