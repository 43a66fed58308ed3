// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pnf/core_data.hpp"
#include "pnf/nn/ops.hpp"
#include "pnf/nn/params.hpp"

namespace pnf {

enum class AdapterMode { full_finetune, adapters };
enum class HeadMode { both, mask_only, class_only };

std::string_view to_string(AdapterMode m);
std::string_view to_string(HeadMode m);
AdapterMode parse_adapter_mode(std::string_view s);
HeadMode parse_head_mode(std::string_view s);

inline bool has_mask_head(HeadMode m) { return m != HeadMode::class_only; }
inline bool has_class_head(HeadMode m) { return m != HeadMode::mask_only; }

struct BackboneConfig {
  int image_size = kImageSize;
  int patch_size = 4;
  int encoder_depth = 2;
  int encoder_width = 256;
  int encoder_heads = 8;
  int embed_channels = 256;
  int embed_grid = 64;  // grid is square: embed_grid x embed_grid
  std::vector<Marker> prompt_markers;
  int prompt_hidden = 256;
  int decoder_depth = 2;
  int decoder_heads = 8;
  int mlp_ratio = 4;
  AdapterMode adapter_mode = AdapterMode::full_finetune;
  int adapter_bottleneck_dim = 0;
  HeadMode head_mode = HeadMode::both;

  /// Throws ConfigError on the first broken invariant.
  void validate() const;

  nlohmann::json to_json() const;
  /// Keys absent from `j` keep their value in `base`; unknown keys are rejected.
  static BackboneConfig from_json(const nlohmann::json& j, const BackboneConfig& base);
  static BackboneConfig from_json(const nlohmann::json& j) { return from_json(j, BackboneConfig{}); }

  /// Names of fields whose values differ.
  std::vector<std::string> diff(const BackboneConfig& other) const;
  bool operator==(const BackboneConfig&) const = default;

  /// 256x256 input, 256x64x64 embedding.
  static BackboneConfig paper_scale();
  /// Small model used for desk-scale training runs.
  static BackboneConfig toy();
  /// A few thousand parameters on 32x32 inputs, for gradient checks.
  static BackboneConfig tiny();
  static BackboneConfig preset(std::string_view name);
};

/// Normalised marker values keyed by marker.
using MarkerValues = std::map<Marker, double>;

/// Normalises a subject's enabled markers. Throws MissingMarker if one is absent.
MarkerValues subject_prompts(const Subject& s, const MarkerStats& stats, std::span<const Marker> markers);

/// Encoder output, channels x grid x grid, stored pixel-major (HWC).
struct ImageEmbedding {
  int channels = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<double> hwc;

  double at(int c, int h, int w) const { return hwc[(static_cast<std::size_t>(h) * grid_w + w) * channels + c]; }
  std::vector<int> shape() const { return {channels, grid_h, grid_w}; }
};

struct PromptEmbedding {
  int rows = 0;
  int dim = 0;
  std::vector<double> data;
};

struct ModelOutput {
  std::optional<Grid<double>> heatmap;
  std::optional<double> risk;
};

/// Image encoder, prompt encoder and the two decoder heads, templated on the
/// scalar type so one definition serves training (float) and gradient
/// checks (double).
template <typename T>
class Backbone {
 public:
  using Var = nn::Var<T>;
  using Graph = nn::Graph<T>;

  /// Freshly initialised parameters drawn from `seed`.
  Backbone(BackboneConfig cfg, std::uint64_t seed);
  /// Adopts an existing parameter set; names and shapes must match `cfg`.
  Backbone(BackboneConfig cfg, nn::ParamSet<T> params);

  const BackboneConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  /// Parameter layout (names, shapes, trainable flags) with zero values.
  static nn::ParamSet<T> layout(const BackboneConfig& cfg);

  Var encode_image(Graph& g, const Image& image) const;
  Var encode_prompts(Graph& g, const MarkerValues& markers) const;
  /// Heatmap probabilities, {image_size, image_size, 1}. With a non-empty
  /// `sample`, only those flat pixel indices are produced, as {n, 1}.
  Var decode_heatmap(Graph& g, Var image_embedding, Var prompts, std::span<const int> sample = {}) const;
  /// Risk probability, {1, 1}.
  Var decode_risk(Graph& g, Var image_embedding, Var prompts) const;

  struct Outputs {
    Var embedding;
    std::optional<Var> heatmap;
    std::optional<Var> risk;
  };
  Outputs forward(Graph& g, const Image& image, const MarkerValues& markers,
                  std::span<const int> heatmap_sample = {}) const;

  // Tape-free conveniences for inference.
  ImageEmbedding embed(const Image& image) const;
  PromptEmbedding prompts(const MarkerValues& markers) const;
  ModelOutput predict(const Image& image, const MarkerValues& markers) const;

 private:
  Var decode_tokens(Graph& g, const std::string& prefix, Var image_embedding, Var prompts, Var* keys_out) const;
  Var attention_block(Graph& g, const std::string& prefix, Var q, Var k, Var v, int heads) const;
  Var mlp(Graph& g, const std::string& prefix, Var x) const;
  Var norm(Graph& g, const std::string& prefix, Var x) const;
  Var dense(Graph& g, const std::string& prefix, Var x) const;
  Var adapter(Graph& g, const std::string& prefix, Var x) const;
  Var p(Graph& g, const std::string& name) const { return g.param(params_.index(name)); }

  BackboneConfig cfg_;
  nn::ParamSet<T> params_;
  nn::Tensor<T> image_pe_;  // fixed sinusoidal encoding of the embedding grid
};

extern template class Backbone<float>;
extern template class Backbone<double>;

/// Number of scalars in the trainable subset.
template <typename T>
std::size_t trainable_count(const nn::ParamSet<T>& params);

}  // namespace pnf
