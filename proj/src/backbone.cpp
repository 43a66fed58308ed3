// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/backbone.hpp"

#include <cmath>
#include <random>
#include <set>

#include "pnf/rng.hpp"

namespace pnf {

namespace {

using nlohmann::json;

std::string cat(const std::string& a, const std::string& b) { return a + "." + b; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(AdapterMode m) { return m == AdapterMode::adapters ? "adapters" : "full_finetune"; }

std::string_view to_string(HeadMode m) {
  switch (m) {
    case HeadMode::both: return "both";
    case HeadMode::mask_only: return "mask_only";
    case HeadMode::class_only: return "class_only";
  }
  return "?";
}

AdapterMode parse_adapter_mode(std::string_view s) {
  if (s == "full_finetune") return AdapterMode::full_finetune;
  if (s == "adapters") return AdapterMode::adapters;
  throw ConfigError("unknown adapter mode '" + std::string(s) + "' (expected full_finetune|adapters)");
}

HeadMode parse_head_mode(std::string_view s) {
  if (s == "both") return HeadMode::both;
  if (s == "mask_only") return HeadMode::mask_only;
  if (s == "class_only") return HeadMode::class_only;
  throw ConfigError("unknown head mode '" + std::string(s) + "' (expected both|mask_only|class_only)");
}

// ---------------------------------------------------------------------------
// BackboneConfig

void BackboneConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("backbone config: " + m); };
  if (image_size <= 0 || patch_size <= 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0)
    fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " + std::to_string(patch_size));
  if (embed_grid != image_size / patch_size)
    fail("embed_grid " + std::to_string(embed_grid) + " does not equal image_size/patch_size = " +
         std::to_string(image_size / patch_size));
  if (encoder_depth < 0) fail("encoder_depth must be >= 0");
  if (encoder_width <= 0 || encoder_heads <= 0 || encoder_width % encoder_heads != 0)
    fail("encoder_width must be a positive multiple of encoder_heads");
  if (embed_channels <= 0 || embed_channels % 8 != 0) fail("embed_channels must be a positive multiple of 8");
  if (decoder_depth < 1) fail("decoder_depth must be >= 1");
  if (decoder_heads <= 0 || embed_channels % decoder_heads != 0)
    fail("embed_channels must be a multiple of decoder_heads");
  if (prompt_hidden <= 0) fail("prompt_hidden must be positive");
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  std::set<Marker> seen;
  for (Marker m : prompt_markers)
    if (!seen.insert(m).second) fail("duplicate prompt marker '" + std::string(to_string(m)) + "'");
  if (adapter_mode == AdapterMode::adapters && adapter_bottleneck_dim <= 0)
    fail("adapter_bottleneck_dim must be positive in adapters mode");
  if (adapter_bottleneck_dim < 0) fail("adapter_bottleneck_dim must be >= 0");
}

nlohmann::json BackboneConfig::to_json() const {
  json markers = json::array();
  for (Marker m : prompt_markers) markers.push_back(std::string(to_string(m)));
  return json{{"image_size", image_size},
              {"patch_size", patch_size},
              {"encoder_depth", encoder_depth},
              {"encoder_width", encoder_width},
              {"encoder_heads", encoder_heads},
              {"embed_channels", embed_channels},
              {"embed_grid", embed_grid},
              {"prompt_markers", markers},
              {"prompt_hidden", prompt_hidden},
              {"decoder_depth", decoder_depth},
              {"decoder_heads", decoder_heads},
              {"mlp_ratio", mlp_ratio},
              {"adapter_mode", std::string(to_string(adapter_mode))},
              {"adapter_bottleneck_dim", adapter_bottleneck_dim},
              {"head_mode", std::string(to_string(head_mode))}};
}

BackboneConfig BackboneConfig::from_json(const nlohmann::json& j, const BackboneConfig& base) {
  if (!j.is_object()) throw ConfigError("backbone config must be a JSON object");
  BackboneConfig c = base;
  static const std::set<std::string> known = {
      "image_size",    "patch_size",     "encoder_depth", "encoder_width", "encoder_heads",
      "embed_channels", "embed_grid",    "prompt_markers", "prompt_hidden", "decoder_depth",
      "decoder_heads", "mlp_ratio",      "adapter_mode",  "adapter_bottleneck_dim", "head_mode"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("backbone config: unknown key '" + k + "'");
  try {
    auto get = [&](const char* key, int& dst) {
      if (j.contains(key)) dst = j.at(key).get<int>();
    };
    get("image_size", c.image_size);
    get("patch_size", c.patch_size);
    get("encoder_depth", c.encoder_depth);
    get("encoder_width", c.encoder_width);
    get("encoder_heads", c.encoder_heads);
    get("embed_channels", c.embed_channels);
    get("embed_grid", c.embed_grid);
    get("prompt_hidden", c.prompt_hidden);
    get("decoder_depth", c.decoder_depth);
    get("decoder_heads", c.decoder_heads);
    get("mlp_ratio", c.mlp_ratio);
    get("adapter_bottleneck_dim", c.adapter_bottleneck_dim);
    if (j.contains("prompt_markers")) {
      const auto& pm = j.at("prompt_markers");
      if (pm.is_string()) {
        c.prompt_markers = parse_marker_list(pm.get<std::string>());
      } else {
        c.prompt_markers.clear();
        for (const auto& m : pm) c.prompt_markers.push_back(parse_marker(m.get<std::string>()));
      }
    }
    if (j.contains("adapter_mode")) c.adapter_mode = parse_adapter_mode(j.at("adapter_mode").get<std::string>());
    if (j.contains("head_mode")) c.head_mode = parse_head_mode(j.at("head_mode").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("backbone config: ") + e.what());
  }
  return c;
}

std::vector<std::string> BackboneConfig::diff(const BackboneConfig& o) const {
  std::vector<std::string> out;
  const json a = to_json(), b = o.to_json();
  for (const auto& [k, v] : a.items())
    if (b.at(k) != v) out.push_back(k);
  return out;
}

BackboneConfig BackboneConfig::paper_scale() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::toy() {
  BackboneConfig c;
  c.patch_size = 16;
  c.embed_grid = 16;
  c.encoder_depth = 1;
  c.encoder_width = 32;
  c.encoder_heads = 2;
  c.embed_channels = 32;
  c.prompt_hidden = 32;
  c.decoder_depth = 1;
  c.decoder_heads = 2;
  c.mlp_ratio = 2;
  c.adapter_bottleneck_dim = 8;
  return c;
}

BackboneConfig BackboneConfig::tiny() {
  BackboneConfig c;
  c.image_size = 32;
  c.patch_size = 8;
  c.embed_grid = 4;
  c.encoder_depth = 1;
  c.encoder_width = 8;
  c.encoder_heads = 2;
  c.embed_channels = 8;
  c.prompt_hidden = 8;
  c.decoder_depth = 1;
  c.decoder_heads = 2;
  c.mlp_ratio = 2;
  c.adapter_bottleneck_dim = 4;
  return c;
}

BackboneConfig BackboneConfig::preset(std::string_view name) {
  if (name == "paper" || name == "paper_scale") return paper_scale();
  if (name == "toy") return toy();
  if (name == "tiny") return tiny();
  throw ConfigError("unknown backbone preset '" + std::string(name) + "' (expected paper|toy|tiny)");
}

MarkerValues subject_prompts(const Subject& s, const MarkerStats& stats, std::span<const Marker> markers) {
  MarkerValues out;
  for (Marker m : markers) {
    try {
      out[m] = normalize_marker(marker_value(s, m), stats, m);
    } catch (const MissingMarker& e) {
      throw MissingMarker("subject '" + s.subject_id + "': " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

template <typename T>
struct LayoutBuilder {
  nn::ParamSet<T>& ps;
  bool frozen = false;

  void add(const std::string& name, std::vector<int> shape) { ps.add(name, nn::Tensor<T>(std::move(shape)), !frozen); }
  void dense(const std::string& prefix, int in, int out) {
    add(cat(prefix, "w"), {in, out});
    add(cat(prefix, "b"), {out});
  }
  void norm(const std::string& prefix, int d) {
    add(cat(prefix, "g"), {d});
    add(cat(prefix, "b"), {d});
  }
  void attention(const std::string& prefix, int d) {
    for (const char* n : {"q", "k", "v", "o"}) dense(cat(prefix, n), d, d);
  }
  void mlp(const std::string& prefix, int d, int hidden) {
    dense(cat(prefix, "fc1"), d, hidden);
    dense(cat(prefix, "fc2"), hidden, d);
  }
};

}  // namespace

template <typename T>
nn::ParamSet<T> Backbone<T>::layout(const BackboneConfig& cfg) {
  cfg.validate();
  nn::ParamSet<T> ps;
  LayoutBuilder<T> b{ps};
  const int W = cfg.encoder_width, D = cfg.embed_channels, P = cfg.patch_size, G = cfg.embed_grid;
  const bool adapters = cfg.adapter_mode == AdapterMode::adapters;

  b.frozen = adapters;
  b.dense("enc.patch", P * P, W);
  b.add("enc.pos", {G * G, W});
  for (int i = 0; i < cfg.encoder_depth; ++i) {
    const std::string blk = "enc.block" + std::to_string(i);
    b.frozen = adapters;
    b.norm(cat(blk, "ln1"), W);
    b.attention(cat(blk, "attn"), W);
    b.norm(cat(blk, "ln2"), W);
    b.mlp(cat(blk, "mlp"), W, cfg.mlp_ratio * W);
    if (adapters) {
      b.frozen = false;
      for (const char* a : {"adapt_attn", "adapt_mlp"}) {
        b.dense(cat(cat(blk, a), "down"), W, cfg.adapter_bottleneck_dim);
        b.dense(cat(cat(blk, a), "up"), cfg.adapter_bottleneck_dim, W);
      }
    }
  }
  b.frozen = adapters;
  b.dense("enc.neck", W, D);
  b.norm("enc.neck_ln", D);
  b.frozen = false;

  for (Marker m : cfg.prompt_markers) {
    const std::string pre = "prompt." + std::string(to_string(m));
    b.dense(cat(pre, "fc1"), 1, cfg.prompt_hidden);
    b.dense(cat(pre, "fc2"), cfg.prompt_hidden, D);
    b.add(cat(pre, "identity"), {D});
  }

  auto decoder = [&](const std::string& pre) {
    b.add(cat(pre, "token"), {1, D});
    for (int i = 0; i < cfg.decoder_depth; ++i) {
      const std::string l = pre + ".layer" + std::to_string(i);
      b.attention(cat(l, "self_attn"), D);
      b.norm(cat(l, "norm1"), D);
      b.attention(cat(l, "t2i"), D);
      b.norm(cat(l, "norm2"), D);
      b.mlp(cat(l, "mlp"), D, cfg.mlp_ratio * D);
      b.norm(cat(l, "norm3"), D);
      b.attention(cat(l, "i2t"), D);
      b.norm(cat(l, "norm4"), D);
    }
    b.attention(cat(pre, "final_attn"), D);
    b.norm(cat(pre, "norm_final"), D);
  };

  if (has_mask_head(cfg.head_mode)) {
    decoder("mask_dec");
    b.add("mask.up1.w", {D, 4 * (D / 4)});
    b.add("mask.up1.b", {D / 4});
    b.norm("mask.up1_ln", D / 4);
    b.add("mask.up2.w", {D / 4, 4 * (D / 8)});
    b.add("mask.up2.b", {D / 8});
    b.dense("mask.hyper.fc1", D, D);
    b.dense("mask.hyper.fc2", D, D / 8);
    b.add("mask.logit_bias", {1});
  }
  if (has_class_head(cfg.head_mode)) {
    decoder("risk_dec");
    b.dense("risk.out", D, 1);
  }
  return ps;
}

namespace {

template <typename T>
void initialise(nn::ParamSet<T>& ps, std::uint64_t seed) {
  for (auto& e : ps.entries()) {
    auto& data = e.value.data;
    const std::string& n = e.name;
    if (ends_with(n, ".g")) {
      std::fill(data.begin(), data.end(), T(1));
      continue;
    }
    if (ends_with(n, ".b") || ends_with(n, "logit_bias") || ends_with(n, ".up.w")) {
      std::fill(data.begin(), data.end(), T(0));  // adapters start as identity
      continue;
    }
    double std = 0.02;
    if (ends_with(n, ".w")) std = 1.0 / std::sqrt(static_cast<double>(e.value.shape.front()));
    std::mt19937_64 rng(derive_seed({seed, hash_string(n)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : data) {
      double z;
      do z = normal(rng);
      while (std::abs(z) > 2.0);
      v = static_cast<T>(z * std);
    }
  }
}

template <typename T>
nn::Tensor<T> sinusoid_pe(int grid, int dim) {
  nn::Tensor<T> pe({grid * grid, dim});
  const int q = dim / 4;
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      T* row = pe.data.data() + static_cast<std::size_t>(y * grid + x) * dim;
      for (int k = 0; k < q; ++k) {
        const double f = std::pow(10000.0, -static_cast<double>(k) / q);
        row[k] = static_cast<T>(std::sin(x * f));
        row[q + k] = static_cast<T>(std::cos(x * f));
        row[2 * q + k] = static_cast<T>(std::sin(y * f));
        row[3 * q + k] = static_cast<T>(std::cos(y * f));
      }
    }
  return pe;
}

}  // namespace

template <typename T>
Backbone<T>::Backbone(BackboneConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(layout(cfg_)), image_pe_(sinusoid_pe<T>(cfg_.embed_grid, cfg_.embed_channels)) {
  initialise(params_, seed);
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig cfg, nn::ParamSet<T> params)
    : cfg_(std::move(cfg)), params_(std::move(params)), image_pe_(sinusoid_pe<T>(cfg_.embed_grid, cfg_.embed_channels)) {
  const nn::ParamSet<T> want = layout(cfg_);
  if (want.size() != params_.size())
    throw CheckpointError("parameter count " + std::to_string(params_.size()) + " does not match config (" +
                          std::to_string(want.size()) + ")");
  for (int i = 0; i < want.size(); ++i) {
    if (want[i].name != params_[i].name)
      throw CheckpointError("parameter " + std::to_string(i) + " is '" + params_[i].name + "', expected '" +
                            want[i].name + "'");
    if (want[i].value.shape != params_[i].value.shape)
      throw CheckpointError("parameter '" + want[i].name + "' has shape " + nn::shape_string(params_[i].value.shape) +
                            ", expected " + nn::shape_string(want[i].value.shape));
    params_[i].trainable = want[i].trainable;
  }
}

// ---------------------------------------------------------------------------
// Building blocks

template <typename T>
typename Backbone<T>::Var Backbone<T>::dense(Graph& g, const std::string& prefix, Var x) const {
  return nn::linear(x, p(g, cat(prefix, "w")), p(g, cat(prefix, "b")));
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::norm(Graph& g, const std::string& prefix, Var x) const {
  return nn::layer_norm(x, p(g, cat(prefix, "g")), p(g, cat(prefix, "b")));
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::mlp(Graph& g, const std::string& prefix, Var x) const {
  return dense(g, cat(prefix, "fc2"), nn::gelu(dense(g, cat(prefix, "fc1"), x)));
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::adapter(Graph& g, const std::string& prefix, Var x) const {
  if (cfg_.adapter_mode != AdapterMode::adapters) return x;
  return nn::add(x, dense(g, cat(prefix, "up"), nn::gelu(dense(g, cat(prefix, "down"), x))));
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::attention_block(Graph& g, const std::string& prefix, Var q, Var k, Var v,
                                                       int heads) const {
  Var a = nn::attention(dense(g, cat(prefix, "q"), q), dense(g, cat(prefix, "k"), k), dense(g, cat(prefix, "v"), v),
                        heads);
  return dense(g, cat(prefix, "o"), a);
}

// ---------------------------------------------------------------------------
// Encoders

template <typename T>
typename Backbone<T>::Var Backbone<T>::encode_image(Graph& g, const Image& image) const {
  const int S = cfg_.image_size, P = cfg_.patch_size, G = cfg_.embed_grid;
  if (image.rows != S || image.cols != S)
    throw InvalidInput("encode_image: expected a " + std::to_string(S) + "x" + std::to_string(S) + " image, got " +
                       std::to_string(image.rows) + "x" + std::to_string(image.cols));
  nn::Tensor<T> patches({G * G, P * P});
  for (int gy = 0; gy < G; ++gy)
    for (int gx = 0; gx < G; ++gx) {
      T* row = patches.data.data() + static_cast<std::size_t>(gy * G + gx) * P * P;
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px) row[py * P + px] = static_cast<T>(image(gy * P + py, gx * P + px));
    }
  Var x = dense(g, "enc.patch", g.constant(std::move(patches)));
  x = nn::add(x, p(g, "enc.pos"));
  for (int i = 0; i < cfg_.encoder_depth; ++i) {
    const std::string blk = "enc.block" + std::to_string(i);
    Var h = norm(g, cat(blk, "ln1"), x);
    h = attention_block(g, cat(blk, "attn"), h, h, h, cfg_.encoder_heads);
    x = nn::add(x, adapter(g, cat(blk, "adapt_attn"), h));
    h = mlp(g, cat(blk, "mlp"), norm(g, cat(blk, "ln2"), x));
    x = nn::add(x, adapter(g, cat(blk, "adapt_mlp"), h));
  }
  x = norm(g, "enc.neck_ln", dense(g, "enc.neck", x));
  return nn::reshape(x, {G, G, cfg_.embed_channels});
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::encode_prompts(Graph& g, const MarkerValues& markers) const {
  const int D = cfg_.embed_channels;
  if (cfg_.prompt_markers.empty()) return g.constant(nn::Tensor<T>({0, D}));
  std::vector<Var> rows;
  for (Marker m : cfg_.prompt_markers) {
    auto it = markers.find(m);
    if (it == markers.end() || !std::isfinite(it->second))
      throw MissingMarker("enabled marker '" + std::string(to_string(m)) + "' has no finite value");
    const std::string pre = "prompt." + std::string(to_string(m));
    Var v = g.constant(nn::Tensor<T>({1, 1}, {static_cast<T>(it->second)}));
    Var r = dense(g, cat(pre, "fc2"), nn::gelu(dense(g, cat(pre, "fc1"), v)));
    rows.push_back(nn::add(r, p(g, cat(pre, "identity"))));
  }
  return nn::concat_rows<T>(rows);
}

// ---------------------------------------------------------------------------
// Decoders

template <typename T>
typename Backbone<T>::Var Backbone<T>::decode_tokens(Graph& g, const std::string& pre, Var image_embedding, Var prompts,
                                                     Var* keys_out) const {
  const int D = cfg_.embed_channels, G = cfg_.embed_grid, H = cfg_.decoder_heads;
  const auto& es = image_embedding.shape();
  if (es.size() != 3 || es[0] != G || es[1] != G || es[2] != D)
    throw InvalidInput("decoder: image embedding has shape " + nn::shape_string(es) + ", expected " +
                       nn::shape_string({G, G, D}));
  if (prompts.value().cols() != D || prompts.shape().size() != 2)
    throw InvalidInput("decoder: prompt embedding has shape " + nn::shape_string(prompts.shape()) + ", expected {N," +
                       std::to_string(D) + "}");

  const Var parts[] = {p(g, cat(pre, "token")), prompts};
  const Var query_pe = nn::concat_rows<T>(parts);
  const Var key_pe = g.constant(image_pe_);
  Var queries = query_pe;
  Var keys = nn::reshape(image_embedding, {G * G, D});

  for (int i = 0; i < cfg_.decoder_depth; ++i) {
    const std::string l = pre + ".layer" + std::to_string(i);
    if (i == 0) {
      queries = attention_block(g, cat(l, "self_attn"), queries, queries, queries, H);
    } else {
      Var q = nn::add(queries, query_pe);
      queries = nn::add(queries, attention_block(g, cat(l, "self_attn"), q, q, queries, H));
    }
    queries = norm(g, cat(l, "norm1"), queries);

    Var q = nn::add(queries, query_pe);
    Var k = nn::add(keys, key_pe);
    queries = norm(g, cat(l, "norm2"), nn::add(queries, attention_block(g, cat(l, "t2i"), q, k, keys, H)));
    queries = norm(g, cat(l, "norm3"), nn::add(queries, mlp(g, cat(l, "mlp"), queries)));

    q = nn::add(queries, query_pe);
    k = nn::add(keys, key_pe);
    keys = norm(g, cat(l, "norm4"), nn::add(keys, attention_block(g, cat(l, "i2t"), k, q, queries, H)));
  }
  Var q = nn::add(queries, query_pe);
  Var k = nn::add(keys, key_pe);
  queries = norm(g, cat(pre, "norm_final"), nn::add(queries, attention_block(g, cat(pre, "final_attn"), q, k, keys, H)));
  if (keys_out) *keys_out = keys;
  return queries;
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::decode_heatmap(Graph& g, Var image_embedding, Var prompts,
                                                     std::span<const int> sample) const {
  if (!has_mask_head(cfg_.head_mode)) throw ConfigError("decode_heatmap: model has no mask head");
  const int D = cfg_.embed_channels, G = cfg_.embed_grid, S = cfg_.image_size;
  Var keys;
  Var tokens = decode_tokens(g, "mask_dec", image_embedding, prompts, &keys);
  Var f = nn::conv_transpose2x2(nn::reshape(keys, {G, G, D}), p(g, "mask.up1.w"), p(g, "mask.up1.b"));
  f = nn::gelu(norm(g, "mask.up1_ln", f));
  f = nn::gelu(nn::conv_transpose2x2(f, p(g, "mask.up2.w"), p(g, "mask.up2.b")));
  Var token = nn::slice_rows(tokens, 0, 1);
  Var hyper = dense(g, "mask.hyper.fc2", nn::gelu(dense(g, "mask.hyper.fc1", token)));
  Var logits = nn::add_bias(nn::matmul_nt(f, hyper), p(g, "mask.logit_bias"));
  logits = nn::reshape(logits, {4 * G, 4 * G, 1});
  if (!sample.empty())
    logits = nn::upsample_bilinear_at(logits, S, S, sample);
  else if (4 * G != S)
    logits = nn::upsample_bilinear(logits, S, S);
  return nn::sigmoid(logits);
}

template <typename T>
typename Backbone<T>::Var Backbone<T>::decode_risk(Graph& g, Var image_embedding, Var prompts) const {
  if (!has_class_head(cfg_.head_mode)) throw ConfigError("decode_risk: model has no class head");
  Var tokens = decode_tokens(g, "risk_dec", image_embedding, prompts, nullptr);
  return nn::sigmoid(dense(g, "risk.out", nn::slice_rows(tokens, 0, 1)));
}

template <typename T>
typename Backbone<T>::Outputs Backbone<T>::forward(Graph& g, const Image& image, const MarkerValues& markers,
                                                     std::span<const int> heatmap_sample) const {
  Var prompts = encode_prompts(g, markers);
  Outputs out{encode_image(g, image), std::nullopt, std::nullopt};
  if (has_mask_head(cfg_.head_mode)) out.heatmap = decode_heatmap(g, out.embedding, prompts, heatmap_sample);
  if (has_class_head(cfg_.head_mode)) out.risk = decode_risk(g, out.embedding, prompts);
  return out;
}

template <typename T>
ImageEmbedding Backbone<T>::embed(const Image& image) const {
  nn::Tape<T> tape(false);
  Graph g(tape, params_);
  const auto& v = encode_image(g, image).value();
  return ImageEmbedding{cfg_.embed_channels, cfg_.embed_grid, cfg_.embed_grid,
                        std::vector<double>(v.data.begin(), v.data.end())};
}

template <typename T>
PromptEmbedding Backbone<T>::prompts(const MarkerValues& markers) const {
  nn::Tape<T> tape(false);
  Graph g(tape, params_);
  const auto& v = encode_prompts(g, markers).value();
  return PromptEmbedding{v.rows(), cfg_.embed_channels, std::vector<double>(v.data.begin(), v.data.end())};
}

template <typename T>
ModelOutput Backbone<T>::predict(const Image& image, const MarkerValues& markers) const {
  nn::Tape<T> tape(false);
  Graph g(tape, params_);
  Outputs o = forward(g, image, markers);
  ModelOutput out;
  if (o.heatmap) {
    const auto& h = o.heatmap->value();
    Grid<double> hm(cfg_.image_size, cfg_.image_size);
    std::copy(h.data.begin(), h.data.end(), hm.data.begin());
    out.heatmap = std::move(hm);
  }
  if (o.risk) out.risk = static_cast<double>(o.risk->value().data[0]);
  return out;
}

template <typename T>
std::size_t trainable_count(const nn::ParamSet<T>& params) {
  std::size_t n = 0;
  for (const auto& e : params.entries())
    if (e.trainable) n += e.value.numel();
  return n;
}

template class Backbone<float>;
template class Backbone<double>;
template std::size_t trainable_count(const nn::ParamSet<float>&);
template std::size_t trainable_count(const nn::ParamSet<double>&);

}  // namespace pnf
