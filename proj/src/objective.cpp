// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pnf::objective {

namespace {

void check_target(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(std::string(what) + ": target " + std::to_string(p) + " outside [0,1]");
}

template <typename Px>
double masked_mean(const Grid<Px>& heatmap, const Mask& mask) {
  if (heatmap.rows != mask.rows || heatmap.cols != mask.cols)
    throw InvalidInput("predicted_involvement: heatmap " + std::to_string(heatmap.rows) + "x" +
                       std::to_string(heatmap.cols) + " vs mask " + std::to_string(mask.rows) + "x" +
                       std::to_string(mask.cols));
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) {
      sum += static_cast<double>(heatmap.data[i]);
      ++n;
    }
  if (n == 0) throw InvalidInput("predicted_involvement: needle mask is empty");
  return sum / static_cast<double>(n);
}

enum class Presence { none, all };

template <typename Item, typename Has>
Presence presence(std::span<const Item> batch, Has has, const char* what) {
  std::size_t n = 0;
  for (const auto& it : batch) n += has(it) ? 1 : 0;
  if (n == 0) return Presence::none;
  if (n != batch.size()) throw InvalidInput(std::string("total_loss: ") + what + " present on only part of the batch");
  return Presence::all;
}

}  // namespace

double binary_cross_entropy(double target, double prediction, double eps) {
  check_target(target, "binary_cross_entropy");
  if (!std::isfinite(prediction)) throw InvalidInput("binary_cross_entropy: prediction is not finite");
  const double q = std::clamp(prediction, eps, 1.0 - eps);
  return -target * std::log(q) - (1.0 - target) * std::log(1.0 - q);
}

std::vector<int> mask_pixels(const Mask& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) out.push_back(static_cast<int>(i));
  return out;
}

double predicted_involvement(const Grid<double>& heatmap, const Mask& needle_mask) {
  return masked_mean(heatmap, needle_mask);
}
double predicted_involvement(const Grid<float>& heatmap, const Mask& needle_mask) {
  return masked_mean(heatmap, needle_mask);
}

double heatmap_loss(const Grid<double>& heatmap, const Mask& needle_mask, double involvement, double eps) {
  check_target(involvement, "heatmap_loss");
  return binary_cross_entropy(involvement, predicted_involvement(heatmap, needle_mask), eps);
}

double risk_loss(int label, double risk, double eps) {
  if (label != 0 && label != 1) throw InvalidInput("risk_loss: label must be 0 or 1");
  return binary_cross_entropy(label, risk, eps);
}

LossBreakdown total_loss(std::span<const LossItem> batch, const LossOptions& opt) {
  if (batch.empty()) throw InvalidInput("total_loss: empty batch");
  const auto hm = presence(batch, [](const LossItem& i) { return i.output->heatmap.has_value(); }, "heatmap");
  const auto rk = presence(batch, [](const LossItem& i) { return i.output->risk.has_value(); }, "risk");
  LossBreakdown b;
  for (const auto& it : batch) {
    if (hm == Presence::all) b.l_hmap += heatmap_loss(*it.output->heatmap, *it.needle_mask, it.involvement, opt.eps);
    if (rk == Presence::all) {
      const int y = it.labels.is_cspca ? 1 : 0;
      b.l_cspca += (y ? opt.positive_weight : 1.0) * risk_loss(y, *it.output->risk, opt.eps);
    }
  }
  const double n = static_cast<double>(batch.size());
  b.l_hmap /= n;
  b.l_cspca /= n;
  b.total = b.l_cspca + b.l_hmap;
  return b;
}

template <typename T>
nn::Var<T> total_loss(std::span<const TapeItem<T>> batch, const LossOptions& opt, LossBreakdown* breakdown) {
  if (batch.empty()) throw InvalidInput("total_loss: empty batch");
  const auto hm = presence(batch, [](const TapeItem<T>& i) { return i.heatmap.has_value(); }, "heatmap");
  const auto rk = presence(batch, [](const TapeItem<T>& i) { return i.risk.has_value(); }, "risk");
  if (hm == Presence::none && rk == Presence::none) throw InvalidInput("total_loss: batch has no outputs");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<nn::Var<T>> terms;
  LossBreakdown b;
  for (const auto& it : batch) {
    if (hm == Presence::all) {
      check_target(it.involvement, "heatmap_loss");
      if (it.mask_pixels.empty()) throw InvalidInput("predicted_involvement: needle mask is empty");
      std::vector<int> all;
      if (it.heatmap_sampled) {
        if (it.heatmap->value().numel() != it.mask_pixels.size())
          throw InvalidInput("total_loss: sampled heatmap does not match the mask");
        all.resize(it.mask_pixels.size());
        std::iota(all.begin(), all.end(), 0);
      }
      const std::span<const int> px = it.heatmap_sampled ? std::span<const int>(all) : it.mask_pixels;
      auto l = nn::binary_cross_entropy(nn::masked_mean(*it.heatmap, px), it.involvement, opt.eps);
      b.l_hmap += static_cast<double>(l.value().data[0]);
      terms.push_back(l);
    }
    if (rk == Presence::all) {
      const int y = it.labels.is_cspca ? 1 : 0;
      auto l = nn::binary_cross_entropy(*it.risk, y, opt.eps);
      if (y && opt.positive_weight != 1.0) l = nn::scale(l, opt.positive_weight);
      b.l_cspca += static_cast<double>(l.value().data[0]);
      terms.push_back(l);
    }
  }
  auto total = nn::scale(nn::sum(nn::concat_rows<T>(terms)), inv_n);
  b.l_hmap *= inv_n;
  b.l_cspca *= inv_n;
  b.total = b.l_cspca + b.l_hmap;
  if (breakdown) *breakdown = b;
  return total;
}

template nn::Var<float> total_loss(std::span<const TapeItem<float>>, const LossOptions&, LossBreakdown*);
template nn::Var<double> total_loss(std::span<const TapeItem<double>>, const LossOptions&, LossBreakdown*);

}  // namespace pnf::objective
