// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pnf/nn/params.hpp"

namespace pnf::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

/// Adam with bias correction. Frozen (non-trainable) entries are skipped.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamOptions opt) : opt_(opt), m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(ParamSet<T>& params, const ParamSet<T>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.trainable) continue;
      const auto& g = grads[i].value.data;
      auto& m = m_[i].value.data;
      auto& v = v_[i].value.data;
      for (std::size_t j = 0; j < p.value.numel(); ++j) {
        const double gj = static_cast<double>(g[j]) + opt_.weight_decay * static_cast<double>(p.value.data[j]);
        const double mj = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * gj;
        const double vj = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + opt_.eps);
        p.value.data[j] = static_cast<T>(static_cast<double>(p.value.data[j]) - update);
      }
    }
  }

  long long steps() const { return t_; }

 private:
  AdamOptions opt_;
  ParamSet<T> m_;
  ParamSet<T> v_;
  long long t_ = 0;
};

}  // namespace pnf::nn
