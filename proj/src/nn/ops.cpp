// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "pnf/resample.hpp"

namespace pnf::nn {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using MVec = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

template <typename T>
CMap<T> as_mat(const Tensor<T>& t) {
  return CMap<T>(t.data.data(), t.rows(), t.cols());
}
template <typename T>
MMap<T> as_mat(Tensor<T>& t) {
  return MMap<T>(t.data.data(), t.rows(), t.cols());
}

template <typename T>
void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw InvalidInput(std::string(op) + ": " + detail);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require<T>(A.cols() == B.rows(), "matmul",
             "inner dimensions differ " + shape_string(A.shape) + " x " + shape_string(B.shape));
  Tensor<T> out({A.rows(), B.cols()});
  as_mat(out).noalias() = as_mat(A) * as_mat(B);
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    auto G = as_mat(t.grad(self));
    if (t.requires_grad(ia)) as_mat(t.grad(ia)).noalias() += G * as_mat(t.value(ib)).transpose();
    if (t.requires_grad(ib)) as_mat(t.grad(ib)).noalias() += as_mat(t.value(ia)).transpose() * G;
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require<T>(A.cols() == B.cols(), "matmul_nt",
             "inner dimensions differ " + shape_string(A.shape) + " x " + shape_string(B.shape) + "^T");
  Tensor<T> out({A.rows(), B.rows()});
  as_mat(out).noalias() = as_mat(A) * as_mat(B).transpose();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    auto G = as_mat(t.grad(self));
    if (t.requires_grad(ia)) as_mat(t.grad(ia)).noalias() += G * as_mat(t.value(ib));
    if (t.requires_grad(ib)) as_mat(t.grad(ib)).noalias() += G.transpose() * as_mat(t.value(ia));
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  const auto& X = x.value();
  const auto& W = w.value();
  const auto& B = bias.value();
  require<T>(X.cols() == W.rows() && static_cast<int>(B.numel()) == W.cols(), "linear",
             shape_string(X.shape) + " x " + shape_string(W.shape) + " + " + shape_string(B.shape));
  std::vector<int> shape = X.shape;
  shape.back() = W.cols();
  Tensor<T> out(shape);
  auto Y = as_mat(out);
  Y.noalias() = as_mat(X) * as_mat(W);
  Y.rowwise() += CVec<T>(B.data.data(), W.cols());
  const int ix = x.id, iw = w.id, ib = bias.id;
  return x.tape->record(std::move(out), {ix, iw, ib}, [ix, iw, ib](Tape<T>& t, int self) {
    auto G = as_mat(t.grad(self));
    if (t.requires_grad(ix)) as_mat(t.grad(ix)).noalias() += G * as_mat(t.value(iw)).transpose();
    if (t.requires_grad(iw)) as_mat(t.grad(iw)).noalias() += as_mat(t.value(ix)).transpose() * G;
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      MVec<T>(gb.data.data(), G.cols()) += G.colwise().sum();
    }
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const auto& X = x.value();
  const auto& B = bias.value();
  require<T>(static_cast<int>(B.numel()) == X.cols(), "add_bias",
             shape_string(X.shape) + " + " + shape_string(B.shape));
  Tensor<T> out = X;
  as_mat(out).rowwise() += CVec<T>(B.data.data(), X.cols());
  const int ix = x.id, ib = bias.id;
  return x.tape->record(std::move(out), {ix, ib}, [ix, ib](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ix)) {
      auto& gx = t.grad(ix);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      MVec<T>(gb.data.data(), g.cols()) += as_mat(g).colwise().sum();
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require<T>(A.numel() == B.numel(), "add", shape_string(A.shape) + " + " + shape_string(B.shape));
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    for (int in : {ia, ib}) {
      if (!t.requires_grad(in)) continue;
      auto& gi = t.grad(in);
      for (std::size_t i = 0; i < g.numel(); ++i) gi.data[i] += g.data[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, double s) {
  Tensor<T> out = a.value();
  const T st = static_cast<T>(s);
  for (auto& v : out.data) v *= st;
  const int ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, st](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gi = t.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) gi.data[i] += st * g.data[i];
  });
}

namespace {
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;
}  // namespace

template <typename T>
Var<T> gelu(Var<T> x) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto& X = x.value();
  const Eigen::Index n = static_cast<Eigen::Index>(X.numel());
  Eigen::Map<const Arr> v(X.data.data(), n);
  auto th = std::make_shared<Arr>((static_cast<T>(kGeluK) * (v + static_cast<T>(kGeluC) * v.cube())).tanh());
  Tensor<T> out(X.shape);
  Eigen::Map<Arr>(out.data.data(), n) = T(0.5) * v * (T(1) + *th);
  const int ix = x.id;
  if (!x.tape->grad_enabled()) th.reset();
  return x.tape->record(std::move(out), {ix}, [ix, th, n](Tape<T>& t, int self) {
    Eigen::Map<const Arr> v(t.value(ix).data.data(), n);
    Eigen::Map<const Arr> g(t.grad(self).data.data(), n);
    Eigen::Map<Arr> gx(t.grad(ix).data.data(), n);
    const Arr du = static_cast<T>(kGeluK) * (T(1) + T(3) * static_cast<T>(kGeluC) * v.square());
    gx += g * (T(0.5) * (T(1) + *th) + T(0.5) * v * (T(1) - th->square()) * du);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  const auto& X = x.value();
  Tensor<T> out(X.shape);
  for (std::size_t i = 0; i < X.numel(); ++i) out.data[i] = T(1) / (T(1) + std::exp(-X.data[i]));
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < y.numel(); ++i) gx.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps) {
  const auto& X = x.value();
  const int n = X.rows(), d = X.cols();
  require<T>(static_cast<int>(gamma.value().numel()) == d && static_cast<int>(beta.value().numel()) == d,
             "layer_norm", "affine size must match last dimension of " + shape_string(X.shape));
  auto xhat = std::make_shared<Tensor<T>>(X.shape);
  auto inv_std = std::make_shared<std::vector<T>>(n);
  Tensor<T> out(X.shape);
  const T* g = gamma.value().data.data();
  const T* b = beta.value().data.data();
  for (int r = 0; r < n; ++r) {
    const T* row = X.data.data() + static_cast<std::size_t>(r) * d;
    T mean = 0;
    for (int c = 0; c < d; ++c) mean += row[c];
    mean /= d;
    T var = 0;
    for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= d;
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[r] = is;
    T* xh = xhat->data.data() + static_cast<std::size_t>(r) * d;
    T* o = out.data.data() + static_cast<std::size_t>(r) * d;
    for (int c = 0; c < d; ++c) {
      xh[c] = (row[c] - mean) * is;
      o[c] = g[c] * xh[c] + b[c];
    }
  }
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  return x.tape->record(std::move(out), {ix, ig, ib},
                        [ix, ig, ib, xhat, inv_std, n, d](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const T* gam = t.value(ig).data.data();
    if (t.requires_grad(ig) || t.requires_grad(ib)) {
      Tensor<T>* gg = t.requires_grad(ig) ? &t.grad(ig) : nullptr;
      Tensor<T>* gb = t.requires_grad(ib) ? &t.grad(ib) : nullptr;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) {
          const std::size_t i = static_cast<std::size_t>(r) * d + c;
          if (gg) gg->data[c] += G.data[i] * xhat->data[i];
          if (gb) gb->data[c] += G.data[i];
        }
    }
    if (!t.requires_grad(ix)) return;
    auto& gx = t.grad(ix);
    std::vector<T> dxh(d);
    for (int r = 0; r < n; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * d;
      T mean_d = 0, mean_dx = 0;
      for (int c = 0; c < d; ++c) {
        dxh[c] = G.data[base + c] * gam[c];
        mean_d += dxh[c];
        mean_dx += dxh[c] * xhat->data[base + c];
      }
      mean_d /= d;
      mean_dx /= d;
      const T is = (*inv_std)[r];
      for (int c = 0; c < d; ++c)
        gx.data[base + c] += is * (dxh[c] - mean_d - xhat->data[base + c] * mean_dx);
    }
  });
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, int heads) {
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& V = v.value();
  const int nq = Q.rows(), nk = K.rows(), d = Q.cols();
  require<T>(heads >= 1 && d % heads == 0, "attention", "width not divisible by heads");
  require<T>(K.cols() == d && V.cols() == d && V.rows() == nk, "attention",
             "q/k/v shapes " + shape_string(Q.shape) + " " + shape_string(K.shape) + " " +
                 shape_string(V.shape));
  const int dh = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  const bool keep = q.tape->grad_enabled();
  auto probs = std::make_shared<std::vector<RowMat<T>>>();
  if (keep) probs->resize(heads);

  Tensor<T> out({nq, d});
  auto O = as_mat(out);
  auto Qm = as_mat(Q);
  auto Km = as_mat(K);
  auto Vm = as_mat(V);
  RowMat<T> P;
  for (int h = 0; h < heads; ++h) {
    if (nk == 0) break;
    RowMat<T>& S = keep ? (*probs)[h] : P;
    S.noalias() = (Qm.middleCols(h * dh, dh) * Km.middleCols(h * dh, dh).transpose()) * sc;
    for (int i = 0; i < nq; ++i) {
      auto row = S.row(i);
      const T mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    O.middleCols(h * dh, dh).noalias() = S * Vm.middleCols(h * dh, dh);
  }
  const int iq = q.id, ik = k.id, iv = v.id;
  return q.tape->record(std::move(out), {iq, ik, iv},
                        [iq, ik, iv, heads, dh, sc, nk, probs](Tape<T>& t, int self) {
    if (nk == 0) return;
    auto G = as_mat(t.grad(self));
    auto Qm = as_mat(t.value(iq));
    auto Km = as_mat(t.value(ik));
    auto Vm = as_mat(t.value(iv));
    const bool gq = t.requires_grad(iq), gk = t.requires_grad(ik), gv = t.requires_grad(iv);
    for (int h = 0; h < heads; ++h) {
      const RowMat<T>& Pm = (*probs)[h];
      auto dO = G.middleCols(h * dh, dh);
      if (gv) as_mat(t.grad(iv)).middleCols(h * dh, dh).noalias() += Pm.transpose() * dO;
      if (!gq && !gk) continue;
      RowMat<T> dP = dO * Vm.middleCols(h * dh, dh).transpose();
      auto rowdot = (dP.array() * Pm.array()).rowwise().sum();
      RowMat<T> dS = (Pm.array() * (dP.array().colwise() - rowdot)).matrix() * sc;
      if (gq) as_mat(t.grad(iq)).middleCols(h * dh, dh).noalias() += dS * Km.middleCols(h * dh, dh);
      if (gk) as_mat(t.grad(ik)).middleCols(h * dh, dh).noalias() += dS.transpose() * Qm.middleCols(h * dh, dh);
    }
  });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  require<T>(!parts.empty(), "concat_rows", "no inputs");
  const int d = parts.front().value().cols();
  int rows = 0;
  for (const auto& p : parts) {
    require<T>(p.value().cols() == d, "concat_rows", "column counts differ");
    rows += p.value().rows();
  }
  Tensor<T> out({rows, d});
  std::vector<int> ids;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += v.numel();
    ids.push_back(p.id);
  }
  auto bw = [ids](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = t.value(id).numel();
      if (t.requires_grad(id) && n > 0) {
        auto& gi = t.grad(id);
        for (std::size_t i = 0; i < n; ++i) gi.data[i] += g.data[off + i];
      }
      off += n;
    }
  };
  return parts.front().tape->record(std::move(out), ids, bw);
}

template <typename T>
Var<T> slice_rows(Var<T> x, int begin, int count) {
  const auto& X = x.value();
  const int d = X.cols();
  require<T>(begin >= 0 && count >= 0 && begin + count <= X.rows(), "slice_rows", "range out of bounds");
  Tensor<T> out({count, d});
  std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(begin) * d, static_cast<std::ptrdiff_t>(count) * d,
              out.data.begin());
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, begin, d](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx.data[static_cast<std::size_t>(begin) * d + i] += g.data[i];
  });
}

template <typename T>
Var<T> reshape(Var<T> x, std::vector<int> shape) {
  require<T>(Tensor<T>::count(shape) == x.value().numel(), "reshape",
             shape_string(x.value().shape) + " -> " + shape_string(shape));
  Tensor<T> out(std::move(shape), x.value().data);
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
  });
}

template <typename T>
Var<T> conv_transpose2x2(Var<T> x, Var<T> w, Var<T> bias) {
  const auto& X = x.value();
  require<T>(X.shape.size() == 3, "conv_transpose2x2", "expected {H,W,C}, got " + shape_string(X.shape));
  const int H = X.shape[0], W = X.shape[1], C = X.shape[2];
  const auto& Wt = w.value();
  require<T>(Wt.rows() == C && Wt.cols() % 4 == 0, "conv_transpose2x2",
             "weight " + shape_string(Wt.shape) + " incompatible with " + shape_string(X.shape));
  const int co = Wt.cols() / 4;
  require<T>(static_cast<int>(bias.value().numel()) == co, "conv_transpose2x2", "bias size");
  RowMat<T> Y0 = CMap<T>(X.data.data(), H * W, C) * as_mat(Wt);
  Tensor<T> out({2 * H, 2 * W, co});
  const T* b = bias.value().data.data();
  const int OW = 2 * W;
  for (int h = 0; h < H; ++h)
    for (int ww = 0; ww < W; ++ww)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          T* dst = out.data.data() + (static_cast<std::size_t>(2 * h + dy) * OW + (2 * ww + dx)) * co;
          const T* src = Y0.data() + static_cast<std::size_t>(h * W + ww) * 4 * co + (dy * 2 + dx) * co;
          for (int c = 0; c < co; ++c) dst[c] = src[c] + b[c];
        }
  const int ix = x.id, iw = w.id, ib = bias.id;
  return x.tape->record(std::move(out), {ix, iw, ib}, [ix, iw, ib, H, W, C, co](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const int OW = 2 * W;
    RowMat<T> dY0(H * W, 4 * co);
    for (int h = 0; h < H; ++h)
      for (int ww = 0; ww < W; ++ww)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const T* src = G.data.data() + (static_cast<std::size_t>(2 * h + dy) * OW + (2 * ww + dx)) * co;
            T* dst = dY0.data() + static_cast<std::size_t>(h * W + ww) * 4 * co + (dy * 2 + dx) * co;
            std::copy_n(src, co, dst);
          }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      const std::size_t npix = G.numel() / co;
      for (std::size_t p = 0; p < npix; ++p)
        for (int c = 0; c < co; ++c) gb.data[c] += G.data[p * co + c];
    }
    if (t.requires_grad(iw))
      as_mat(t.grad(iw)).noalias() += CMap<T>(t.value(ix).data.data(), H * W, C).transpose() * dY0;
    if (t.requires_grad(ix))
      MMap<T>(t.grad(ix).data.data(), H * W, C).noalias() += dY0 * as_mat(t.value(iw)).transpose();
  });
}

template <typename T>
Var<T> upsample_bilinear(Var<T> x, int out_h, int out_w) {
  const auto& X = x.value();
  require<T>(X.shape.size() == 3, "upsample_bilinear", "expected {H,W,C}, got " + shape_string(X.shape));
  const int H = X.shape[0], W = X.shape[1], C = X.shape[2];
  auto rt = std::make_shared<std::vector<LinearTap>>(linear_taps(H, out_h));
  auto ct = std::make_shared<std::vector<LinearTap>>(linear_taps(W, out_w));
  Tensor<T> out({out_h, out_w, C});
  auto at = [W, C](int r, int c) { return (static_cast<std::size_t>(r) * W + c) * C; };
  for (int r = 0; r < out_h; ++r) {
    const auto& tr = (*rt)[r];
    for (int c = 0; c < out_w; ++c) {
      const auto& tc = (*ct)[c];
      const T w00 = static_cast<T>(tr.w_lo * tc.w_lo), w01 = static_cast<T>(tr.w_lo * tc.w_hi);
      const T w10 = static_cast<T>(tr.w_hi * tc.w_lo), w11 = static_cast<T>(tr.w_hi * tc.w_hi);
      T* dst = out.data.data() + (static_cast<std::size_t>(r) * out_w + c) * C;
      const T* a = X.data.data() + at(tr.lo, tc.lo);
      const T* b = X.data.data() + at(tr.lo, tc.hi);
      const T* e = X.data.data() + at(tr.hi, tc.lo);
      const T* f = X.data.data() + at(tr.hi, tc.hi);
      for (int k = 0; k < C; ++k) dst[k] = w00 * a[k] + w01 * b[k] + w10 * e[k] + w11 * f[k];
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, rt, ct, W, C, out_h, out_w](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& gx = t.grad(ix);
    auto at = [W, C](int r, int c) { return (static_cast<std::size_t>(r) * W + c) * C; };
    for (int r = 0; r < out_h; ++r) {
      const auto& tr = (*rt)[r];
      for (int c = 0; c < out_w; ++c) {
        const auto& tc = (*ct)[c];
        const T* g = G.data.data() + (static_cast<std::size_t>(r) * out_w + c) * C;
        bool zero = true;
        for (int k = 0; k < C; ++k) zero = zero && g[k] == T(0);
        if (zero) continue;
        const T w00 = static_cast<T>(tr.w_lo * tc.w_lo), w01 = static_cast<T>(tr.w_lo * tc.w_hi);
        const T w10 = static_cast<T>(tr.w_hi * tc.w_lo), w11 = static_cast<T>(tr.w_hi * tc.w_hi);
        for (int k = 0; k < C; ++k) {
          gx.data[at(tr.lo, tc.lo) + k] += w00 * g[k];
          gx.data[at(tr.lo, tc.hi) + k] += w01 * g[k];
          gx.data[at(tr.hi, tc.lo) + k] += w10 * g[k];
          gx.data[at(tr.hi, tc.hi) + k] += w11 * g[k];
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_bilinear_at(Var<T> x, int out_h, int out_w, std::span<const int> pixels) {
  const auto& X = x.value();
  require<T>(X.shape.size() == 3, "upsample_bilinear_at", "expected {H,W,C}, got " + shape_string(X.shape));
  const int H = X.shape[0], W = X.shape[1], C = X.shape[2];
  const auto rt = linear_taps(H, out_h);
  const auto ct = linear_taps(W, out_w);
  struct Tap {
    std::size_t o00, o01, o10, o11;
    T w00, w01, w10, w11;
  };
  auto taps = std::make_shared<std::vector<Tap>>();
  taps->reserve(pixels.size());
  auto at = [W, C](int r, int c) { return (static_cast<std::size_t>(r) * W + c) * C; };
  for (int p : pixels) {
    require<T>(p >= 0 && p < out_h * out_w, "upsample_bilinear_at", "pixel index out of range");
    const auto& tr = rt[static_cast<std::size_t>(p / out_w)];
    const auto& tc = ct[static_cast<std::size_t>(p % out_w)];
    taps->push_back({at(tr.lo, tc.lo), at(tr.lo, tc.hi), at(tr.hi, tc.lo), at(tr.hi, tc.hi),
                     static_cast<T>(tr.w_lo * tc.w_lo), static_cast<T>(tr.w_lo * tc.w_hi),
                     static_cast<T>(tr.w_hi * tc.w_lo), static_cast<T>(tr.w_hi * tc.w_hi)});
  }
  Tensor<T> out({static_cast<int>(pixels.size()), C});
  for (std::size_t i = 0; i < taps->size(); ++i) {
    const Tap& tp = (*taps)[i];
    T* dst = out.data.data() + i * C;
    const T* d = X.data.data();
    for (int k = 0; k < C; ++k)
      dst[k] = tp.w00 * d[tp.o00 + k] + tp.w01 * d[tp.o01 + k] + tp.w10 * d[tp.o10 + k] + tp.w11 * d[tp.o11 + k];
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, taps, C](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < taps->size(); ++i) {
      const Tap& tp = (*taps)[i];
      const T* g = G.data.data() + i * C;
      for (int k = 0; k < C; ++k) {
        gx.data[tp.o00 + k] += tp.w00 * g[k];
        gx.data[tp.o01 + k] += tp.w01 * g[k];
        gx.data[tp.o10 + k] += tp.w10 * g[k];
        gx.data[tp.o11 + k] += tp.w11 * g[k];
      }
    }
  });
}

template <typename T>
Var<T> masked_mean(Var<T> x, std::span<const int> pixels) {
  const auto& X = x.value();
  require<T>(!pixels.empty(), "masked_mean", "empty mask");
  auto idx = std::make_shared<std::vector<int>>(pixels.begin(), pixels.end());
  double acc = 0.0;
  for (int p : *idx) {
    require<T>(p >= 0 && static_cast<std::size_t>(p) < X.numel(), "masked_mean", "index out of range");
    acc += static_cast<double>(X.data[p]);
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(idx->size())));
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, idx](Tape<T>& t, int self) {
    const T g = t.grad(self).data[0] / static_cast<T>(idx->size());
    auto& gx = t.grad(ix);
    for (int p : *idx) gx.data[p] += g;
  });
}

template <typename T>
Var<T> binary_cross_entropy(Var<T> prediction, double target, double eps) {
  require<T>(prediction.value().numel() == 1, "binary_cross_entropy", "prediction must be a scalar");
  require<T>(target >= 0.0 && target <= 1.0, "binary_cross_entropy", "target outside [0,1]");
  const double raw = static_cast<double>(prediction.value().data[0]);
  const double q = std::clamp(raw, eps, 1.0 - eps);
  const bool clamped = raw < eps || raw > 1.0 - eps;
  const double loss = -target * std::log(q) - (1.0 - target) * std::log(1.0 - q);
  const double dq = clamped ? 0.0 : -target / q + (1.0 - target) / (1.0 - q);
  Tensor<T> out({1}, static_cast<T>(loss));
  const int ip = prediction.id;
  return prediction.tape->record(std::move(out), {ip}, [ip, dq](Tape<T>& t, int self) {
    t.grad(ip).data[0] += t.grad(self).data[0] * static_cast<T>(dq);
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (T v : x.value().data) acc += v;
  Tensor<T> out({1}, acc);
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, int self) {
    const T g = t.grad(self).data[0];
    for (auto& v : t.grad(ix).data) v += g;
  });
}

#define PNF_INSTANTIATE_OPS(T)                                                   \
  template Var<T> matmul(Var<T>, Var<T>);                                        \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                     \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                \
  template Var<T> add_bias(Var<T>, Var<T>);                                      \
  template Var<T> add(Var<T>, Var<T>);                                           \
  template Var<T> scale(Var<T>, double);                                         \
  template Var<T> gelu(Var<T>);                                                  \
  template Var<T> sigmoid(Var<T>);                                               \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, double);                    \
  template Var<T> attention(Var<T>, Var<T>, Var<T>, int);                        \
  template Var<T> concat_rows(std::span<const Var<T>>);                          \
  template Var<T> slice_rows(Var<T>, int, int);                                  \
  template Var<T> reshape(Var<T>, std::vector<int>);                             \
  template Var<T> conv_transpose2x2(Var<T>, Var<T>, Var<T>);                     \
  template Var<T> upsample_bilinear(Var<T>, int, int);                           \
  template Var<T> upsample_bilinear_at(Var<T>, int, int, std::span<const int>);  \
  template Var<T> masked_mean(Var<T>, std::span<const int>);                     \
  template Var<T> binary_cross_entropy(Var<T>, double, double);                  \
  template Var<T> sum(Var<T>);

PNF_INSTANTIATE_OPS(float)
PNF_INSTANTIATE_OPS(double)

}  // namespace pnf::nn
