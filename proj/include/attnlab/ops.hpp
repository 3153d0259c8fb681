#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "attnlab/mask.hpp"
#include "attnlab/tensor.hpp"

// Forward/backward kernel pairs for the toy transformer. Backward kernels
// accumulate (+=) into their gradient outputs so shared parameters and
// residual paths compose without extra buffers; callers zero the buffers once
// per backward pass.

namespace attnlab {

// ---------------------------------------------------------------------------
// matmul

/// c[m x n] = a[m x k] . b[k x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions must match");
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c = Tensor<T>::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    const T* ai = a.row(i);
    T* ci = c.row(i);
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b.row(p);
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

/// da += dc . b^T, db += a^T . dc
template <typename T>
void matmul_bwd(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& dc, Tensor<T>& da,
                Tensor<T>& db) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (dc.rows() != m || dc.cols() != n || !da.same_shape(a) || !db.same_shape(b)) {
    throw std::invalid_argument("matmul_bwd: shape mismatch");
  }
  for (int i = 0; i < m; ++i) {
    const T* dci = dc.row(i);
    T* dai = da.row(i);
    for (int p = 0; p < k; ++p) {
      const T* bp = b.row(p);
      T acc = 0;
      for (int j = 0; j < n; ++j) acc += dci[j] * bp[j];
      dai[p] += acc;
    }
    const T* ai = a.row(i);
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      T* dbp = db.row(p);
      for (int j = 0; j < n; ++j) dbp[j] += av * dci[j];
    }
  }
}

// ---------------------------------------------------------------------------
// masked softmax

/// One attention row: out = softmax(scores * scale + mask_row). Masked entries
/// come out exactly 0 (their exponent underflows).
template <typename T>
void softmax_row(std::span<const T> scores, std::span<const double> mask_row, T scale,
                 std::span<T> out) {
  const size_t n = scores.size();
  if (mask_row.size() != n || out.size() != n) {
    throw std::invalid_argument("softmax_row: length mismatch");
  }
  T mx = std::numeric_limits<T>::lowest();
  for (size_t j = 0; j < n; ++j) {
    T v = scores[j] * scale + static_cast<T>(mask_row[j]);
    out[j] = v;
    if (v > mx) mx = v;
  }
  T sum = 0;
  for (size_t j = 0; j < n; ++j) {
    out[j] = std::exp(out[j] - mx);
    sum += out[j];
  }
  const T inv = T(1) / sum;
  for (size_t j = 0; j < n; ++j) out[j] *= inv;
}

/// Row-wise softmax of (scores * scale + mask). Each output row sums to 1.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const AttentionMask& mask, T scale) {
  if (scores.shape.size() != 2 || scores.rows() != scores.cols()) {
    throw std::invalid_argument("masked_softmax: scores must be square");
  }
  const int n = scores.rows();
  if (mask.n() != n) throw std::invalid_argument("masked_softmax: mask size mismatch");
  Tensor<T> probs = Tensor<T>::zeros({n, n});
  for (int i = 0; i < n; ++i) {
    std::span<const double> mrow(mask.entries().data() + static_cast<size_t>(i) * n,
                                 static_cast<size_t>(n));
    softmax_row<T>({scores.row(i), static_cast<size_t>(n)}, mrow, scale,
                   {probs.row(i), static_cast<size_t>(n)});
  }
  return probs;
}

/// dscores += scale * probs * (dprobs - rowdot(probs, dprobs)).
/// Masked positions have probs == 0, so their gradient contribution is an
/// exact zero.
template <typename T>
void masked_softmax_bwd(const Tensor<T>& probs, const Tensor<T>& dprobs, T scale,
                        Tensor<T>& dscores) {
  const int n = probs.rows();
  if (!dprobs.same_shape(probs) || !dscores.same_shape(probs)) {
    throw std::invalid_argument("masked_softmax_bwd: shape mismatch");
  }
  for (int i = 0; i < n; ++i) {
    const T* p = probs.row(i);
    const T* dp = dprobs.row(i);
    T dot = 0;
    for (int j = 0; j < n; ++j) dot += p[j] * dp[j];
    T* ds = dscores.row(i);
    for (int j = 0; j < n; ++j) ds[j] += scale * p[j] * (dp[j] - dot);
  }
}

// ---------------------------------------------------------------------------
// layer normalization

template <typename T>
struct LayerNormTrace {
  std::vector<T> mean;
  std::vector<T> rstd;
};

/// Per-row normalization with affine output: y = gain * (x - mu) / sqrt(var + eps) + bias.
template <typename T>
Tensor<T> layernorm_fwd(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                        LayerNormTrace<T>* trace) {
  if (x.shape.size() != 2 || x.cols() < 1) {
    throw std::invalid_argument("layernorm: x must be [n x d] with d >= 1");
  }
  const int n = x.rows(), d = x.cols();
  if (gain.numel() != static_cast<size_t>(d) || bias.numel() != static_cast<size_t>(d)) {
    throw std::invalid_argument("layernorm: gain/bias must have length d");
  }
  if (!(eps > T(0))) throw std::invalid_argument("layernorm: eps must be positive");
  Tensor<T> y = Tensor<T>::zeros({n, d});
  if (trace) {
    trace->mean.assign(static_cast<size_t>(n), T(0));
    trace->rstd.assign(static_cast<size_t>(n), T(0));
  }
  for (int i = 0; i < n; ++i) {
    const T* xi = x.row(i);
    T mu = 0;
    for (int j = 0; j < d; ++j) mu += xi[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (int j = 0; j < d; ++j) {
      const T c = xi[j] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T rstd = T(1) / std::sqrt(var + eps);
    T* yi = y.row(i);
    for (int j = 0; j < d; ++j) {
      yi[j] = gain.data[static_cast<size_t>(j)] * (xi[j] - mu) * rstd +
              bias.data[static_cast<size_t>(j)];
    }
    if (trace) {
      trace->mean[static_cast<size_t>(i)] = mu;
      trace->rstd[static_cast<size_t>(i)] = rstd;
    }
  }
  return y;
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  return layernorm_fwd<T>(x, gain, bias, eps, nullptr);
}

template <typename T>
void layernorm_bwd(const Tensor<T>& x, const Tensor<T>& gain, const LayerNormTrace<T>& trace,
                   const Tensor<T>& dy, Tensor<T>& dx, Tensor<T>& dgain, Tensor<T>& dbias) {
  const int n = x.rows(), d = x.cols();
  if (!dy.same_shape(x) || !dx.same_shape(x)) {
    throw std::invalid_argument("layernorm_bwd: shape mismatch");
  }
  for (int i = 0; i < n; ++i) {
    const T* xi = x.row(i);
    const T* dyi = dy.row(i);
    const T mu = trace.mean[static_cast<size_t>(i)];
    const T rstd = trace.rstd[static_cast<size_t>(i)];
    T dxhat_mean = 0;
    T dxhat_xhat_mean = 0;
    for (int j = 0; j < d; ++j) {
      const T xhat = (xi[j] - mu) * rstd;
      const T dxhat = dyi[j] * gain.data[static_cast<size_t>(j)];
      dgain.data[static_cast<size_t>(j)] += dyi[j] * xhat;
      dbias.data[static_cast<size_t>(j)] += dyi[j];
      dxhat_mean += dxhat;
      dxhat_xhat_mean += dxhat * xhat;
    }
    dxhat_mean /= static_cast<T>(d);
    dxhat_xhat_mean /= static_cast<T>(d);
    T* dxi = dx.row(i);
    for (int j = 0; j < d; ++j) {
      const T xhat = (xi[j] - mu) * rstd;
      const T dxhat = dyi[j] * gain.data[static_cast<size_t>(j)];
      dxi[j] += rstd * (dxhat - dxhat_mean - xhat * dxhat_xhat_mean);
    }
  }
}

// ---------------------------------------------------------------------------
// GELU

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y = x;
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (T& v : y.data) {
    const double u = static_cast<double>(v);
    v = static_cast<T>(0.5 * u * (1.0 + std::erf(u * inv_sqrt2)));
  }
  return y;
}

template <typename T>
void gelu_bwd(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  if (!dy.same_shape(x) || !dx.same_shape(x)) {
    throw std::invalid_argument("gelu_bwd: shape mismatch");
  }
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  for (size_t k = 0; k < x.data.size(); ++k) {
    const double u = static_cast<double>(x.data[k]);
    const double cdf = 0.5 * (1.0 + std::erf(u * inv_sqrt2));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * u * u);
    dx.data[k] += dy.data[k] * static_cast<T>(cdf + u * pdf);
  }
}

// ---------------------------------------------------------------------------
// cross entropy

/// Mean negative log-likelihood over positions with loss_mask true. Targets
/// are ignored where loss_mask is false (use -1 there by convention).
template <typename T>
double cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                     const std::vector<bool>& loss_mask) {
  const int n = logits.rows(), v = logits.cols();
  if (targets.size() != static_cast<size_t>(n) || loss_mask.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("cross_entropy: targets/loss_mask must have length n");
  }
  int active = 0;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    if (!loss_mask[static_cast<size_t>(i)]) continue;
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= v) {
      throw std::invalid_argument("cross_entropy: target out of vocabulary range");
    }
    const T* row = logits.row(i);
    T mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double sum = 0;
    for (int j = 0; j < v; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(sum) - static_cast<double>(row[t] - mx);
    ++active;
  }
  if (active == 0) throw std::invalid_argument("cross_entropy: loss mask selects no position");
  return total / active;
}

/// dlogits += (softmax(logits) - onehot(target)) / n_active on masked rows.
template <typename T>
void cross_entropy_bwd(const Tensor<T>& logits, const std::vector<int>& targets,
                       const std::vector<bool>& loss_mask, Tensor<T>& dlogits) {
  const int n = logits.rows(), v = logits.cols();
  if (!dlogits.same_shape(logits)) throw std::invalid_argument("cross_entropy_bwd: shape mismatch");
  int active = 0;
  for (int i = 0; i < n; ++i) {
    if (loss_mask[static_cast<size_t>(i)]) ++active;
  }
  if (active == 0) throw std::invalid_argument("cross_entropy: loss mask selects no position");
  const T inv = T(1) / static_cast<T>(active);
  for (int i = 0; i < n; ++i) {
    if (!loss_mask[static_cast<size_t>(i)]) continue;
    const T* row = logits.row(i);
    T* drow = dlogits.row(i);
    T mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    T sum = 0;
    for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
    const T isum = T(1) / sum;
    for (int j = 0; j < v; ++j) drow[j] += std::exp(row[j] - mx) * isum * inv;
    drow[targets[static_cast<size_t>(i)]] -= inv;
  }
}

}  // namespace attnlab
