#pragma once

#include <span>
#include <string>
#include <vector>

#include "attnlab/mask.hpp"
#include "attnlab/ops.hpp"
#include "attnlab/tensor.hpp"

namespace attnlab {

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 4;
  int d_ff = 256;
  int vocab_size = 128;
  int max_len = 64;
  uint64_t seed = 1;

  void validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
      throw std::invalid_argument("d_model must be a positive multiple of n_heads");
    }
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  }

  int head_dim() const { return d_model / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kInitStd = 0.02;
inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerParams {
  Tensor<T> ln1_g, ln1_b;
  Tensor<T> wq, wk, wv, wo;  // [d x d], row-vector convention: out = x . W
  Tensor<T> ln2_g, ln2_b;
  Tensor<T> w_in;   // [d x d_ff]
  Tensor<T> w_out;  // [d_ff x d]
};

/// All weights of the toy decoder. Image "perception" is just embedding rows
/// over a reserved symbol range of the vocabulary, so the attention policy is
/// the only thing that distinguishes modalities.
template <typename T>
struct ModelParams {
  ModelConfig cfg;
  Tensor<T> wte;          // [vocab x d]
  Tensor<T> wpe;          // [max_len x d], learned absolute positions
  std::vector<LayerParams<T>> layers;
  Tensor<T> lnf_g, lnf_b;
  Tensor<T> w_head;       // [d x vocab], untied output head

  static ModelParams init(const ModelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const T std_ = static_cast<T>(kInitStd);
    ModelParams p;
    p.cfg = cfg;
    p.wte = Tensor<T>::randn({cfg.vocab_size, cfg.d_model}, std_, rng);
    p.wpe = Tensor<T>::randn({cfg.max_len, cfg.d_model}, std_, rng);
    p.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& l : p.layers) {
      l.ln1_g = Tensor<T>::full({cfg.d_model}, T(1));
      l.ln1_b = Tensor<T>::zeros({cfg.d_model});
      l.wq = Tensor<T>::randn({cfg.d_model, cfg.d_model}, std_, rng);
      l.wk = Tensor<T>::randn({cfg.d_model, cfg.d_model}, std_, rng);
      l.wv = Tensor<T>::randn({cfg.d_model, cfg.d_model}, std_, rng);
      l.wo = Tensor<T>::randn({cfg.d_model, cfg.d_model}, std_, rng);
      l.ln2_g = Tensor<T>::full({cfg.d_model}, T(1));
      l.ln2_b = Tensor<T>::zeros({cfg.d_model});
      l.w_in = Tensor<T>::randn({cfg.d_model, cfg.d_ff}, std_, rng);
      l.w_out = Tensor<T>::randn({cfg.d_ff, cfg.d_model}, std_, rng);
    }
    p.lnf_g = Tensor<T>::full({cfg.d_model}, T(1));
    p.lnf_b = Tensor<T>::zeros({cfg.d_model});
    p.w_head = Tensor<T>::randn({cfg.d_model, cfg.vocab_size}, std_, rng);
    return p;
  }

  static ModelParams zeros_like(const ModelParams& other) {
    ModelParams p;
    p.cfg = other.cfg;
    p.wte = Tensor<T>::zeros(other.wte.shape);
    p.wpe = Tensor<T>::zeros(other.wpe.shape);
    p.layers.resize(other.layers.size());
    for (size_t k = 0; k < other.layers.size(); ++k) {
      const auto& o = other.layers[k];
      auto& l = p.layers[k];
      l.ln1_g = Tensor<T>::zeros(o.ln1_g.shape);
      l.ln1_b = Tensor<T>::zeros(o.ln1_b.shape);
      l.wq = Tensor<T>::zeros(o.wq.shape);
      l.wk = Tensor<T>::zeros(o.wk.shape);
      l.wv = Tensor<T>::zeros(o.wv.shape);
      l.wo = Tensor<T>::zeros(o.wo.shape);
      l.ln2_g = Tensor<T>::zeros(o.ln2_g.shape);
      l.ln2_b = Tensor<T>::zeros(o.ln2_b.shape);
      l.w_in = Tensor<T>::zeros(o.w_in.shape);
      l.w_out = Tensor<T>::zeros(o.w_out.shape);
    }
    p.lnf_g = Tensor<T>::zeros(other.lnf_g.shape);
    p.lnf_b = Tensor<T>::zeros(other.lnf_b.shape);
    p.w_head = Tensor<T>::zeros(other.w_head.shape);
    return p;
  }

  /// Visits every parameter tensor in declared order; this order defines the
  /// checkpoint wire format and the optimizer slot layout.
  template <typename F>
  void for_each_param(F&& fn) {
    fn("wte", wte);
    fn("wpe", wpe);
    for (size_t k = 0; k < layers.size(); ++k) {
      const std::string prefix = "layer" + std::to_string(k) + ".";
      auto& l = layers[k];
      fn(prefix + "ln1_g", l.ln1_g);
      fn(prefix + "ln1_b", l.ln1_b);
      fn(prefix + "wq", l.wq);
      fn(prefix + "wk", l.wk);
      fn(prefix + "wv", l.wv);
      fn(prefix + "wo", l.wo);
      fn(prefix + "ln2_g", l.ln2_g);
      fn(prefix + "ln2_b", l.ln2_b);
      fn(prefix + "w_in", l.w_in);
      fn(prefix + "w_out", l.w_out);
    }
    fn("lnf_g", lnf_g);
    fn("lnf_b", lnf_b);
    fn("w_head", w_head);
  }

  void zero() {
    for_each_param([](const std::string&, Tensor<T>& t) { t.fill(T(0)); });
  }
};

/// Per-layer cached keys/values for prefill-then-decode. Rows [0, len) are
/// valid; append-only, confined to one decoding session.
template <typename T>
struct KVCache {
  int len = 0;
  std::vector<Tensor<T>> k;  // per layer [max_len x d]
  std::vector<Tensor<T>> v;

  static KVCache make(const ModelConfig& cfg) {
    KVCache c;
    c.k.resize(static_cast<size_t>(cfg.n_layers));
    c.v.resize(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) {
      c.k[static_cast<size_t>(l)] = Tensor<T>::zeros({cfg.max_len, cfg.d_model});
      c.v[static_cast<size_t>(l)] = Tensor<T>::zeros({cfg.max_len, cfg.d_model});
    }
    return c;
  }
};

namespace detail {

// Attention scores of one query row against key rows [0, m) for one head,
// plain ascending-index dot products. Shared by the full forward and the
// decode path so both produce identical floating-point results.
template <typename T>
void head_scores(const T* qrow, const Tensor<T>& keys, int m, int h, int dh, T* out) {
  const int off = h * dh;
  for (int j = 0; j < m; ++j) {
    const T* kj = keys.row(j) + off;
    T acc = 0;
    for (int c = 0; c < dh; ++c) acc += qrow[off + c] * kj[c];
    out[j] = acc;
  }
}

// out[off..off+dh) = sum_j probs[j] * values[j], ascending j.
template <typename T>
void head_mix(const T* probs, const Tensor<T>& values, int m, int h, int dh, T* out) {
  const int off = h * dh;
  for (int c = 0; c < dh; ++c) {
    T acc = 0;
    for (int j = 0; j < m; ++j) acc += probs[j] * values.at(j, off + c);
    out[off + c] = acc;
  }
}

}  // namespace detail

template <typename T>
struct LayerTrace {
  Tensor<T> x_in;
  LayerNormTrace<T> ln1_t;
  Tensor<T> a;
  Tensor<T> q, k, v;
  std::vector<Tensor<T>> probs;  // per head [n x n]
  Tensor<T> att;
  Tensor<T> x_mid;
  LayerNormTrace<T> ln2_t;
  Tensor<T> b;
  Tensor<T> f1, f2;
};

template <typename T>
struct ForwardTrace {
  std::vector<LayerTrace<T>> layers;
  Tensor<T> x_final;  // last block output, before the final layernorm
  LayerNormTrace<T> lnf_t;
  Tensor<T> y;
  Tensor<T> logits;
};

template <typename T>
void check_tokens(const ModelParams<T>& p, std::span<const int> tokens, int mask_n) {
  const int n = static_cast<int>(tokens.size());
  if (n < 1) throw std::invalid_argument("forward: empty token sequence");
  if (n != mask_n) throw std::invalid_argument("forward: mask size must equal token count");
  if (n > p.cfg.max_len) throw std::invalid_argument("forward: sequence exceeds max_len");
  for (int t : tokens) {
    if (t < 0 || t >= p.cfg.vocab_size) {
      throw std::invalid_argument("forward: token id outside vocabulary");
    }
  }
}

/// Full teacher-forced forward pass under an arbitrary additive mask.
/// When `cache` is non-null it is filled with the per-layer K/V of every
/// position, computed under this same mask (the prefill contract).
template <typename T>
ForwardTrace<T> forward_trace(const ModelParams<T>& p, std::span<const int> tokens,
                              const AttentionMask& mask, KVCache<T>* cache = nullptr) {
  check_tokens(p, tokens, mask.n());
  const ModelConfig& cfg = p.cfg;
  const int n = static_cast<int>(tokens.size());
  const int d = cfg.d_model, dh = cfg.head_dim(), heads = cfg.n_heads;
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  const T eps = static_cast<T>(kLayerNormEps);

  ForwardTrace<T> tr;
  tr.layers.resize(static_cast<size_t>(cfg.n_layers));

  Tensor<T> x = Tensor<T>::zeros({n, d});
  for (int t = 0; t < n; ++t) {
    const T* emb = p.wte.row(tokens[static_cast<size_t>(t)]);
    const T* pos = p.wpe.row(t);
    T* xt = x.row(t);
    for (int c = 0; c < d; ++c) xt[c] = emb[c] + pos[c];
  }

  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerTrace<T>& lt = tr.layers[static_cast<size_t>(l)];
    const LayerParams<T>& lp = p.layers[static_cast<size_t>(l)];
    lt.x_in = x;
    lt.a = layernorm_fwd<T>(lt.x_in, lp.ln1_g, lp.ln1_b, eps, &lt.ln1_t);
    lt.q = matmul(lt.a, lp.wq);
    lt.k = matmul(lt.a, lp.wk);
    lt.v = matmul(lt.a, lp.wv);
    if (cache) {
      for (int t = 0; t < n; ++t) {
        std::copy_n(lt.k.row(t), d, cache->k[static_cast<size_t>(l)].row(t));
        std::copy_n(lt.v.row(t), d, cache->v[static_cast<size_t>(l)].row(t));
      }
    }
    lt.att = Tensor<T>::zeros({n, d});
    lt.probs.resize(static_cast<size_t>(heads));
    std::vector<T> scores(static_cast<size_t>(n));
    for (int h = 0; h < heads; ++h) {
      Tensor<T>& probs = lt.probs[static_cast<size_t>(h)];
      probs = Tensor<T>::zeros({n, n});
      for (int i = 0; i < n; ++i) {
        detail::head_scores(lt.q.row(i), lt.k, n, h, dh, scores.data());
        std::span<const double> mrow(mask.entries().data() + static_cast<size_t>(i) * n,
                                     static_cast<size_t>(n));
        softmax_row<T>({scores.data(), static_cast<size_t>(n)}, mrow, scale,
                       {probs.row(i), static_cast<size_t>(n)});
        detail::head_mix(probs.row(i), lt.v, n, h, dh, lt.att.row(i));
      }
    }
    Tensor<T> proj = matmul(lt.att, lp.wo);
    lt.x_mid = lt.x_in;
    for (size_t i = 0; i < lt.x_mid.data.size(); ++i) lt.x_mid.data[i] += proj.data[i];

    lt.b = layernorm_fwd<T>(lt.x_mid, lp.ln2_g, lp.ln2_b, eps, &lt.ln2_t);
    lt.f1 = matmul(lt.b, lp.w_in);
    lt.f2 = gelu(lt.f1);
    Tensor<T> f3 = matmul(lt.f2, lp.w_out);
    x = lt.x_mid;
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += f3.data[i];
  }

  tr.x_final = x;
  tr.y = layernorm_fwd<T>(tr.x_final, p.lnf_g, p.lnf_b, eps, &tr.lnf_t);
  tr.logits = matmul(tr.y, p.w_head);
  if (cache) cache->len = n;
  return tr;
}

/// Logits for every position under the supplied mask.
template <typename T>
Tensor<T> forward(const ModelParams<T>& p, std::span<const int> tokens,
                  const AttentionMask& mask) {
  return forward_trace(p, tokens, mask).logits;
}

/// Hidden states after each transformer block (n_layers entries); probe
/// surface for the mask-sensitivity and leakage-soundness checks.
template <typename T>
std::vector<Tensor<T>> forward_hidden_states(const ModelParams<T>& p, std::span<const int> tokens,
                                             const AttentionMask& mask) {
  ForwardTrace<T> tr = forward_trace(p, tokens, mask);
  std::vector<Tensor<T>> out;
  for (size_t l = 1; l < tr.layers.size(); ++l) out.push_back(tr.layers[l].x_in);
  out.push_back(tr.x_final);
  return out;
}

/// Forward pass that also fills a fresh KV cache (the prefill of the input
/// sequence under a possibly-MMA mask). Logits match forward() bitwise.
template <typename T>
std::pair<Tensor<T>, KVCache<T>> prefill(const ModelParams<T>& p, std::span<const int> tokens,
                                         const AttentionMask& mask) {
  KVCache<T> cache = KVCache<T>::make(p.cfg);
  ForwardTrace<T> tr = forward_trace(p, tokens, mask, &cache);
  return {std::move(tr.logits), std::move(cache)};
}

/// One decode step: the new token is appended at position cache.len, attends
/// to every cached position plus itself (all-zero decode row by default, or
/// the supplied additive row of length cache.len + 1), and the cache grows by
/// one. Returns the logits row for the new position.
template <typename T>
Tensor<T> decode_step(const ModelParams<T>& p, KVCache<T>& cache, int token,
                      std::span<const double> row_mask = {}) {
  const ModelConfig& cfg = p.cfg;
  const int m = cache.len;
  if (m < 1) throw std::invalid_argument("decode_step: cache is empty (prefill first)");
  if (m + 1 > cfg.max_len) throw std::invalid_argument("decode_step: cache would exceed max_len");
  if (token < 0 || token >= cfg.vocab_size) {
    throw std::invalid_argument("decode_step: token id outside vocabulary");
  }
  const int d = cfg.d_model, dh = cfg.head_dim(), heads = cfg.n_heads;
  const int vis = m + 1;
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  const T eps = static_cast<T>(kLayerNormEps);

  std::vector<double> default_row;
  if (row_mask.empty()) {
    default_row.assign(static_cast<size_t>(vis), 0.0);
    row_mask = default_row;
  }
  if (row_mask.size() != static_cast<size_t>(vis)) {
    throw std::invalid_argument("decode_step: row mask must cover cache length + 1");
  }

  Tensor<T> x = Tensor<T>::zeros({1, d});
  {
    const T* emb = p.wte.row(token);
    const T* pos = p.wpe.row(m);
    for (int c = 0; c < d; ++c) x.data[static_cast<size_t>(c)] = emb[c] + pos[c];
  }

  std::vector<T> scores(static_cast<size_t>(vis));
  std::vector<T> probs(static_cast<size_t>(vis));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams<T>& lp = p.layers[static_cast<size_t>(l)];
    Tensor<T> a = layernorm_fwd<T>(x, lp.ln1_g, lp.ln1_b, eps, nullptr);
    Tensor<T> q = matmul(a, lp.wq);
    Tensor<T> k = matmul(a, lp.wk);
    Tensor<T> v = matmul(a, lp.wv);
    Tensor<T>& kc = cache.k[static_cast<size_t>(l)];
    Tensor<T>& vc = cache.v[static_cast<size_t>(l)];
    std::copy_n(k.row(0), d, kc.row(m));
    std::copy_n(v.row(0), d, vc.row(m));

    Tensor<T> att = Tensor<T>::zeros({1, d});
    for (int h = 0; h < heads; ++h) {
      detail::head_scores(q.row(0), kc, vis, h, dh, scores.data());
      softmax_row<T>({scores.data(), static_cast<size_t>(vis)}, row_mask, scale,
                     {probs.data(), static_cast<size_t>(vis)});
      detail::head_mix(probs.data(), vc, vis, h, dh, att.row(0));
    }
    Tensor<T> proj = matmul(att, lp.wo);
    for (int c = 0; c < d; ++c) x.data[static_cast<size_t>(c)] += proj.data[static_cast<size_t>(c)];

    Tensor<T> b = layernorm_fwd<T>(x, lp.ln2_g, lp.ln2_b, eps, nullptr);
    Tensor<T> f2 = gelu(matmul(b, lp.w_in));
    Tensor<T> f3 = matmul(f2, lp.w_out);
    for (int c = 0; c < d; ++c) x.data[static_cast<size_t>(c)] += f3.data[static_cast<size_t>(c)];
  }
  cache.len = m + 1;
  Tensor<T> y = layernorm_fwd<T>(x, p.lnf_g, p.lnf_b, eps, nullptr);
  return matmul(y, p.w_head);
}

/// Greedy argmax with ties broken toward the lowest token index. When
/// `candidates` is non-null and nonempty, only those token ids compete.
template <typename T>
int argmax_token(std::span<const T> logits_row, const std::vector<int>* candidates = nullptr) {
  if (candidates && !candidates->empty()) {
    int best = -1;
    T best_v = 0;
    for (int c : *candidates) {
      if (c < 0 || c >= static_cast<int>(logits_row.size())) {
        throw std::invalid_argument("candidate token outside vocabulary");
      }
      if (best < 0 || logits_row[static_cast<size_t>(c)] > best_v) {
        best = c;
        best_v = logits_row[static_cast<size_t>(c)];
      }
    }
    return best;
  }
  int best = 0;
  for (int j = 1; j < static_cast<int>(logits_row.size()); ++j) {
    if (logits_row[static_cast<size_t>(j)] > logits_row[static_cast<size_t>(best)]) best = j;
  }
  return best;
}

/// Greedy decoding: prefill the layout under the policy mask, then decode up
/// to max_new tokens with standard causal rows, stopping after emitting
/// stop_token (pass a negative stop_token to disable).
template <typename T>
std::vector<int> generate(const ModelParams<T>& p, const SequenceLayout& layout,
                          std::span<const int> tokens, MaskPolicy policy, int max_new,
                          int stop_token = -1) {
  if (max_new < 1) throw std::invalid_argument("generate: max_new must be >= 1");
  if (layout.has_answer()) {
    throw std::invalid_argument("generate: layout must be a prefill layout (no ANSWER segment)");
  }
  const AttentionMask mask = build_policy_mask(layout, policy);
  auto [logits, cache] = prefill(p, tokens, mask);
  std::vector<int> out;
  int next = argmax_token<T>({logits.row(logits.rows() - 1), static_cast<size_t>(logits.cols())});
  out.push_back(next);
  while (static_cast<int>(out.size()) < max_new && next != stop_token) {
    Tensor<T> row = decode_step(p, cache, next);
    next = argmax_token<T>({row.row(0), static_cast<size_t>(row.cols())});
    out.push_back(next);
  }
  return out;
}

struct LossStats {
  double loss = 0.0;
  int correct = 0;
  int total = 0;
};

/// Teacher-forced loss with gradients accumulated into `grads` (zero it
/// first). Also reports greedy-argmax agreement at the loss positions,
/// restricted to `candidates` when given.
template <typename T>
LossStats loss_and_grad(const ModelParams<T>& p, std::span<const int> tokens,
                        const std::vector<int>& targets, const std::vector<bool>& loss_mask,
                        const AttentionMask& mask, ModelParams<T>& grads,
                        const std::vector<int>* candidates = nullptr) {
  ForwardTrace<T> tr = forward_trace(p, tokens, mask);
  const ModelConfig& cfg = p.cfg;
  const int n = static_cast<int>(tokens.size());
  const int d = cfg.d_model, dh = cfg.head_dim(), heads = cfg.n_heads;
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  LossStats stats;
  stats.loss = cross_entropy(tr.logits, targets, loss_mask);
  for (int i = 0; i < n; ++i) {
    if (!loss_mask[static_cast<size_t>(i)]) continue;
    ++stats.total;
    const int pred = argmax_token<T>({tr.logits.row(i), static_cast<size_t>(tr.logits.cols())},
                                     candidates);
    if (pred == targets[static_cast<size_t>(i)]) ++stats.correct;
  }

  Tensor<T> dlogits = Tensor<T>::zeros(tr.logits.shape);
  cross_entropy_bwd(tr.logits, targets, loss_mask, dlogits);

  Tensor<T> dy = Tensor<T>::zeros({n, d});
  matmul_bwd(tr.y, p.w_head, dlogits, dy, grads.w_head);
  Tensor<T> dx = Tensor<T>::zeros({n, d});
  layernorm_bwd(tr.x_final, p.lnf_g, tr.lnf_t, dy, dx, grads.lnf_g, grads.lnf_b);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    LayerTrace<T>& lt = tr.layers[static_cast<size_t>(l)];
    const LayerParams<T>& lp = p.layers[static_cast<size_t>(l)];
    LayerParams<T>& lg = grads.layers[static_cast<size_t>(l)];

    // x_out = x_mid + gelu(ln2(x_mid) . w_in) . w_out
    Tensor<T> df2 = Tensor<T>::zeros(lt.f2.shape);
    matmul_bwd(lt.f2, lp.w_out, dx, df2, lg.w_out);
    Tensor<T> df1 = Tensor<T>::zeros(lt.f1.shape);
    gelu_bwd(lt.f1, df2, df1);
    Tensor<T> db = Tensor<T>::zeros({n, d});
    matmul_bwd(lt.b, lp.w_in, df1, db, lg.w_in);
    Tensor<T> dx_mid = dx;
    layernorm_bwd(lt.x_mid, lp.ln2_g, lt.ln2_t, db, dx_mid, lg.ln2_g, lg.ln2_b);

    // x_mid = x_in + att . wo
    Tensor<T> datt = Tensor<T>::zeros({n, d});
    matmul_bwd(lt.att, lp.wo, dx_mid, datt, lg.wo);

    Tensor<T> dq = Tensor<T>::zeros({n, d});
    Tensor<T> dk = Tensor<T>::zeros({n, d});
    Tensor<T> dv = Tensor<T>::zeros({n, d});
    Tensor<T> dprobs = Tensor<T>::zeros({n, n});
    Tensor<T> dscores = Tensor<T>::zeros({n, n});
    for (int h = 0; h < heads; ++h) {
      const Tensor<T>& probs = lt.probs[static_cast<size_t>(h)];
      const int off = h * dh;
      dprobs.fill(T(0));
      dscores.fill(T(0));
      for (int i = 0; i < n; ++i) {
        detail::head_scores(datt.row(i), lt.v, n, h, dh, dprobs.row(i));
      }
      for (int j = 0; j < n; ++j) {
        T* dvj = dv.row(j) + off;
        for (int i = 0; i < n; ++i) {
          const T pij = probs.at(i, j);
          if (pij == T(0)) continue;
          const T* da = datt.row(i) + off;
          for (int c = 0; c < dh; ++c) dvj[c] += pij * da[c];
        }
      }
      masked_softmax_bwd(probs, dprobs, scale, dscores);
      for (int i = 0; i < n; ++i) {
        const T* dsi = dscores.row(i);
        T* dqi = dq.row(i) + off;
        for (int j = 0; j < n; ++j) {
          const T ds = dsi[j];
          if (ds == T(0)) continue;
          const T* kj = lt.k.row(j) + off;
          T* dkj = dk.row(j) + off;
          const T* qi = lt.q.row(i) + off;
          for (int c = 0; c < dh; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
    Tensor<T> da = Tensor<T>::zeros({n, d});
    matmul_bwd(lt.a, lp.wq, dq, da, lg.wq);
    matmul_bwd(lt.a, lp.wk, dk, da, lg.wk);
    matmul_bwd(lt.a, lp.wv, dv, da, lg.wv);

    Tensor<T> dx_in = dx_mid;
    layernorm_bwd(lt.x_in, lp.ln1_g, lt.ln1_t, da, dx_in, lg.ln1_g, lg.ln1_b);
    dx = std::move(dx_in);
  }

  for (int t = 0; t < n; ++t) {
    const T* dxt = dx.row(t);
    T* gte = grads.wte.row(tokens[static_cast<size_t>(t)]);
    T* gpe = grads.wpe.row(t);
    for (int c = 0; c < d; ++c) {
      gte[c] += dxt[c];
      gpe[c] += dxt[c];
    }
  }
  return stats;
}

}  // namespace attnlab
