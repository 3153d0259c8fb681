#include "attnlab/tasks.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace attnlab {

namespace {

void check_k(int k_symbols) {
  if (k_symbols < 2 || k_symbols > 64) {
    throw std::invalid_argument("k_symbols must lie in [2, 64]");
  }
  if (kIndexBase + k_symbols > kImageBase) {
    throw std::invalid_argument("k_symbols " + std::to_string(k_symbols) +
                                " needs more index tokens than the text id range holds (max " +
                                std::to_string(kImageBase - kIndexBase) + ")");
  }
}

// k distinct image-symbol ids, partial Fisher-Yates over the symbol range.
std::vector<int> draw_symbols(int k, std::mt19937_64& rng) {
  std::vector<int> pool(kImageRange);
  std::iota(pool.begin(), pool.end(), kImageBase);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, kImageRange - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(pick(rng))]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

Dataset gen_readout_task(const std::string& name, ReadoutMode readout, int k_symbols,
                         int n_queries, uint64_t seed) {
  check_k(k_symbols);
  if (n_queries < 1) throw std::invalid_argument("n_queries must be >= 1");
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.name = name;
  ds.readout = readout;
  ds.samples.reserve(static_cast<size_t>(n_queries));
  const SequenceLayout layout({{"img", ModalityTag::image(), SegmentRole::Image, k_symbols},
                               {"qry", ModalityTag::text(), SegmentRole::Query, 1},
                               {"ans", ModalityTag::text(), SegmentRole::Answer, 1}});
  for (int s = 0; s < n_queries; ++s) {
    TaskSample sample{layout, {}, {}, {}, {}};
    std::vector<int> symbols = draw_symbols(k_symbols, rng);
    std::uniform_int_distribution<int> pick_q(0, k_symbols - 1);
    const int q = pick_q(rng);
    sample.tokens = symbols;
    sample.tokens.push_back(kIndexBase + q);
    sample.tokens.push_back(kReadoutToken);
    sample.targets.assign(sample.tokens.size(), -1);
    sample.loss_mask.assign(sample.tokens.size(), false);
    sample.targets.back() = symbols[static_cast<size_t>(q)];
    sample.loss_mask.back() = true;
    sample.candidates = symbols;
    std::sort(sample.candidates.begin(), sample.candidates.end());
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace

Dataset gen_blind_readout(int k_symbols, int n_queries, uint64_t seed) {
  return gen_readout_task("blind_readout", ReadoutMode::ImageOnly, k_symbols, n_queries, seed);
}

Dataset gen_plain_recall(int k_symbols, int n_queries, uint64_t seed) {
  return gen_readout_task("plain_recall", ReadoutMode::Normal, k_symbols, n_queries, seed);
}

Dataset gen_caption(int k_symbols, int n_samples, uint64_t seed) {
  check_k(k_symbols);
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.name = "caption";
  ds.readout = ReadoutMode::Normal;
  const SequenceLayout layout({{"img", ModalityTag::image(), SegmentRole::Image, k_symbols},
                               {"cap", ModalityTag::text(), SegmentRole::Caption, k_symbols}});
  for (int s = 0; s < n_samples; ++s) {
    TaskSample sample{layout, {}, {}, {}, {}};
    std::vector<int> symbols = draw_symbols(k_symbols, rng);
    sample.tokens = symbols;
    sample.tokens.insert(sample.tokens.end(), symbols.begin(), symbols.end());
    const int n = static_cast<int>(sample.tokens.size());
    sample.targets.assign(static_cast<size_t>(n), -1);
    sample.loss_mask.assign(static_cast<size_t>(n), false);
    for (int p = k_symbols; p < n; ++p) {
      sample.loss_mask[static_cast<size_t>(p)] = true;
      sample.targets[static_cast<size_t>(p)] =
          p + 1 < n ? sample.tokens[static_cast<size_t>(p + 1)] : kStopToken;
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

TaskSample reorder_sample(const TaskSample& sample, const std::vector<std::string>& order) {
  SequenceLayout new_layout = sample.layout.reorder(order);
  TaskSample out{new_layout, {}, {}, {}, sample.candidates};
  const int n = sample.layout.total_len();
  out.tokens.resize(static_cast<size_t>(n));
  out.targets.resize(static_cast<size_t>(n));
  out.loss_mask.resize(static_cast<size_t>(n));
  int new_pos = 0;
  for (const Segment& seg : new_layout.segments()) {
    const auto [old_begin, old_end] = sample.layout.span(seg.id);
    for (int p = old_begin; p < old_end; ++p, ++new_pos) {
      out.tokens[static_cast<size_t>(new_pos)] = sample.tokens[static_cast<size_t>(p)];
      out.targets[static_cast<size_t>(new_pos)] = sample.targets[static_cast<size_t>(p)];
      out.loss_mask[static_cast<size_t>(new_pos)] = sample.loss_mask[static_cast<size_t>(p)];
    }
  }
  return out;
}

AttentionMask training_mask(const SequenceLayout& layout, MaskPolicy policy, ReadoutMode readout) {
  if (!layout.has_answer()) {
    return build_policy_mask(layout, policy);
  }
  const SequenceLayout prefill_layout = layout.prefill_part();
  const auto [ans_begin, ans_end] = layout.answer_span();
  AttentionMask composite = build_composite(prefill_layout, policy, ans_end - ans_begin);
  if (readout == ReadoutMode::Normal) return composite;

  const int n = composite.n();
  std::vector<double> entries = composite.entries();
  for (int i = ans_begin; i < ans_end; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool image_col = j < prefill_layout.total_len() &&
                             prefill_layout.phi(j) == ModalityTag::image();
      entries[static_cast<size_t>(i) * n + j] = (image_col || j == i) ? 0.0 : kNegInf;
    }
  }
  return AttentionMask(n, std::move(entries));
}

std::vector<double> readout_row(const SequenceLayout& prefill_layout, ReadoutMode readout) {
  const int n = prefill_layout.total_len();
  std::vector<double> row(static_cast<size_t>(n) + 1, 0.0);
  if (readout == ReadoutMode::Normal) return row;
  for (int j = 0; j < n; ++j) {
    if (!(prefill_layout.phi(j) == ModalityTag::image())) {
      row[static_cast<size_t>(j)] = kNegInf;
    }
  }
  return row;  // last entry (self) stays 0
}

}  // namespace attnlab
