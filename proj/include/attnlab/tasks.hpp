#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnlab/layout.hpp"
#include "attnlab/mask.hpp"

namespace attnlab {

// Token id map shared by the synthetic tasks. Text ids live in
// [0, kImageBase); image-symbol ids occupy [kImageBase, kImageBase + kImageRange).
inline constexpr int kReadoutToken = 0;  // fixed answer-slot filler, carries no task information
inline constexpr int kStopToken = 1;     // end-of-caption target
inline constexpr int kIndexBase = 2;     // query index q is encoded as kIndexBase + q
inline constexpr int kImageBase = 64;
inline constexpr int kImageRange = 64;

/// How the answer position may look back at the sequence during both training
/// and evaluation. ImageOnly restricts it to image positions plus itself, so
/// the answer is recoverable only if the image states already encode the
/// query.
enum class ReadoutMode { Normal, ImageOnly };

/// One synthetic training/eval example. `targets` holds -1 at positions where
/// no next-token target is defined; `loss_mask` is true exactly where it is.
/// `candidates` lists the token ids eligible as answers for scoring (empty
/// means the full vocabulary).
struct TaskSample {
  SequenceLayout layout;
  std::vector<int> tokens;
  std::vector<int> targets;
  std::vector<bool> loss_mask;
  std::vector<int> candidates;
};

struct Dataset {
  std::string name;
  ReadoutMode readout = ReadoutMode::Normal;
  std::vector<TaskSample> samples;
};

/// Symbol-recall probe with a blinded answer slot. Each sample shows k
/// distinct image symbols, a query index q, and asks for the symbol at
/// position q, with the answer row allowed to see only the image block.
/// Solvable iff the image representations are query-conditioned.
Dataset gen_blind_readout(int k_symbols, int n_queries, uint64_t seed);

/// Control task: identical samples, but the answer row attends normally, so
/// plain causal attention suffices.
Dataset gen_plain_recall(int k_symbols, int n_queries, uint64_t seed);

/// PT-style captioning: the caption transcribes the image symbols in order,
/// with loss on every caption position (the last one targets kStopToken).
Dataset gen_caption(int k_symbols, int n_samples, uint64_t seed);

/// Applies a segment reordering to a sample, permuting tokens, targets and
/// loss mask along with the layout.
TaskSample reorder_sample(const TaskSample& sample, const std::vector<std::string>& order);

/// Full-sequence training mask for a sample layout: the prefill block follows
/// `policy`, ANSWER rows follow the decode rule, and under ImageOnly the
/// ANSWER rows are restricted to image columns plus the diagonal.
AttentionMask training_mask(const SequenceLayout& layout, MaskPolicy policy, ReadoutMode readout);

/// Decode-row mask for the answer token after prefilling `prefill_layout`.
std::vector<double> readout_row(const SequenceLayout& prefill_layout, ReadoutMode readout);

}  // namespace attnlab
