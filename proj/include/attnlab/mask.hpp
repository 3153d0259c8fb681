#pragma once

#include <string>
#include <vector>

#include "attnlab/layout.hpp"

namespace attnlab {

/// Finite stand-in for -inf in additive masks. Large enough that exp of a
/// masked logit underflows to exactly zero in both f32 and f64 softmax, while
/// staying finite so no NaNs can propagate.
inline constexpr double kNegInf = -1e9;

/// Dense masks only; guards accidental huge allocations.
inline constexpr int kMaxMaskLen = 4096;

enum class MaskPolicy { Causal, MmaPairwise, MmaGeneralized };

std::string policy_str(MaskPolicy policy);
MaskPolicy parse_policy(std::string_view s);

/// n x n additive attention mask. Every entry is exactly 0 (attention allowed)
/// or kNegInf (blocked); the diagonal is always 0, so no row is fully masked.
/// Immutable after construction.
class AttentionMask {
 public:
  AttentionMask(int n, std::vector<double> entries);

  int n() const { return n_; }
  double at(int i, int j) const { return entries_[static_cast<size_t>(i) * n_ + j]; }
  bool unlocked(int i, int j) const { return at(i, j) == 0.0; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  int n_ = 0;
  std::vector<double> entries_;
};

/// Lower-triangular zeros: position i attends to j iff j <= i.
AttentionMask build_causal(int n);

/// Causal plus an unlocked block letting every IMAGE position attend to every
/// trailing text (QUERY/CAPTION) position. Requires a layout of shape
/// [SYSTEM?, IMAGE.., QUERY/CAPTION..]; SYSTEM rows and columns stay strictly
/// causal.
AttentionMask build_mma_pairwise(const SequenceLayout& layout);

/// Generalized cross-modality unlock: position i attends to j iff j <= i or
/// phi(i) != phi(j). Applies to any layout.
AttentionMask build_mma_generalized(const SequenceLayout& layout);

AttentionMask build_policy_mask(const SequenceLayout& layout, MaskPolicy policy);

/// Additive mask row for generated token number t (0-based) after a prefill of
/// prefill_len tokens: all zeros over the prefill_len + t + 1 visible
/// positions (standard causal decoding).
std::vector<double> build_decode_row(int prefill_len, int t);

/// Square mask over prefill + n_generated positions: the prefill block follows
/// `policy`, generated rows follow the decode rule, and no prefill row sees a
/// generated column.
AttentionMask build_composite(const SequenceLayout& prefill_layout, MaskPolicy policy,
                              int n_generated);

/// Reference implementation used by the test suites: evaluates the defining
/// predicate of each policy independently for every (i, j) pair. Kept free of
/// any code shared with the builders above.
AttentionMask oracle_mask(const SequenceLayout& layout, MaskPolicy policy);

/// One line per row, '.' for 0 and '#' for kNegInf, rows joined by '\n'.
std::string render_mask(const AttentionMask& mask);

/// CSV dump `i,j,value` with value in {0, -inf}, header line included.
std::string mask_csv(const AttentionMask& mask);

}  // namespace attnlab
