#include <stdexcept>
#include <vector>

#include "attnlab/mask.hpp"

// Test oracle: every entry is decided by evaluating the defining predicate of
// the policy for that single (i, j) pair, with no vectorized shortcuts and no
// code shared with the production builders in mask.cpp.

namespace attnlab {

namespace {

bool causal_pred(int i, int j) { return j <= i; }

// Eq.-style pairwise predicate. The 1-indexed paper bounds
//   1 <= i <= |V|, |V|+1 <= j <= |V|+|T_Q|
// become half-open 0-indexed ranges offset by the SYSTEM prefix length.
struct PairwiseRegion {
  int prefix;      // system tokens, kept strictly causal
  int image_len;   // |V|
  int text_len;    // |T_Q|
};

PairwiseRegion pairwise_region(const SequenceLayout& layout) {
  PairwiseRegion r{0, 0, 0};
  size_t k = 0;
  const auto& segs = layout.segments();
  if (k < segs.size() && segs[k].role == SegmentRole::System) {
    r.prefix = segs[k].length;
    ++k;
  }
  while (k < segs.size() && segs[k].role == SegmentRole::Image) {
    r.image_len += segs[k].length;
    ++k;
  }
  while (k < segs.size() &&
         (segs[k].role == SegmentRole::Query || segs[k].role == SegmentRole::Caption)) {
    r.text_len += segs[k].length;
    ++k;
  }
  if (k != segs.size() || r.image_len == 0 || r.text_len == 0) {
    throw std::invalid_argument(
        "pairwise MMA requires [SYSTEM?, IMAGE.., QUERY/CAPTION..] with both blocks nonempty");
  }
  return r;
}

bool pairwise_pred(const PairwiseRegion& r, int i, int j) {
  if (j <= i) return true;
  const bool i_in_image = i >= r.prefix && i < r.prefix + r.image_len;
  const bool j_in_text = j >= r.prefix + r.image_len && j < r.prefix + r.image_len + r.text_len;
  return i_in_image && j_in_text;
}

bool generalized_pred(const SequenceLayout& layout, int i, int j) {
  return j <= i || !(layout.phi(i) == layout.phi(j));
}

}  // namespace

AttentionMask oracle_mask(const SequenceLayout& layout, MaskPolicy policy) {
  const int n = layout.total_len();
  PairwiseRegion region{0, 0, 0};
  if (policy == MaskPolicy::MmaPairwise) region = pairwise_region(layout);

  std::vector<double> e(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bool allowed = false;
      switch (policy) {
        case MaskPolicy::Causal: allowed = causal_pred(i, j); break;
        case MaskPolicy::MmaPairwise: allowed = pairwise_pred(region, i, j); break;
        case MaskPolicy::MmaGeneralized: allowed = generalized_pred(layout, i, j); break;
      }
      e[static_cast<size_t>(i) * n + j] = allowed ? 0.0 : kNegInf;
    }
  }
  return AttentionMask(n, std::move(e));
}

}  // namespace attnlab
