#include "attnlab/mask.hpp"

#include <algorithm>
#include <stdexcept>

namespace attnlab {

std::string policy_str(MaskPolicy policy) {
  switch (policy) {
    case MaskPolicy::Causal: return "causal";
    case MaskPolicy::MmaPairwise: return "mma_pairwise";
    case MaskPolicy::MmaGeneralized: return "mma_generalized";
  }
  return "?";
}

MaskPolicy parse_policy(std::string_view s) {
  std::string n(s);
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (n == "causal") return MaskPolicy::Causal;
  if (n == "mma_pairwise" || n == "pairwise") return MaskPolicy::MmaPairwise;
  if (n == "mma_generalized" || n == "generalized") return MaskPolicy::MmaGeneralized;
  throw std::invalid_argument("unknown mask policy '" + n + "'");
}

AttentionMask::AttentionMask(int n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
  if (n_ < 1) throw std::invalid_argument("mask length must be >= 1");
  if (n_ > kMaxMaskLen) {
    throw std::invalid_argument("mask length " + std::to_string(n_) + " exceeds dense guard " +
                                std::to_string(kMaxMaskLen));
  }
  if (entries_.size() != static_cast<size_t>(n_) * n_) {
    throw std::invalid_argument("mask entries size does not match n*n");
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      double v = entries_[static_cast<size_t>(i) * n_ + j];
      if (v != 0.0 && v != kNegInf) {
        throw std::invalid_argument("mask entries must be exactly 0 or NEG_INF");
      }
    }
    if (entries_[static_cast<size_t>(i) * n_ + i] != 0.0) {
      throw std::invalid_argument("mask diagonal must be 0 (token must see itself)");
    }
  }
}

AttentionMask build_causal(int n) {
  if (n < 1) throw std::invalid_argument("causal mask requires n >= 1");
  std::vector<double> e(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      e[static_cast<size_t>(i) * n + j] = 0.0;
    }
  }
  return AttentionMask(n, std::move(e));
}

namespace {

struct PairwiseShape {
  int image_begin = 0, image_end = 0;  // union of IMAGE segments
  int text_begin = 0, text_end = 0;    // union of trailing QUERY/CAPTION segments
};

// [SYSTEM?, IMAGE.., QUERY/CAPTION..] with at least one IMAGE and one text
// segment; anything else is a contract violation.
PairwiseShape pairwise_shape(const SequenceLayout& layout) {
  enum { ExpectSystem, ExpectImage, InImage, InText } state = ExpectSystem;
  PairwiseShape shape;
  int pos = 0;
  for (const Segment& s : layout.segments()) {
    switch (s.role) {
      case SegmentRole::System:
        if (state != ExpectSystem) {
          throw std::invalid_argument("pairwise MMA: SYSTEM segment out of place");
        }
        state = ExpectImage;
        break;
      case SegmentRole::Image:
        if (state == ExpectSystem || state == ExpectImage) {
          shape.image_begin = pos;
          state = InImage;
        } else if (state != InImage) {
          throw std::invalid_argument("pairwise MMA: IMAGE segment after text block");
        }
        shape.image_end = pos + s.length;
        break;
      case SegmentRole::Query:
      case SegmentRole::Caption:
        if (state == InImage) {
          shape.text_begin = pos;
          state = InText;
        } else if (state != InText) {
          throw std::invalid_argument("pairwise MMA: text block must follow the IMAGE block");
        }
        shape.text_end = pos + s.length;
        break;
      case SegmentRole::Answer:
        throw std::invalid_argument("pairwise MMA applies to prefill layouts only (no ANSWER)");
    }
    pos += s.length;
  }
  if (state != InText) {
    throw std::invalid_argument(
        "pairwise MMA requires [SYSTEM?, IMAGE.., QUERY/CAPTION..] with both blocks nonempty");
  }
  return shape;
}

}  // namespace

AttentionMask build_mma_pairwise(const SequenceLayout& layout) {
  const PairwiseShape shape = pairwise_shape(layout);
  const int n = layout.total_len();
  std::vector<double> e(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      e[static_cast<size_t>(i) * n + j] = 0.0;
    }
  }
  // Unlock: image rows see the full text block.
  for (int i = shape.image_begin; i < shape.image_end; ++i) {
    for (int j = shape.text_begin; j < shape.text_end; ++j) {
      e[static_cast<size_t>(i) * n + j] = 0.0;
    }
  }
  return AttentionMask(n, std::move(e));
}

AttentionMask build_mma_generalized(const SequenceLayout& layout) {
  const int n = layout.total_len();
  // Per-position modality class ids; comparing ints instead of tags.
  std::vector<int> cls(static_cast<size_t>(n));
  std::vector<ModalityTag> distinct;
  for (int i = 0; i < n; ++i) {
    const ModalityTag& tag = layout.phi(i);
    auto it = std::find(distinct.begin(), distinct.end(), tag);
    if (it == distinct.end()) {
      distinct.push_back(tag);
      it = distinct.end() - 1;
    }
    cls[static_cast<size_t>(i)] = static_cast<int>(it - distinct.begin());
  }
  std::vector<double> e(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j <= i || cls[static_cast<size_t>(i)] != cls[static_cast<size_t>(j)]) {
        e[static_cast<size_t>(i) * n + j] = 0.0;
      }
    }
  }
  return AttentionMask(n, std::move(e));
}

AttentionMask build_policy_mask(const SequenceLayout& layout, MaskPolicy policy) {
  switch (policy) {
    case MaskPolicy::Causal: return build_causal(layout.total_len());
    case MaskPolicy::MmaPairwise: return build_mma_pairwise(layout);
    case MaskPolicy::MmaGeneralized: return build_mma_generalized(layout);
  }
  throw std::invalid_argument("unknown mask policy");
}

std::vector<double> build_decode_row(int prefill_len, int t) {
  if (prefill_len < 1) throw std::invalid_argument("decode row requires prefill_len >= 1");
  if (t < 0) throw std::invalid_argument("decode row requires t >= 0");
  return std::vector<double>(static_cast<size_t>(prefill_len) + t + 1, 0.0);
}

AttentionMask build_composite(const SequenceLayout& prefill_layout, MaskPolicy policy,
                              int n_generated) {
  if (n_generated < 0) throw std::invalid_argument("n_generated must be >= 0");
  const AttentionMask pre = build_policy_mask(prefill_layout, policy);
  const int p = pre.n();
  const int n = p + n_generated;
  if (n > kMaxMaskLen) throw std::invalid_argument("composite mask exceeds dense guard");
  std::vector<double> e(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      e[static_cast<size_t>(i) * n + j] = pre.at(i, j);
    }
  }
  for (int i = p; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      e[static_cast<size_t>(i) * n + j] = 0.0;
    }
  }
  return AttentionMask(n, std::move(e));
}

std::string render_mask(const AttentionMask& mask) {
  std::string out;
  out.reserve(static_cast<size_t>(mask.n()) * (mask.n() + 1));
  for (int i = 0; i < mask.n(); ++i) {
    if (i > 0) out += '\n';
    for (int j = 0; j < mask.n(); ++j) {
      out += mask.unlocked(i, j) ? '.' : '#';
    }
  }
  return out;
}

std::string mask_csv(const AttentionMask& mask) {
  std::string out = "i,j,value\n";
  for (int i = 0; i < mask.n(); ++i) {
    for (int j = 0; j < mask.n(); ++j) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += mask.unlocked(i, j) ? "0" : "-inf";
      out += '\n';
    }
  }
  return out;
}

}  // namespace attnlab
