#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace attnlab {

/// Modality of a token span. OTHER carries a nonempty, lowercase name so the
/// schema stays open to modalities beyond the built-in three.
struct ModalityTag {
  enum class Kind { Text, Image, Audio, Other };

  Kind kind = Kind::Text;
  std::string name;  // nonempty iff kind == Other, stored lowercase

  static ModalityTag text() { return {Kind::Text, {}}; }
  static ModalityTag image() { return {Kind::Image, {}}; }
  static ModalityTag audio() { return {Kind::Audio, {}}; }
  static ModalityTag other(std::string_view name);

  bool operator==(const ModalityTag&) const = default;
  std::string str() const;
};

/// Parses "text" / "image" / "audio" (case-insensitive); any other identifier
/// becomes an OTHER modality with that name.
ModalityTag parse_modality(std::string_view s);

enum class SegmentRole { System, Image, Query, Caption, Answer };

std::string role_str(SegmentRole role);
SegmentRole parse_role(std::string_view s);

struct Segment {
  std::string id;
  ModalityTag modality;
  SegmentRole role;
  int length = 0;
};

/// An ordered, gap-free list of modality-tagged segments. Positions are
/// 0-indexed and contiguous; phi(i) gives the modality of the segment holding
/// position i. Immutable after construction.
class SequenceLayout {
 public:
  explicit SequenceLayout(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  int total_len() const { return total_len_; }

  /// Modality of the token at position i. Throws on out-of-range i.
  const ModalityTag& phi(int i) const;

  SegmentRole role_at(int i) const;
  int segment_index_at(int i) const;

  /// Half-open position range [begin, end) of the segment with this id.
  std::pair<int, int> span(const std::string& id) const;

  bool has_answer() const;
  /// Position range of the trailing ANSWER segment; {total_len, total_len}
  /// when absent.
  std::pair<int, int> answer_span() const;

  /// The layout without its trailing ANSWER segment (the model input part).
  SequenceLayout prefill_part() const;

  /// Permutes the non-ANSWER segments. `order` must list every non-ANSWER
  /// segment id exactly once, with SYSTEM (if present) kept first; the ANSWER
  /// segment, if any, stays pinned at the end.
  SequenceLayout reorder(const std::vector<std::string>& order) const;

  bool operator==(const SequenceLayout& rhs) const;

 private:
  std::vector<Segment> segments_;
  std::vector<int> starts_;  // starts_[k] = first position of segment k
  int total_len_ = 0;
};

enum class LayoutTemplate { IT, TI };

/// Builds the two-modality prompt layouts: IT = [SYSTEM?, IMAGE, QUERY],
/// TI = [SYSTEM?, QUERY, IMAGE]. The SYSTEM segment is omitted when
/// sys_len == 0. Segment ids are "sys", "img", "qry".
SequenceLayout build_layout(LayoutTemplate tpl, int sys_len, int v_len, int tq_len);

/// All permutations of {0, ..., n-1} in lexicographic order, for 1 <= n <= 6.
std::vector<std::vector<int>> enumerate_orders(int n);

/// Text form, one segment per line: `<id> <modality> <role> <length>`.
/// Blank lines and `#` comments are ignored when parsing.
SequenceLayout parse_layout(std::string_view text);
std::string format_layout(const SequenceLayout& layout);

}  // namespace attnlab
