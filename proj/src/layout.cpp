#include "attnlab/layout.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace attnlab {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

ModalityTag ModalityTag::other(std::string_view name) {
  std::string n = lower(name);
  if (n.empty()) {
    throw std::invalid_argument("OTHER modality requires a nonempty name");
  }
  if (n == "text" || n == "image" || n == "audio") {
    throw std::invalid_argument("OTHER modality name '" + n + "' shadows a built-in modality");
  }
  return {Kind::Other, std::move(n)};
}

std::string ModalityTag::str() const {
  switch (kind) {
    case Kind::Text: return "text";
    case Kind::Image: return "image";
    case Kind::Audio: return "audio";
    case Kind::Other: return name;
  }
  return "?";
}

ModalityTag parse_modality(std::string_view s) {
  std::string n = lower(s);
  if (n == "text") return ModalityTag::text();
  if (n == "image") return ModalityTag::image();
  if (n == "audio") return ModalityTag::audio();
  return ModalityTag::other(n);
}

std::string role_str(SegmentRole role) {
  switch (role) {
    case SegmentRole::System: return "system";
    case SegmentRole::Image: return "image";
    case SegmentRole::Query: return "query";
    case SegmentRole::Caption: return "caption";
    case SegmentRole::Answer: return "answer";
  }
  return "?";
}

SegmentRole parse_role(std::string_view s) {
  std::string n = lower(s);
  if (n == "system") return SegmentRole::System;
  if (n == "image") return SegmentRole::Image;
  if (n == "query") return SegmentRole::Query;
  if (n == "caption") return SegmentRole::Caption;
  if (n == "answer") return SegmentRole::Answer;
  throw std::invalid_argument("unknown segment role '" + n + "'");
}

SequenceLayout::SequenceLayout(std::vector<Segment> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty()) {
    throw std::invalid_argument("layout requires at least one segment");
  }
  std::set<std::string> ids;
  for (size_t k = 0; k < segments_.size(); ++k) {
    const Segment& s = segments_[k];
    if (s.id.empty()) {
      throw std::invalid_argument("segment id must be nonempty");
    }
    if (!ids.insert(s.id).second) {
      throw std::invalid_argument("duplicate segment id '" + s.id + "'");
    }
    if (s.length < 1) {
      throw std::invalid_argument("segment '" + s.id + "' has non-positive length");
    }
    if (s.modality.kind == ModalityTag::Kind::Other && s.modality.name.empty()) {
      throw std::invalid_argument("segment '" + s.id + "' has unnamed OTHER modality");
    }
    // Role/modality coupling.
    if (s.role == SegmentRole::Image && s.modality != ModalityTag::image()) {
      throw std::invalid_argument("segment '" + s.id + "': IMAGE role requires image modality");
    }
    if (s.role != SegmentRole::Image && s.modality != ModalityTag::text()) {
      throw std::invalid_argument("segment '" + s.id + "': role " + role_str(s.role) +
                                  " requires text modality");
    }
    if (s.role == SegmentRole::System && k != 0) {
      throw std::invalid_argument("SYSTEM segment must come first");
    }
    if (s.role == SegmentRole::Answer && k + 1 != segments_.size()) {
      throw std::invalid_argument("ANSWER segment must come last");
    }
    starts_.push_back(total_len_);
    total_len_ += s.length;
  }
}

const ModalityTag& SequenceLayout::phi(int i) const {
  return segments_[static_cast<size_t>(segment_index_at(i))].modality;
}

SegmentRole SequenceLayout::role_at(int i) const {
  return segments_[static_cast<size_t>(segment_index_at(i))].role;
}

int SequenceLayout::segment_index_at(int i) const {
  if (i < 0 || i >= total_len_) {
    throw std::invalid_argument("position " + std::to_string(i) + " outside [0, " +
                                std::to_string(total_len_) + ")");
  }
  auto it = std::upper_bound(starts_.begin(), starts_.end(), i);
  return static_cast<int>(it - starts_.begin()) - 1;
}

std::pair<int, int> SequenceLayout::span(const std::string& id) const {
  for (size_t k = 0; k < segments_.size(); ++k) {
    if (segments_[k].id == id) {
      return {starts_[k], starts_[k] + segments_[k].length};
    }
  }
  throw std::invalid_argument("unknown segment id '" + id + "'");
}

bool SequenceLayout::has_answer() const {
  return segments_.back().role == SegmentRole::Answer;
}

std::pair<int, int> SequenceLayout::answer_span() const {
  if (!has_answer()) return {total_len_, total_len_};
  return {starts_.back(), total_len_};
}

SequenceLayout SequenceLayout::prefill_part() const {
  if (!has_answer()) return *this;
  if (segments_.size() == 1) {
    throw std::invalid_argument("layout with only an ANSWER segment has no prefill part");
  }
  return SequenceLayout(std::vector<Segment>(segments_.begin(), segments_.end() - 1));
}

SequenceLayout SequenceLayout::reorder(const std::vector<std::string>& order) const {
  std::vector<Segment> body(segments_.begin(), segments_.end() - (has_answer() ? 1 : 0));
  if (order.size() != body.size()) {
    throw std::invalid_argument("order must list every non-ANSWER segment exactly once");
  }
  std::vector<Segment> permuted;
  std::set<std::string> seen;
  for (const std::string& id : order) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument("order repeats segment id '" + id + "'");
    }
    auto it = std::find_if(body.begin(), body.end(),
                           [&](const Segment& s) { return s.id == id; });
    if (it == body.end()) {
      throw std::invalid_argument("order references unknown segment id '" + id + "'");
    }
    permuted.push_back(*it);
  }
  if (!body.empty() && body.front().role == SegmentRole::System &&
      permuted.front().id != body.front().id) {
    throw std::invalid_argument("SYSTEM segment may not be displaced from the front");
  }
  if (has_answer()) permuted.push_back(segments_.back());
  return SequenceLayout(std::move(permuted));
}

bool SequenceLayout::operator==(const SequenceLayout& rhs) const {
  if (segments_.size() != rhs.segments_.size()) return false;
  for (size_t k = 0; k < segments_.size(); ++k) {
    const Segment& a = segments_[k];
    const Segment& b = rhs.segments_[k];
    if (a.id != b.id || a.modality != b.modality || a.role != b.role || a.length != b.length) {
      return false;
    }
  }
  return true;
}

SequenceLayout build_layout(LayoutTemplate tpl, int sys_len, int v_len, int tq_len) {
  if (v_len < 1) throw std::invalid_argument("v_len must be >= 1");
  if (tq_len < 1) throw std::invalid_argument("tq_len must be >= 1");
  if (sys_len < 0) throw std::invalid_argument("sys_len must be >= 0");
  std::vector<Segment> segs;
  if (sys_len > 0) {
    segs.push_back({"sys", ModalityTag::text(), SegmentRole::System, sys_len});
  }
  Segment img{"img", ModalityTag::image(), SegmentRole::Image, v_len};
  Segment qry{"qry", ModalityTag::text(), SegmentRole::Query, tq_len};
  if (tpl == LayoutTemplate::IT) {
    segs.push_back(img);
    segs.push_back(qry);
  } else {
    segs.push_back(qry);
    segs.push_back(img);
  }
  return SequenceLayout(std::move(segs));
}

std::vector<std::vector<int>> enumerate_orders(int n) {
  if (n < 1 || n > 6) {
    throw std::invalid_argument("enumerate_orders requires 1 <= n <= 6, got " + std::to_string(n));
  }
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

SequenceLayout parse_layout(std::string_view text) {
  std::vector<Segment> segs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ls(line);
    std::string id, modality, role;
    long long length = 0;
    if (!(ls >> id)) continue;  // blank line
    if (!(ls >> modality >> role >> length)) {
      throw std::invalid_argument("layout line " + std::to_string(lineno) +
                                  ": expected `<id> <modality> <role> <length>`");
    }
    std::string extra;
    if (ls >> extra) {
      throw std::invalid_argument("layout line " + std::to_string(lineno) +
                                  ": trailing token '" + extra + "'");
    }
    if (length < 1 || length > 1 << 20) {
      throw std::invalid_argument("layout line " + std::to_string(lineno) + ": bad length");
    }
    segs.push_back({id, parse_modality(modality), parse_role(role), static_cast<int>(length)});
  }
  return SequenceLayout(std::move(segs));
}

std::string format_layout(const SequenceLayout& layout) {
  std::string out;
  for (const Segment& s : layout.segments()) {
    out += s.id;
    out += ' ';
    out += s.modality.str();
    out += ' ';
    out += role_str(s.role);
    out += ' ';
    out += std::to_string(s.length);
    out += '\n';
  }
  return out;
}

}  // namespace attnlab
