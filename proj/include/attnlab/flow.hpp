#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "attnlab/layout.hpp"
#include "attnlab/mask.hpp"

namespace attnlab {

/// One-hop attention flow: receives[i][j] is true iff position i can read
/// position j directly (mask entry 0). Row-major n x n boolean matrix.
struct FlowGraph {
  int n = 0;
  std::vector<uint8_t> receives;

  bool at(int i, int j) const { return receives[static_cast<size_t>(i) * n + j] != 0; }
};

FlowGraph one_step_flow(const AttentionMask& mask);

/// Multi-hop reachability report for a training setup. reach[p][q] is true iff
/// position p can incorporate information originating at q within <= depth
/// attention hops; leaky lists every (loss position p, future source q > p)
/// pair that reach admits.
struct ReachabilityReport {
  int n = 0;
  int depth = 0;
  std::vector<uint8_t> reach;
  std::vector<std::pair<int, int>> leaky;

  bool reaches(int p, int q) const { return reach[static_cast<size_t>(p) * n + q] != 0; }
};

/// Reachability within <= depth hops via boolean matrix power of
/// (adjacency | identity). depth 0 gives the identity.
std::vector<uint8_t> reach(const FlowGraph& graph, int depth);

/// Same relation computed by depth-limited BFS from every node; independent
/// of the matrix-power route and cross-checked against it in the tests.
std::vector<uint8_t> reach_bfs(const FlowGraph& graph, int depth);

/// Flags every loss-bearing position that can structurally see its own future
/// through <= depth attention hops. An empty leaky list certifies
/// leakage-freedom at that depth.
ReachabilityReport audit_training(const SequenceLayout& layout, const AttentionMask& mask,
                                  const std::vector<bool>& loss_mask, int depth);

/// Smallest depth at which auditing finds a leak, scanning up to the sequence
/// length; nullopt when no depth leaks.
std::optional<int> min_leak_depth(const SequenceLayout& layout, const AttentionMask& mask,
                                  const std::vector<bool>& loss_mask);

}  // namespace attnlab
