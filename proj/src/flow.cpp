#include "attnlab/flow.hpp"

#include <deque>
#include <stdexcept>

namespace attnlab {

FlowGraph one_step_flow(const AttentionMask& mask) {
  FlowGraph g;
  g.n = mask.n();
  g.receives.assign(static_cast<size_t>(g.n) * g.n, 0);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      g.receives[static_cast<size_t>(i) * g.n + j] = mask.unlocked(i, j) ? 1 : 0;
    }
  }
  return g;
}

std::vector<uint8_t> reach(const FlowGraph& graph, int depth) {
  if (depth < 0) throw std::invalid_argument("reach depth must be >= 0");
  const int n = graph.n;
  const size_t nn = static_cast<size_t>(n) * n;

  // step = adjacency | identity, so paths may idle and reach stays monotone.
  std::vector<uint8_t> step = graph.receives;
  for (int i = 0; i < n; ++i) step[static_cast<size_t>(i) * n + i] = 1;

  std::vector<uint8_t> r(nn, 0);
  for (int i = 0; i < n; ++i) r[static_cast<size_t>(i) * n + i] = 1;

  std::vector<uint8_t> next(nn);
  for (int hop = 0; hop < depth; ++hop) {
    std::fill(next.begin(), next.end(), 0);
    for (int i = 0; i < n; ++i) {
      const uint8_t* ri = &r[static_cast<size_t>(i) * n];
      uint8_t* out = &next[static_cast<size_t>(i) * n];
      for (int k = 0; k < n; ++k) {
        if (!ri[k]) continue;
        const uint8_t* sk = &step[static_cast<size_t>(k) * n];
        for (int j = 0; j < n; ++j) out[j] |= sk[j];
      }
    }
    if (next == r) break;  // closure reached early
    r.swap(next);
  }
  return r;
}

std::vector<uint8_t> reach_bfs(const FlowGraph& graph, int depth) {
  if (depth < 0) throw std::invalid_argument("reach depth must be >= 0");
  const int n = graph.n;
  std::vector<uint8_t> r(static_cast<size_t>(n) * n, 0);
  std::vector<int> dist(static_cast<size_t>(n));
  for (int start = 0; start < n; ++start) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int> queue;
    dist[static_cast<size_t>(start)] = 0;
    queue.push_back(start);
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      r[static_cast<size_t>(start) * n + u] = 1;
      if (dist[static_cast<size_t>(u)] == depth) continue;
      for (int v = 0; v < n; ++v) {
        if (v != u && graph.at(u, v) && dist[static_cast<size_t>(v)] < 0) {
          dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return r;
}

ReachabilityReport audit_training(const SequenceLayout& layout, const AttentionMask& mask,
                                  const std::vector<bool>& loss_mask, int depth) {
  const int n = layout.total_len();
  if (mask.n() != n) {
    throw std::invalid_argument("mask size does not match layout length");
  }
  if (loss_mask.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("loss_mask length does not match layout length");
  }
  if (depth < 1) throw std::invalid_argument("audit depth must be >= 1");

  ReachabilityReport report;
  report.n = n;
  report.depth = depth;
  report.reach = reach(one_step_flow(mask), depth);
  for (int p = 0; p < n; ++p) {
    if (!loss_mask[static_cast<size_t>(p)]) continue;
    for (int q = p + 1; q < n; ++q) {
      if (report.reaches(p, q)) report.leaky.emplace_back(p, q);
    }
  }
  return report;
}

std::optional<int> min_leak_depth(const SequenceLayout& layout, const AttentionMask& mask,
                                  const std::vector<bool>& loss_mask) {
  for (int depth = 1; depth <= layout.total_len(); ++depth) {
    if (!audit_training(layout, mask, loss_mask, depth).leaky.empty()) return depth;
  }
  return std::nullopt;
}

}  // namespace attnlab
