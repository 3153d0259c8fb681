#pragma once

#include <string>
#include <vector>

#include "attnlab/config.hpp"
#include "attnlab/flow.hpp"
#include "attnlab/trainer.hpp"

namespace attnlab {

struct CellResult {
  std::string row;       // causal | mma_pairwise | dot_causal
  uint64_t seed = 0;
  double accuracy = 0.0;
  double final_loss = 0.0;
  long long steps = 0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::string summary_path;
};

/// Structured key-value text for a leakage audit, shared by the `analyze`
/// subcommand and the experiment artifacts.
std::string audit_report_text(const SequenceLayout& layout, const AttentionMask& mask,
                              const std::vector<bool>& loss_mask, int depth,
                              const std::string& policy_label, const std::string& loss_label);

/// Trains one cell per (pipeline row, seed) on the configured task, evaluates
/// each with its own readout, and writes per-step metrics, rendered masks,
/// leakage audits and a summary table (text + JSON) under out_dir. The row
/// set mirrors the causal / dual-order / modality-mutual comparison.
ExperimentResult run_experiment(const RunConfig& cfg, const std::string& out_dir);

}  // namespace attnlab
