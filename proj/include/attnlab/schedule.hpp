#pragma once

#include <string>
#include <vector>

#include "attnlab/config.hpp"

namespace attnlab {

enum class StageKind { PT, SFT };

std::string stage_kind_str(StageKind kind);

/// One training stage: which objective style it is, the modality order the
/// inputs are permuted into, and how many optimizer steps it runs.
struct Stage {
  StageKind kind = StageKind::SFT;
  std::vector<std::string> order;  // modality names, e.g. {"image", "text"}
  long long steps = 0;
};

struct TrainSchedule {
  std::vector<Stage> stages;
  void validate() const;
};

/// The two-modality orders of the paper's pipelines.
inline const std::vector<std::string> kOrderIT = {"image", "text"};
inline const std::vector<std::string> kOrderTI = {"text", "image"};

/// Maps a modality order onto a layout's segment ids: SYSTEM (if present)
/// stays first, then the non-ANSWER segments grouped by modality in the given
/// order, keeping their relative order within each group. Every non-system
/// modality of the layout must appear in the order exactly once.
std::vector<std::string> resolve_modality_order(const SequenceLayout& layout,
                                                const std::vector<std::string>& modality_order);

/// Single image-then-text pass per stage: [(PT, I&T), (SFT, I&T)].
TrainSchedule make_conventional_schedule(long long pt_steps, long long sft_steps);

/// Dual-order training: each stage runs text-then-image first, then
/// image-then-text, so training ends aligned with the inference order:
/// [(PT, T&I), (PT, I&T), (SFT, T&I), (SFT, I&T)].
TrainSchedule make_dot_schedule(long long pt_steps, long long sft_steps);

TrainSchedule make_sft_only_schedule(long long sft_steps);
/// SFT-only dual order: [(SFT, T&I), (SFT, I&T)].
TrainSchedule make_dot_sft_only_schedule(long long sft_steps);

/// Total optimizer steps of a pipeline over n modalities: conventional runs
/// one PT plus one SFT pass (2 * steps), dual-order training runs every
/// modality permutation in both stages (2 * n! * steps).
long long schedule_cost(int n_modalities, long long steps_per_stage, Pipeline pipeline);

}  // namespace attnlab
