#include "attnlab/schedule.hpp"

#include <stdexcept>

#include "attnlab/layout.hpp"

namespace attnlab {

std::string stage_kind_str(StageKind kind) { return kind == StageKind::PT ? "PT" : "SFT"; }

std::vector<std::string> resolve_modality_order(const SequenceLayout& layout,
                                                const std::vector<std::string>& modality_order) {
  std::vector<std::string> ids;
  const auto& segs = layout.segments();
  size_t begin = 0;
  if (segs.front().role == SegmentRole::System) {
    ids.push_back(segs.front().id);
    begin = 1;
  }
  std::vector<bool> placed(segs.size(), false);
  for (const std::string& modality : modality_order) {
    const ModalityTag want = parse_modality(modality);
    bool any = false;
    for (size_t k = begin; k < segs.size(); ++k) {
      if (segs[k].role == SegmentRole::Answer || placed[k]) continue;
      if (segs[k].modality == want) {
        ids.push_back(segs[k].id);
        placed[k] = true;
        any = true;
      }
    }
    if (!any) {
      throw std::invalid_argument("stage order lists modality '" + modality +
                                  "' absent from the layout");
    }
  }
  for (size_t k = begin; k < segs.size(); ++k) {
    if (segs[k].role != SegmentRole::Answer && !placed[k]) {
      throw std::invalid_argument("stage order misses modality '" + segs[k].modality.str() +
                                  "' present in the layout");
    }
  }
  return ids;
}

void TrainSchedule::validate() const {
  if (stages.empty()) throw std::invalid_argument("schedule has no stages");
  bool seen_sft = false;
  for (const Stage& s : stages) {
    if (s.steps < 1) throw std::invalid_argument("schedule stage has non-positive step count");
    if (s.order.empty()) throw std::invalid_argument("schedule stage has an empty segment order");
    if (s.kind == StageKind::SFT) {
      seen_sft = true;
    } else if (seen_sft) {
      throw std::invalid_argument("schedule stages must list all PT stages before SFT stages");
    }
  }
}

TrainSchedule make_conventional_schedule(long long pt_steps, long long sft_steps) {
  TrainSchedule s;
  s.stages = {{StageKind::PT, kOrderIT, pt_steps}, {StageKind::SFT, kOrderIT, sft_steps}};
  s.validate();
  return s;
}

TrainSchedule make_dot_schedule(long long pt_steps, long long sft_steps) {
  TrainSchedule s;
  s.stages = {{StageKind::PT, kOrderTI, pt_steps},
              {StageKind::PT, kOrderIT, pt_steps},
              {StageKind::SFT, kOrderTI, sft_steps},
              {StageKind::SFT, kOrderIT, sft_steps}};
  s.validate();
  return s;
}

TrainSchedule make_sft_only_schedule(long long sft_steps) {
  TrainSchedule s;
  s.stages = {{StageKind::SFT, kOrderIT, sft_steps}};
  s.validate();
  return s;
}

TrainSchedule make_dot_sft_only_schedule(long long sft_steps) {
  TrainSchedule s;
  s.stages = {{StageKind::SFT, kOrderTI, sft_steps}, {StageKind::SFT, kOrderIT, sft_steps}};
  s.validate();
  return s;
}

long long schedule_cost(int n_modalities, long long steps_per_stage, Pipeline pipeline) {
  if (n_modalities < 1 || n_modalities > 6) {
    throw std::invalid_argument("schedule_cost requires 1 <= n_modalities <= 6");
  }
  if (steps_per_stage < 1) throw std::invalid_argument("steps_per_stage must be >= 1");
  switch (pipeline) {
    case Pipeline::Conventional:
      return 2 * steps_per_stage;
    case Pipeline::Dot: {
      const long long orders = static_cast<long long>(enumerate_orders(n_modalities).size());
      return 2 * orders * steps_per_stage;
    }
    case Pipeline::SftOnly:
      break;
  }
  throw std::invalid_argument("schedule_cost is defined for conventional and dot pipelines");
}

}  // namespace attnlab
