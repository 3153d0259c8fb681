#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "attnlab/config.hpp"
#include "attnlab/model.hpp"
#include "attnlab/schedule.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

struct StepRecord {
  long long step = 0;  // global step, 1-based
  StageKind stage = StageKind::SFT;
  int stage_index = 0;
  double loss = 0.0;
  double lr = 0.0;
  double acc = 0.0;  // batch accuracy at loss positions
};

struct RunMetrics {
  uint64_t seed = 0;
  std::vector<StepRecord> records;
  std::vector<long long> steps_per_stage;  // actual steps run (early stop may shorten)
  std::vector<std::pair<std::string, double>> final_accuracy;
};

/// Stage data: PT stages draw from `pt`, SFT stages from `sft`. A pipeline
/// without PT stages may leave `pt` empty.
struct TrainData {
  Dataset pt;
  Dataset sft;
};

struct TrainResult {
  ModelParams<double> params;
  RunMetrics metrics;
};

/// Runs the schedule stage by stage: per stage the samples are permuted into
/// the stage's segment order, PT stages always train under the causal mask,
/// and SFT stages train under `policy` (the paper-style protocol). Loss must
/// stay finite or training aborts with a numerical error naming the step.
TrainResult train(const RunConfig& cfg, const TrainSchedule& schedule, MaskPolicy policy,
                  const TrainData& data);

/// Greedy exact-match accuracy: each sample is prefilled under `policy`, the
/// answer token is decoded with the readout row, and the argmax over the
/// sample's candidate set is compared to the target.
template <typename T>
double evaluate(const ModelParams<T>& params, const Dataset& dataset, MaskPolicy policy,
                ReadoutMode readout) {
  if (dataset.samples.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  long long correct = 0;
  for (const TaskSample& sample : dataset.samples) {
    const auto [ans_begin, ans_end] = sample.layout.answer_span();
    if (ans_end - ans_begin != 1) {
      throw std::invalid_argument("evaluate: task samples must have a single-token ANSWER");
    }
    const SequenceLayout prefill_layout = sample.layout.prefill_part();
    const int n_pre = prefill_layout.total_len();
    const AttentionMask mask = build_policy_mask(prefill_layout, policy);
    auto [logits, cache] = prefill<T>(
        params, {sample.tokens.data(), static_cast<size_t>(n_pre)}, mask);
    const std::vector<double> row = readout_row(prefill_layout, readout);
    Tensor<T> out = decode_step(params, cache, sample.tokens[static_cast<size_t>(n_pre)], row);
    const int pred = argmax_token<T>({out.row(0), static_cast<size_t>(out.cols())},
                                     &sample.candidates);
    if (pred == sample.targets[static_cast<size_t>(n_pre)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.samples.size());
}

}  // namespace attnlab
