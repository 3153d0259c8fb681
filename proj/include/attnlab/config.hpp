#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnlab/mask.hpp"
#include "attnlab/model.hpp"
#include "attnlab/optim.hpp"

namespace attnlab {

enum class Precision { F64, F32 };
enum class TaskKind { BlindReadout, PlainRecall };
enum class Pipeline { Conventional, Dot, SftOnly };

std::string task_kind_str(TaskKind kind);
std::string pipeline_str(Pipeline pipeline);

struct TrainConfig {
  OptKind optimizer = OptKind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;       // global-norm clip, 0 disables
  int batch_size = 32;
  double early_stop_acc = 0.0;  // stop a stage once trailing batch accuracy reaches this; 0 disables
  int min_steps = 200;          // never early-stop before this many steps
  int acc_window = 100;         // trailing window for the early-stop accuracy
  Precision precision = Precision::F64;
  int threads = 0;              // worker threads for batch gradients, 0 = auto
  std::vector<uint64_t> seeds = {1};  // model seeds for `compare` cells
  MaskPolicy policy = MaskPolicy::Causal;  // SFT-stage policy for `train`/`eval`
};

struct TaskConfig {
  TaskKind kind = TaskKind::BlindReadout;
  int k_symbols = 8;
  int train_samples = 2048;
  int eval_samples = 512;
  uint64_t data_seed = 101;
};

struct ScheduleConfig {
  Pipeline pipeline = Pipeline::Conventional;
  long long pt_steps = 1000;
  long long sft_steps = 2000;
};

/// Full run configuration, loaded from a flat key-value text file with
/// [model], [train], [task] and [schedule] sections. Every key has a default;
/// unknown keys and malformed values are diagnosed by their `[section].key`
/// path.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  TaskConfig task;
  ScheduleConfig schedule;

  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace attnlab
