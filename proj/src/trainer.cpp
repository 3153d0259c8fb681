#include "attnlab/trainer.hpp"

#include <cmath>
#include <deque>
#include <thread>

#include "attnlab/errors.hpp"
#include "attnlab/optim.hpp"

namespace attnlab {

namespace {

uint64_t stage_seed(uint64_t base, int stage_index) {
  uint64_t x = base + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(stage_index + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  return x;
}

template <typename T>
std::vector<Tensor<T>*> param_list(ModelParams<T>& p) {
  std::vector<Tensor<T>*> out;
  p.for_each_param([&out](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename T>
ModelParams<double> widen(ModelParams<T>& p) {
  ModelParams<double> out = ModelParams<double>::init(p.cfg);
  std::vector<Tensor<double>*> dst = param_list(out);
  std::vector<Tensor<T>*> src = param_list(p);
  for (size_t k = 0; k < src.size(); ++k) {
    for (size_t i = 0; i < src[k]->data.size(); ++i) {
      dst[k]->data[i] = static_cast<double>(src[k]->data[i]);
    }
  }
  return out;
}

template <typename T>
TrainResult train_impl(const RunConfig& cfg, const TrainSchedule& schedule, MaskPolicy policy,
                       const TrainData& data) {
  schedule.validate();
  cfg.validate();

  ModelParams<T> params = ModelParams<T>::init(cfg.model);
  ModelParams<T> grads = ModelParams<T>::zeros_like(params);
  std::vector<Tensor<T>*> plist = param_list(params);
  std::vector<const Tensor<T>*> glist;
  grads.for_each_param([&glist](const std::string&, Tensor<T>& t) { glist.push_back(&t); });

  OptimConfig ocfg;
  ocfg.kind = cfg.train.optimizer;
  ocfg.lr = cfg.train.lr;
  ocfg.beta1 = cfg.train.beta1;
  ocfg.beta2 = cfg.train.beta2;
  ocfg.eps = cfg.train.eps;
  ocfg.weight_decay = cfg.train.weight_decay;
  OptimState<T> ostate;

  const int batch = cfg.train.batch_size;
  int n_threads = cfg.train.threads > 0
                      ? cfg.train.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, batch));

  // One gradient buffer per batch slot, reduced in slot order, so results do
  // not depend on the worker thread count.
  std::vector<ModelParams<T>> slot_grads;
  slot_grads.reserve(static_cast<size_t>(batch));
  for (int s = 0; s < batch; ++s) slot_grads.push_back(ModelParams<T>::zeros_like(params));
  std::vector<double> slot_loss(static_cast<size_t>(batch));
  std::vector<int> slot_correct(static_cast<size_t>(batch));
  std::vector<int> slot_total(static_cast<size_t>(batch));

  RunMetrics metrics;
  metrics.seed = cfg.model.seed;
  long long global_step = 0;

  for (size_t stage_index = 0; stage_index < schedule.stages.size(); ++stage_index) {
    const Stage& stage = schedule.stages[stage_index];
    const Dataset& base = stage.kind == StageKind::PT ? data.pt : data.sft;
    if (base.samples.empty()) {
      throw std::invalid_argument("schedule stage " + std::to_string(stage_index) + " (" +
                                  stage_kind_str(stage.kind) + ") has no dataset");
    }
    const MaskPolicy stage_policy = stage.kind == StageKind::SFT ? policy : MaskPolicy::Causal;

    const std::vector<std::string> id_order =
        resolve_modality_order(base.samples.front().layout, stage.order);
    std::vector<TaskSample> samples;
    samples.reserve(base.samples.size());
    for (const TaskSample& s : base.samples) samples.push_back(reorder_sample(s, id_order));
    // All samples of a task share one layout shape; one mask serves the stage.
    const AttentionMask mask = training_mask(samples.front().layout, stage_policy, base.readout);
    for (const TaskSample& s : samples) {
      if (!(s.layout == samples.front().layout)) {
        throw std::invalid_argument("stage dataset mixes layout shapes");
      }
    }

    std::mt19937_64 rng(stage_seed(cfg.model.seed, static_cast<int>(stage_index)));
    std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);

    std::deque<double> acc_window;
    double acc_window_sum = 0.0;
    long long steps_run = 0;

    for (long long step = 1; step <= stage.steps; ++step) {
      std::vector<size_t> batch_idx(static_cast<size_t>(batch));
      for (int s = 0; s < batch; ++s) batch_idx[static_cast<size_t>(s)] = pick(rng);

      auto worker = [&](int tid) {
        for (int s = tid; s < batch; s += n_threads) {
          const TaskSample& sample = samples[batch_idx[static_cast<size_t>(s)]];
          slot_grads[static_cast<size_t>(s)].zero();
          const LossStats stats = loss_and_grad<T>(
              params, {sample.tokens.data(), sample.tokens.size()}, sample.targets,
              sample.loss_mask, mask, slot_grads[static_cast<size_t>(s)],
              sample.candidates.empty() ? nullptr : &sample.candidates);
          slot_loss[static_cast<size_t>(s)] = stats.loss;
          slot_correct[static_cast<size_t>(s)] = stats.correct;
          slot_total[static_cast<size_t>(s)] = stats.total;
        }
      };
      if (n_threads == 1) {
        worker(0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
      }

      grads.zero();
      double loss = 0.0;
      long long correct = 0, total = 0;
      const T inv_batch = T(1) / static_cast<T>(batch);
      for (int s = 0; s < batch; ++s) {
        loss += slot_loss[static_cast<size_t>(s)];
        correct += slot_correct[static_cast<size_t>(s)];
        total += slot_total[static_cast<size_t>(s)];
        std::vector<Tensor<T>*> src = param_list(slot_grads[static_cast<size_t>(s)]);
        std::vector<Tensor<T>*> dst = param_list(grads);
        for (size_t k = 0; k < src.size(); ++k) {
          T* d = dst[k]->data.data();
          const T* s_ = src[k]->data.data();
          for (size_t i = 0; i < src[k]->data.size(); ++i) d[i] += s_[i] * inv_batch;
        }
      }
      loss /= batch;
      ++global_step;
      ++steps_run;
      if (!std::isfinite(loss)) {
        throw numerical_error("training diverged: non-finite loss at step " +
                              std::to_string(global_step));
      }

      if (cfg.train.grad_clip > 0) {
        double sq = 0.0;
        for (const Tensor<T>* g : glist) {
          for (T v : g->data) sq += static_cast<double>(v) * static_cast<double>(v);
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.train.grad_clip) {
          const T scale = static_cast<T>(cfg.train.grad_clip / norm);
          grads.for_each_param([scale](const std::string&, Tensor<T>& t) {
            for (T& v : t.data) v *= scale;
          });
        }
      }
      optimizer_step(plist, glist, ostate, ocfg);

      const double acc = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
      metrics.records.push_back(
          {global_step, stage.kind, static_cast<int>(stage_index), loss, cfg.train.lr, acc});

      acc_window.push_back(acc);
      acc_window_sum += acc;
      if (static_cast<int>(acc_window.size()) > cfg.train.acc_window) {
        acc_window_sum -= acc_window.front();
        acc_window.pop_front();
      }
      if (cfg.train.early_stop_acc > 0 && step >= cfg.train.min_steps &&
          static_cast<int>(acc_window.size()) == cfg.train.acc_window &&
          acc_window_sum / cfg.train.acc_window >= cfg.train.early_stop_acc) {
        break;
      }
    }
    metrics.steps_per_stage.push_back(steps_run);
  }

  TrainResult result{widen(params), std::move(metrics)};
  return result;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const TrainSchedule& schedule, MaskPolicy policy,
                  const TrainData& data) {
  if (cfg.train.precision == Precision::F32) {
    return train_impl<float>(cfg, schedule, policy, data);
  }
  return train_impl<double>(cfg, schedule, policy, data);
}

}  // namespace attnlab
