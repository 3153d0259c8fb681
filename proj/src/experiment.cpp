#include "attnlab/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace attnlab {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << content;
}

std::string metrics_text(const RunMetrics& metrics) {
  std::string out;
  for (const StepRecord& r : metrics.records) {
    out += "step=" + std::to_string(r.step);
    out += " stage=" + stage_kind_str(r.stage);
    out += " stage_index=" + std::to_string(r.stage_index);
    out += " loss=" + fmt_double(r.loss);
    out += " lr=" + fmt_double(r.lr);
    out += " acc=" + fmt_double(r.acc);
    out += '\n';
  }
  return out;
}

struct Row {
  std::string name;
  MaskPolicy policy;       // SFT-stage and inference policy
  TrainSchedule schedule;
};

Dataset make_train_split(const TaskConfig& task) {
  if (task.kind == TaskKind::BlindReadout) {
    return gen_blind_readout(task.k_symbols, task.train_samples, task.data_seed);
  }
  return gen_plain_recall(task.k_symbols, task.train_samples, task.data_seed);
}

Dataset make_eval_split(const TaskConfig& task) {
  if (task.kind == TaskKind::BlindReadout) {
    return gen_blind_readout(task.k_symbols, task.eval_samples, task.data_seed + 1);
  }
  return gen_plain_recall(task.k_symbols, task.eval_samples, task.data_seed + 1);
}

}  // namespace

std::string audit_report_text(const SequenceLayout& layout, const AttentionMask& mask,
                              const std::vector<bool>& loss_mask, int depth,
                              const std::string& policy_label, const std::string& loss_label) {
  const ReachabilityReport report = audit_training(layout, mask, loss_mask, depth);
  const std::optional<int> min_depth = min_leak_depth(layout, mask, loss_mask);
  std::string out;
  out += "total_len=" + std::to_string(layout.total_len()) + '\n';
  out += "policy=" + policy_label + '\n';
  out += "loss_role=" + loss_label + '\n';
  out += "depth=" + std::to_string(depth) + '\n';
  std::string positions;
  for (int p = 0; p < layout.total_len(); ++p) {
    if (loss_mask[static_cast<size_t>(p)]) {
      if (!positions.empty()) positions += ' ';
      positions += std::to_string(p);
    }
  }
  out += "loss_positions=" + positions + '\n';
  out += "leaky_count=" + std::to_string(report.leaky.size()) + '\n';
  std::string pairs;
  for (const auto& [p, q] : report.leaky) {
    if (!pairs.empty()) pairs += ' ';
    pairs += std::to_string(p) + ":" + std::to_string(q);
  }
  out += "leaky_pairs=" + pairs + '\n';
  out += "min_leak_depth=" + (min_depth ? std::to_string(*min_depth) : std::string("none")) + '\n';
  return out;
}

ExperimentResult run_experiment(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.schedule.pipeline == Pipeline::Dot) {
    throw std::invalid_argument(
        "config key [schedule].pipeline: compare derives its own rows; use conventional or "
        "sft_only");
  }
  namespace fs = std::filesystem;
  const fs::path out(out_dir);
  fs::create_directories(out);

  const bool with_pt = cfg.schedule.pipeline == Pipeline::Conventional;
  std::vector<Row> rows;
  if (with_pt) {
    rows.push_back({"causal", MaskPolicy::Causal,
                    make_conventional_schedule(cfg.schedule.pt_steps, cfg.schedule.sft_steps)});
    rows.push_back({"mma_pairwise", MaskPolicy::MmaPairwise,
                    make_conventional_schedule(cfg.schedule.pt_steps, cfg.schedule.sft_steps)});
    rows.push_back({"dot_causal", MaskPolicy::Causal,
                    make_dot_schedule(cfg.schedule.pt_steps, cfg.schedule.sft_steps)});
  } else {
    rows.push_back({"causal", MaskPolicy::Causal, make_sft_only_schedule(cfg.schedule.sft_steps)});
    rows.push_back({"mma_pairwise", MaskPolicy::MmaPairwise,
                    make_sft_only_schedule(cfg.schedule.sft_steps)});
    rows.push_back({"dot_causal", MaskPolicy::Causal,
                    make_dot_sft_only_schedule(cfg.schedule.sft_steps)});
  }

  TrainData data;
  data.sft = make_train_split(cfg.task);
  if (with_pt) data.pt = gen_caption(cfg.task.k_symbols, cfg.task.train_samples, cfg.task.data_seed + 2);
  const Dataset eval_split = make_eval_split(cfg.task);

  // Mask and audit artifacts, independent of training.
  for (const Row& row : rows) {
    const AttentionMask mask =
        training_mask(data.sft.samples.front().layout, row.policy, data.sft.readout);
    write_file(out / ("mask_" + row.name + ".txt"), render_mask(mask) + "\n");
    const SequenceLayout& sft_layout = data.sft.samples.front().layout;
    write_file(out / ("audit_sft_" + row.name + ".txt"),
               audit_report_text(sft_layout, mask, data.sft.samples.front().loss_mask,
                                 cfg.model.n_layers, policy_str(row.policy), "answer"));
  }
  {
    // The documented failure mode: pairwise MMA over a PT-style caption batch.
    const Dataset caption = gen_caption(cfg.task.k_symbols, 1, cfg.task.data_seed + 2);
    const TaskSample& s = caption.samples.front();
    const AttentionMask mma_pt = build_mma_pairwise(s.layout);
    write_file(out / "audit_pt_mma.txt",
               audit_report_text(s.layout, mma_pt, s.loss_mask, cfg.model.n_layers,
                                 policy_str(MaskPolicy::MmaPairwise), "caption"));
  }

  ExperimentResult result;
  std::string summary_txt =
      "row           seed  steps   final_loss        accuracy\n";
  nlohmann::json summary_json;
  summary_json["task"] = task_kind_str(cfg.task.kind);
  summary_json["k_symbols"] = cfg.task.k_symbols;
  summary_json["readout"] =
      data.sft.readout == ReadoutMode::ImageOnly ? "image_only" : "normal";
  summary_json["cells"] = nlohmann::json::array();

  for (const Row& row : rows) {
    for (uint64_t seed : cfg.train.seeds) {
      RunConfig cell_cfg = cfg;
      cell_cfg.model.seed = seed;
      TrainResult trained = train(cell_cfg, row.schedule, row.policy, data);
      const double acc = evaluate(trained.params, eval_split, row.policy, eval_split.readout);
      trained.metrics.final_accuracy.emplace_back(eval_split.name, acc);

      write_file(out / ("metrics_" + row.name + "_seed" + std::to_string(seed) + ".txt"),
                 metrics_text(trained.metrics));

      CellResult cell;
      cell.row = row.name;
      cell.seed = seed;
      cell.accuracy = acc;
      cell.final_loss = trained.metrics.records.back().loss;
      for (long long s : trained.metrics.steps_per_stage) cell.steps += s;
      result.cells.push_back(cell);

      char line[160];
      std::snprintf(line, sizeof line, "%-13s %-5llu %-7lld %-17.10g %.10g\n", row.name.c_str(),
                    static_cast<unsigned long long>(seed), cell.steps, cell.final_loss,
                    cell.accuracy);
      summary_txt += line;

      nlohmann::json jcell;
      jcell["row"] = cell.row;
      jcell["seed"] = cell.seed;
      jcell["steps"] = cell.steps;
      jcell["final_loss"] = cell.final_loss;
      jcell["accuracy"] = cell.accuracy;
      summary_json["cells"].push_back(jcell);
    }
  }

  write_file(out / "summary.txt", summary_txt);
  write_file(out / "summary.json", summary_json.dump(2) + "\n");
  result.summary_path = (out / "summary.txt").string();
  return result;
}

}  // namespace attnlab
