// Command-line front end: mask rendering, leakage analysis, schedule
// inspection, training, evaluation, and the full policy comparison.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "attnlab/checkpoint.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/experiment.hpp"

namespace fs = std::filesystem;
using namespace attnlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << content;
}

// --out flag wins, then ATTNLAB_OUT, then ./out.
std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ATTNLAB_OUT"); env && *env) return env;
  return "out";
}

std::vector<bool> loss_mask_for_role(const SequenceLayout& layout, SegmentRole role) {
  std::vector<bool> mask(static_cast<size_t>(layout.total_len()), false);
  bool any = false;
  for (int p = 0; p < layout.total_len(); ++p) {
    if (layout.role_at(p) == role) {
      mask[static_cast<size_t>(p)] = true;
      any = true;
    }
  }
  if (!any) {
    throw std::invalid_argument("layout has no segment with the requested loss role");
  }
  return mask;
}

TrainSchedule schedule_from_config(const RunConfig& cfg) {
  switch (cfg.schedule.pipeline) {
    case Pipeline::Conventional:
      return make_conventional_schedule(cfg.schedule.pt_steps, cfg.schedule.sft_steps);
    case Pipeline::Dot:
      return make_dot_schedule(cfg.schedule.pt_steps, cfg.schedule.sft_steps);
    case Pipeline::SftOnly:
      return make_sft_only_schedule(cfg.schedule.sft_steps);
  }
  throw std::invalid_argument("unknown pipeline");
}

Dataset dataset_for_task(const TaskConfig& task, int n_samples, uint64_t seed) {
  if (task.kind == TaskKind::BlindReadout) {
    return gen_blind_readout(task.k_symbols, n_samples, seed);
  }
  return gen_plain_recall(task.k_symbols, n_samples, seed);
}

int cmd_mask(const std::string& layout_path, const std::string& policy_name,
             const std::string& out_flag) {
  const SequenceLayout layout = parse_layout(read_text_file(layout_path));
  const MaskPolicy policy = parse_policy(policy_name);
  const AttentionMask mask = build_policy_mask(layout, policy);
  std::cout << render_mask(mask) << '\n';
  const fs::path out(resolve_out_dir(out_flag));
  fs::create_directories(out);
  write_text_file(out / "mask.txt", render_mask(mask) + "\n");
  write_text_file(out / "mask.csv", mask_csv(mask));
  std::cout << "wrote " << (out / "mask.txt").string() << " and " << (out / "mask.csv").string()
            << '\n';
  return kExitOk;
}

int cmd_analyze(const std::string& layout_path, const std::string& policy_name,
                const std::string& loss_role, int depth) {
  const SequenceLayout layout = parse_layout(read_text_file(layout_path));
  const MaskPolicy policy = parse_policy(policy_name);
  const SegmentRole role = parse_role(loss_role);
  if (role != SegmentRole::Caption && role != SegmentRole::Query && role != SegmentRole::Answer) {
    throw std::invalid_argument("loss role must be caption, query or answer");
  }
  // ANSWER rows follow the decode rule; pure prefill layouts take the policy
  // mask directly.
  const AttentionMask mask = training_mask(layout, policy, ReadoutMode::Normal);
  std::cout << audit_report_text(layout, mask, loss_mask_for_role(layout, role), depth,
                                 policy_str(policy), role_str(role));
  return kExitOk;
}

int cmd_schedule(int modalities, long long steps, const std::string& pipeline_name) {
  Pipeline pipeline;
  if (pipeline_name == "conventional") pipeline = Pipeline::Conventional;
  else if (pipeline_name == "dot") pipeline = Pipeline::Dot;
  else throw std::invalid_argument("pipeline must be conventional or dot");

  const auto orders = enumerate_orders(modalities);
  std::cout << "pipeline=" << pipeline_name << " modalities=" << modalities
            << " steps_per_stage=" << steps << '\n';
  for (const char* stage : {"PT", "SFT"}) {
    if (pipeline == Pipeline::Conventional) {
      std::cout << "stage=" << stage << " order=identity steps=" << steps << '\n';
      continue;
    }
    // Dual-order training ends each stage on the identity (inference) order.
    for (auto it = orders.rbegin(); it != orders.rend(); ++it) {
      std::cout << "stage=" << stage << " order=";
      for (size_t k = 0; k < it->size(); ++k) {
        if (k) std::cout << ',';
        std::cout << (*it)[k];
      }
      std::cout << " steps=" << steps << '\n';
    }
  }
  std::cout << "total_steps=" << schedule_cost(modalities, steps, pipeline) << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_flag) {
  const RunConfig cfg = load_config(config_path);
  const TrainSchedule schedule = schedule_from_config(cfg);
  TrainData data;
  data.sft = dataset_for_task(cfg.task, cfg.task.train_samples, cfg.task.data_seed);
  bool has_pt = false;
  for (const Stage& s : schedule.stages) has_pt = has_pt || s.kind == StageKind::PT;
  if (has_pt) data.pt = gen_caption(cfg.task.k_symbols, cfg.task.train_samples, cfg.task.data_seed + 2);

  TrainResult result = train(cfg, schedule, cfg.train.policy, data);
  const Dataset eval_split = dataset_for_task(cfg.task, cfg.task.eval_samples, cfg.task.data_seed + 1);
  const double acc = evaluate(result.params, eval_split, cfg.train.policy, eval_split.readout);

  const fs::path out(resolve_out_dir(out_flag));
  fs::create_directories(out);
  std::string metrics;
  for (const StepRecord& r : result.metrics.records) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "step=%lld stage=%s stage_index=%d loss=%.17g lr=%.17g acc=%.17g\n",
                  r.step, stage_kind_str(r.stage).c_str(), r.stage_index, r.loss, r.lr, r.acc);
    metrics += buf;
  }
  write_text_file(out / "metrics.txt", metrics);
  save_checkpoint((out / "model.ckpt").string(), result.params);
  std::cout << "policy=" << policy_str(cfg.train.policy) << " task=" << task_kind_str(cfg.task.kind)
            << " steps=" << result.metrics.records.size() << " final_loss="
            << result.metrics.records.back().loss << " eval_accuracy=" << acc << '\n'
            << "wrote " << (out / "metrics.txt").string() << " and " << (out / "model.ckpt").string()
            << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& readout_name) {
  const RunConfig cfg = load_config(config_path);
  ModelParams<double> params = load_checkpoint(ckpt_path);
  const Dataset eval_split = dataset_for_task(cfg.task, cfg.task.eval_samples, cfg.task.data_seed + 1);
  ReadoutMode readout = eval_split.readout;
  if (readout_name == "normal") readout = ReadoutMode::Normal;
  else if (readout_name == "image_only") readout = ReadoutMode::ImageOnly;
  else if (!readout_name.empty()) throw std::invalid_argument("readout must be normal or image_only");
  const double acc = evaluate(params, eval_split, cfg.train.policy, readout);
  std::cout << "task=" << task_kind_str(cfg.task.kind) << " policy=" << policy_str(cfg.train.policy)
            << " readout=" << (readout == ReadoutMode::ImageOnly ? "image_only" : "normal")
            << " accuracy=" << acc << '\n';
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_flag) {
  const RunConfig cfg = load_config(config_path);
  const ExperimentResult result = run_experiment(cfg, resolve_out_dir(out_flag));
  std::cout << read_text_file(result.summary_path);
  std::cout << "wrote " << result.summary_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy testbed for attention-mask policies in multimodal decoders"};
  app.require_subcommand(1);

  std::string layout_path, policy_name = "causal", out_flag, loss_role = "answer";
  std::string config_path, ckpt_path, readout_name, pipeline_name = "conventional";
  int depth = 4;
  int modalities = 2;
  long long steps = 1000;

  CLI::App* mask_cmd = app.add_subcommand("mask", "render a mask and dump it as CSV");
  mask_cmd->add_option("--layout", layout_path, "layout description file")->required();
  mask_cmd->add_option("--policy", policy_name, "causal | mma_pairwise | mma_generalized");
  mask_cmd->add_option("--out", out_flag, "output directory (default $ATTNLAB_OUT or ./out)");

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "audit a training setup for leakage");
  analyze_cmd->add_option("--layout", layout_path, "layout description file")->required();
  analyze_cmd->add_option("--policy", policy_name, "mask policy");
  analyze_cmd->add_option("--loss-role", loss_role, "caption | query | answer");
  analyze_cmd->add_option("--depth", depth, "attention hops (model layer count)");

  CLI::App* schedule_cmd = app.add_subcommand("schedule", "print a pipeline and its step cost");
  schedule_cmd->add_option("--modalities", modalities, "number of modalities (1..6)");
  schedule_cmd->add_option("--steps", steps, "steps per stage");
  schedule_cmd->add_option("--pipeline", pipeline_name, "conventional | dot");

  CLI::App* train_cmd = app.add_subcommand("train", "train one model per the config");
  train_cmd->add_option("--config", config_path, "config file")->required();
  train_cmd->add_option("--out", out_flag, "output directory");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--config", config_path, "config file")->required();
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--readout", readout_name, "normal | image_only (default: task's own)");

  CLI::App* compare_cmd = app.add_subcommand("compare", "run the full policy comparison");
  compare_cmd->add_option("--config", config_path, "config file")->required();
  compare_cmd->add_option("--out", out_flag, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (mask_cmd->parsed()) return cmd_mask(layout_path, policy_name, out_flag);
    if (analyze_cmd->parsed()) return cmd_analyze(layout_path, policy_name, loss_role, depth);
    if (schedule_cmd->parsed()) return cmd_schedule(modalities, steps, pipeline_name);
    if (train_cmd->parsed()) return cmd_train(config_path, out_flag);
    if (eval_cmd->parsed()) return cmd_eval(config_path, ckpt_path, readout_name);
    if (compare_cmd->parsed()) return cmd_compare(config_path, out_flag);
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitUsage;
}
