#include "attnlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace attnlab {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_key(const std::string& path, const std::string& detail) {
  throw std::invalid_argument("config key " + path + ": " + detail);
}

long long to_int(const std::string& path, const std::string& v) {
  try {
    size_t used = 0;
    long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    bad_key(path, "expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& path, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    bad_key(path, "expected a number, got '" + v + "'");
  }
}

std::vector<uint64_t> to_seed_list(const std::string& path, const std::string& v) {
  std::vector<uint64_t> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<uint64_t>(to_int(path, item)));
  }
  if (out.empty()) bad_key(path, "expected a comma-separated seed list");
  return out;
}

}  // namespace

std::string task_kind_str(TaskKind kind) {
  return kind == TaskKind::BlindReadout ? "blind_readout" : "plain_recall";
}

std::string pipeline_str(Pipeline pipeline) {
  switch (pipeline) {
    case Pipeline::Conventional: return "conventional";
    case Pipeline::Dot: return "dot";
    case Pipeline::SftOnly: return "sft_only";
  }
  return "?";
}

void RunConfig::validate() const {
  model.validate();
  if (train.batch_size < 1) throw std::invalid_argument("config key [train].batch_size: must be >= 1");
  if (train.lr <= 0) throw std::invalid_argument("config key [train].lr: must be positive");
  if (train.grad_clip < 0) throw std::invalid_argument("config key [train].grad_clip: must be >= 0");
  if (train.min_steps < 0) throw std::invalid_argument("config key [train].min_steps: must be >= 0");
  if (train.acc_window < 1) throw std::invalid_argument("config key [train].acc_window: must be >= 1");
  if (train.early_stop_acc < 0 || train.early_stop_acc > 1) {
    throw std::invalid_argument("config key [train].early_stop_acc: must lie in [0, 1]");
  }
  if (train.threads < 0) throw std::invalid_argument("config key [train].threads: must be >= 0");
  if (task.k_symbols < 2 || task.k_symbols > 64) {
    throw std::invalid_argument("config key [task].k_symbols: must lie in [2, 64]");
  }
  if (task.train_samples < 1 || task.eval_samples < 1) {
    throw std::invalid_argument("config key [task].train_samples/eval_samples: must be >= 1");
  }
  if (schedule.pt_steps < 1) throw std::invalid_argument("config key [schedule].pt_steps: must be >= 1");
  if (schedule.sft_steps < 1) throw std::invalid_argument("config key [schedule].sft_steps: must be >= 1");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "train" && section != "task" && section != "schedule") {
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown section [" +
                                    section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    const std::string path = "[" + section + "]." + key;
    if (section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": key outside a section");
    }

    if (section == "model") {
      if (key == "d_model") cfg.model.d_model = static_cast<int>(to_int(path, value));
      else if (key == "n_heads") cfg.model.n_heads = static_cast<int>(to_int(path, value));
      else if (key == "n_layers") cfg.model.n_layers = static_cast<int>(to_int(path, value));
      else if (key == "d_ff") cfg.model.d_ff = static_cast<int>(to_int(path, value));
      else if (key == "vocab_size") cfg.model.vocab_size = static_cast<int>(to_int(path, value));
      else if (key == "max_len") cfg.model.max_len = static_cast<int>(to_int(path, value));
      else if (key == "seed") cfg.model.seed = static_cast<uint64_t>(to_int(path, value));
      else bad_key(path, "unknown key");
    } else if (section == "train") {
      if (key == "optimizer") {
        const std::string v = lower(value);
        if (v == "adam") cfg.train.optimizer = OptKind::Adam;
        else if (v == "sgd") cfg.train.optimizer = OptKind::SGD;
        else bad_key(path, "expected adam or sgd");
      } else if (key == "lr") cfg.train.lr = to_double(path, value);
      else if (key == "beta1") cfg.train.beta1 = to_double(path, value);
      else if (key == "beta2") cfg.train.beta2 = to_double(path, value);
      else if (key == "eps") cfg.train.eps = to_double(path, value);
      else if (key == "weight_decay") cfg.train.weight_decay = to_double(path, value);
      else if (key == "grad_clip") cfg.train.grad_clip = to_double(path, value);
      else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(to_int(path, value));
      else if (key == "early_stop_acc") cfg.train.early_stop_acc = to_double(path, value);
      else if (key == "min_steps") cfg.train.min_steps = static_cast<int>(to_int(path, value));
      else if (key == "acc_window") cfg.train.acc_window = static_cast<int>(to_int(path, value));
      else if (key == "precision") {
        const std::string v = lower(value);
        if (v == "f64") cfg.train.precision = Precision::F64;
        else if (v == "f32") cfg.train.precision = Precision::F32;
        else bad_key(path, "expected f64 or f32");
      } else if (key == "threads") cfg.train.threads = static_cast<int>(to_int(path, value));
      else if (key == "seeds") cfg.train.seeds = to_seed_list(path, value);
      else if (key == "policy") {
        try {
          cfg.train.policy = parse_policy(value);
        } catch (const std::invalid_argument& e) {
          bad_key(path, e.what());
        }
      } else bad_key(path, "unknown key");
    } else if (section == "task") {
      if (key == "kind") {
        const std::string v = lower(value);
        if (v == "blind_readout") cfg.task.kind = TaskKind::BlindReadout;
        else if (v == "plain_recall") cfg.task.kind = TaskKind::PlainRecall;
        else bad_key(path, "expected blind_readout or plain_recall");
      } else if (key == "k_symbols") cfg.task.k_symbols = static_cast<int>(to_int(path, value));
      else if (key == "train_samples") cfg.task.train_samples = static_cast<int>(to_int(path, value));
      else if (key == "eval_samples") cfg.task.eval_samples = static_cast<int>(to_int(path, value));
      else if (key == "data_seed") cfg.task.data_seed = static_cast<uint64_t>(to_int(path, value));
      else bad_key(path, "unknown key");
    } else if (section == "schedule") {
      if (key == "pipeline") {
        const std::string v = lower(value);
        if (v == "conventional") cfg.schedule.pipeline = Pipeline::Conventional;
        else if (v == "dot") cfg.schedule.pipeline = Pipeline::Dot;
        else if (v == "sft_only") cfg.schedule.pipeline = Pipeline::SftOnly;
        else bad_key(path, "expected conventional, dot or sft_only");
      } else if (key == "pt_steps") cfg.schedule.pt_steps = to_int(path, value);
      else if (key == "sft_steps") cfg.schedule.sft_steps = to_int(path, value);
      else bad_key(path, "unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace attnlab
