#include "attnlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace attnlab {

namespace {

constexpr const char* kMagic = "ATTNLAB-CKPT v1";

void write_f64_le(std::ostream& out, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, ModelParams<double>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open checkpoint file for writing: " + path);
  const ModelConfig& c = params.cfg;
  out << kMagic << '\n'
      << "d_model=" << c.d_model << " n_heads=" << c.n_heads << " n_layers=" << c.n_layers
      << " d_ff=" << c.d_ff << " vocab_size=" << c.vocab_size << " max_len=" << c.max_len
      << " seed=" << c.seed << '\n';
  params.for_each_param([&out](const std::string&, Tensor<double>& t) {
    for (double v : t.data) write_f64_le(out, v);
  });
  if (!out) throw std::invalid_argument("failed while writing checkpoint: " + path);
}

ModelParams<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open checkpoint file: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw std::invalid_argument("not a checkpoint file: " + path);
  std::string header;
  std::getline(in, header);
  ModelConfig cfg;
  std::istringstream hs(header);
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("malformed checkpoint header");
    const std::string key = field.substr(0, eq);
    const long long value = std::stoll(field.substr(eq + 1));
    if (key == "d_model") cfg.d_model = static_cast<int>(value);
    else if (key == "n_heads") cfg.n_heads = static_cast<int>(value);
    else if (key == "n_layers") cfg.n_layers = static_cast<int>(value);
    else if (key == "d_ff") cfg.d_ff = static_cast<int>(value);
    else if (key == "vocab_size") cfg.vocab_size = static_cast<int>(value);
    else if (key == "max_len") cfg.max_len = static_cast<int>(value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(value);
    else throw std::invalid_argument("unknown checkpoint header field '" + key + "'");
  }
  cfg.validate();
  ModelParams<double> params = ModelParams<double>::init(cfg);
  params.for_each_param([&in, &path](const std::string& name, Tensor<double>& t) {
    for (double& v : t.data) v = read_f64_le(in);
    if (!in) throw std::invalid_argument("checkpoint truncated at " + name + ": " + path);
  });
  char extra;
  if (in.read(&extra, 1)) throw std::invalid_argument("trailing bytes in checkpoint: " + path);
  return params;
}

}  // namespace attnlab
