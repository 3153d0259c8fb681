#pragma once

#include <string>

#include "attnlab/model.hpp"

namespace attnlab {

/// Checkpoint file: a self-describing text header with the config fields,
/// followed by raw 64-bit little-endian weight blocks in parameter
/// declaration order.
void save_checkpoint(const std::string& path, ModelParams<double>& params);
ModelParams<double> load_checkpoint(const std::string& path);

}  // namespace attnlab
