#pragma once

#include <string>
#include <utility>
#include <vector>

#include "facetok/tensor.hpp"

namespace facetok {

// Binary container: magic "FACEARAE", u32 version, length-prefixed config
// text, then a named tensor table (name, dtype, shape, little-endian
// payload). All multi-byte fields little-endian.
struct CheckpointData {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

std::vector<uint8_t> checkpoint_bytes(const CheckpointData& data);
CheckpointData checkpoint_parse(const std::vector<uint8_t>& bytes);

}  // namespace facetok
