#pragma once

// Checkpoint layout:
//
//   LCS2S\n
//   version 1\n
//   <config key> <value>\n ...          one line per ModelConfig field
//   params <count>\n
//   then per parameter:
//   <name> <rows> <cols>\n  followed by rows*cols little-endian float32, row-major
//
// Values are always stored in single precision whatever the in-memory scalar.

#include <string>
#include <vector>

#include "lcs2s/model.hpp"
#include "lcs2s/tensor.hpp"

namespace lcs2s {

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix<float> value;
};

void write_checkpoint_file(const std::string& path, const ModelConfig& config,
                           const std::vector<NamedTensor>& tensors);

struct CheckpointContents {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
};

CheckpointContents read_checkpoint_file(const std::string& path);

template <typename Scalar>
void save_checkpoint(const std::string& path, const ModelParams<Scalar>& params) {
  std::vector<NamedTensor> tensors;
  for (const Parameter<Scalar>* p : params.parameters()) {
    tensors.push_back({p->name, p->value.template cast<float>()});
  }
  write_checkpoint_file(path, params.config(), tensors);
}

/// Rejects unknown or duplicate names, missing parameters and any shape that
/// disagrees with the stored config.
template <typename Scalar>
ModelParams<Scalar> load_checkpoint(const std::string& path) {
  CheckpointContents contents = read_checkpoint_file(path);
  ModelParams<Scalar> params(contents.config);
  auto slots = params.parameters();
  std::vector<bool> seen(slots.size(), false);
  for (const NamedTensor& t : contents.tensors) {
    std::size_t i = 0;
    while (i < slots.size() && slots[i]->name != t.name) ++i;
    if (i == slots.size()) throw DataError(path + ": unknown parameter '" + t.name + "'");
    if (seen[i]) throw DataError(path + ": duplicate parameter '" + t.name + "'");
    if (t.value.rows() != slots[i]->rows() || t.value.cols() != slots[i]->cols()) {
      throw DataError(path + ": parameter '" + t.name + "' has shape " + shape_string(t.value) +
                      ", config requires " + shape_string(slots[i]->rows(), slots[i]->cols()));
    }
    slots[i]->value = t.value.template cast<Scalar>();
    seen[i] = true;
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!seen[i]) throw DataError(path + ": missing parameter '" + slots[i]->name + "'");
  }
  return params;
}

}  // namespace lcs2s
