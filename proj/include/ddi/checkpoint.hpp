#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddi/model.hpp"

namespace ddi {

// Adam accumulators, parallel to named_params(model) order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t iteration = 0;  // completed minibatch steps
  std::vector<std::string> names;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_model(const Model& model);
};

// Single-file binary checkpoint: encoder config, margin, feature statistics,
// side-effect vocabulary, every named tensor with shape and raw 64-bit
// values, and (optionally) the optimizer state with its iteration counter.
// Writing the same model twice produces byte-identical files.
void save_checkpoint(const std::string& path, const Model& model,
                     const SideEffectVocab& vocab, const AdamState* optimizer = nullptr);

struct Checkpoint {
  Model model;
  SideEffectVocab vocab;
  std::optional<AdamState> optimizer;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ddi
