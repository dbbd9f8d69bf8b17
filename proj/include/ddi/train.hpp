#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddi/checkpoint.hpp"
#include "ddi/data.hpp"
#include "ddi/model.hpp"

namespace ddi {

enum class Objective { kBinaryMargin, kMultilabelBce };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 200;
  double base_lr = 0.001;
  double lr_decay = 0.96;
  double lr_decay_scale = 1e-6;
  Objective objective = Objective::kBinaryMargin;
  bool printed_margin_form = false;
  // Training negatives are redrawn every epoch; set to reuse the first
  // epoch's corruption throughout.
  bool freeze_negatives = false;

  void validate() const;
};

// Xavier-uniform for weight matrices (+-sqrt(6/(fan_in+fan_out))), zero for
// biases, +-0.05 uniform for embedding tables, gain 1 / bias 0 for layer
// norms. Deterministic under the generator.
void xavier_init(Model& model, Rng& rng);

// Exponential decay: base * decay^(t * scale) after t minibatch iterations.
double lr_schedule(const TrainConfig& config, std::uint64_t t);

// Bias-corrected Adam over every named parameter; increments the iteration
// counter once and zeroes all gradients afterward. A non-finite gradient
// aborts with the offending parameter's name.
void adam_step(Model& model, AdamState& state, double learning_rate);

struct EpochStat {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
  std::size_t examples = 0;
};

struct TrainResult {
  std::vector<EpochStat> trace;
};

// Full optimization run over the positive records. For the margin objective
// every positive draws one corrupted negative per epoch (balanced 2N
// examples); the multi-label objective iterates unique pairs against their
// multi-hot targets. Bitwise deterministic for a fixed root generator.
//
// `known_positives` is the index corruptions are rejected against; it must
// contain every known positive triple (crossvalidation passes the full set,
// not just the training split's). Defaults to an index of `positives`.
TrainResult train_model(Model& model, AdamState& state, const DrugTable& drugs,
                        const std::vector<InteractionRecord>& positives,
                        const TrainConfig& config, const Rng& root,
                        const PositiveIndex* known_positives = nullptr);

// --- gradient verification harness -----------------------------------------

struct GradCheckConfig {
  Objective objective = Objective::kBinaryMargin;
  std::uint64_t seed = 0;
  double dropout_p = 0.0;  // anything else is refused: FD needs a fixed forward
  double fd_step = 1e-5;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t elements_checked = 0;
};

// Compares every parameter's analytic gradient against central finite
// differences on a fixed micro model (2 drugs x <=4 atoms, d=8, T=2, K=2).
GradCheckReport gradient_check(const GradCheckConfig& config);

}  // namespace ddi
