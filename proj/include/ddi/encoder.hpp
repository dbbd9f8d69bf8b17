#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ddi/data.hpp"
#include "ddi/tensor.hpp"

namespace ddi {

// Ablation variants. MpnnConcat never exchanges information across the
// drug pair; LateOuter attends once after all propagation steps; Caddi is
// the single-head model.
enum class Variant { kMhcaddi, kCaddi, kMpnnConcat, kLateOuter };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct EncoderConfig {
  std::size_t feature_dim = 32;  // d
  std::size_t steps = 3;         // T
  std::size_t heads = 8;         // K
  double dropout_p = 0.2;
  double leaky_slope = 0.01;
  Variant variant = Variant::kMhcaddi;
  // The attention score is a bare inner product; 1/sqrt(d) scaling is
  // available for experimentation but defaults off.
  bool attention_scaling = false;
  double layer_norm_eps = 1e-5;
  std::size_t atom_vocab = 119;  // rows in the atom embedding table, indexed by Z
  std::size_t bond_types = 4;

  // Caddi is exactly the single-head model.
  std::size_t effective_heads() const { return variant == Variant::kCaddi ? 1 : heads; }
  void validate() const;
};

// Training-set mean/deviation of the three raw atom features
// (atom number, hydrogen count, charge); frozen into checkpoints.
struct FeatureStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stdev{1.0, 1.0, 1.0};
};

FeatureStats compute_feature_stats(const DrugTable& drugs);

struct AttnHeadParams {
  DiffArray key_proj;    // W_k, applied to both sides of the inner product
  DiffArray value_proj;  // W_v
};

struct AttnBlockParams {
  std::vector<AttnHeadParams> heads;
  DiffArray out_W;  // f_o: [K*d x d]
  DiffArray out_b;
};

struct StepParams {
  DiffArray node_proj;                          // f_v: [d x d], no bias
  DiffArray edge_W1, edge_b1, edge_W2, edge_b2; // f_e: two layers, leaky ReLU
  AttnBlockParams attn;
  DiffArray ln_gain, ln_bias;
};

struct EncoderParams {
  DiffArray atom_embed;  // [atom_vocab x d], row Z is the element's embedding
  DiffArray input_proj;  // f_i: [(3+d) x d], no bias
  DiffArray edge_embed;  // [bond_types x d]
  std::vector<StepParams> steps;
  // LateOuter's single post-propagation attention round has its own block.
  std::optional<AttnBlockParams> late_attn;
  DiffArray late_ln_gain, late_ln_bias;
  DiffArray readout_W, readout_b;  // f_r
};

EncoderParams make_encoder_params(const EncoderConfig& config);

// Optional instrumentation of a forward pass.
struct EncodeTrace {
  bool want_input_grads = false;
  bool want_alphas = false;
  DiffArray x_inputs, y_inputs;               // standardized raw features [N x 3]
  std::vector<DiffArray> alphas_x, alphas_y;  // attention rows, per step then head
};

struct EncodeResult {
  DiffArray atoms_x, atoms_y;  // final atom states [N x d]
  DiffArray drug_x, drug_y;    // drug-level vectors [1 x d]
};

// Input projection: h0 = f_i([standardized raw features || learned
// atom-type embedding]), then dropout.
DiffArray embed_inputs(Tape& tape, const DrugGraph& drug, const EncoderConfig& config,
                       const EncoderParams& params, const FeatureStats& stats, Mode mode,
                       Rng* rng, DiffArray* raw_out = nullptr);

// Edge-vector lookup with its retrieval-time dropout, shared by all steps.
DiffArray lookup_edge_vectors(Tape& tape, const DrugGraph& drug, const EncoderConfig& config,
                              const EncoderParams& params, Mode mode, Rng* rng);

// Inner messages: per directed edge, f_e(edge vector) gates f_v(sender
// state) elementwise; each atom sums what it receives. Isolated atoms
// receive the zero vector.
DiffArray message_pass(Tape& tape, const DrugGraph& drug, const DiffArray& h,
                       const DiffArray& edge_vectors, const StepParams& step,
                       const EncoderConfig& config, Mode mode, Rng* rng);

// Outer messages: multi-head attention of drug x's atoms over drug y's
// atoms (shared key projection on both sides, softmax over the partner's
// atoms, heads concatenated then f_o). Appends one alpha matrix per head
// to `alphas_out` when provided.
DiffArray co_attend(Tape& tape, const DiffArray& h_x, const DiffArray& h_y,
                    const AttnBlockParams& block, const EncoderConfig& config, Mode mode,
                    Rng* rng, std::vector<DiffArray>* alphas_out = nullptr);

// Update: LayerNorm(h + m + n), a skip connection over both message
// kinds; pass an invalid `n` for variants without an outer message.
DiffArray update_states(Tape& tape, const DiffArray& h, const DiffArray& m,
                        const DiffArray& n, const DiffArray& ln_gain,
                        const DiffArray& ln_bias, double eps);

// Full pipeline for one drug pair: T propagation steps in both directions
// from the same snapshot, then readout (summed f_r over final atom states).
EncodeResult encode_pair(Tape& tape, const DrugGraph& drug_x, const DrugGraph& drug_y,
                         const EncoderConfig& config, const EncoderParams& params,
                         const FeatureStats& stats, Mode mode, Rng* rng,
                         EncodeTrace* trace = nullptr);

}  // namespace ddi
