#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddi/encoder.hpp"
#include "ddi/scoring.hpp"

namespace ddi {

// Everything a trained predictor carries: encoder weights, both scoring
// heads, the input standardization statistics, and the shapes' config.
struct Model {
  EncoderConfig config;
  std::size_t vocab_size = 0;
  EncoderParams encoder;
  BinaryHeadParams binary;
  MultiLabelHeadParams multilabel;
  FeatureStats stats;
};

Model make_model(const EncoderConfig& config, std::size_t vocab_size, double margin = 1.0);

// Stable name -> tensor pairs. Names follow the documented scheme
// (step index, head index, role) and are the checkpoint keys:
//   encoder.atom_embed, encoder.input_proj, encoder.edge_embed,
//   encoder.step<t>.{node_proj,edge_W1,edge_b1,edge_W2,edge_b2},
//   encoder.step<t>.head<k>.{key_proj,value_proj},
//   encoder.step<t>.{attn_out_W,attn_out_b,ln_gain,ln_bias},
//   encoder.late.head<k>.*, encoder.late.{attn_out_W,attn_out_b,ln_gain,ln_bias},
//   encoder.readout_W, encoder.readout_b,
//   binary.head_map, binary.tail_map, binary.se_embed,
//   multilabel.proj_W, multilabel.proj_b
std::vector<std::pair<std::string, DiffArray>> named_params(const Model& model);

void zero_all_grads(const Model& model);

}  // namespace ddi
