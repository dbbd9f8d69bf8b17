#include "ddi/model.hpp"

namespace ddi {

Model make_model(const EncoderConfig& config, std::size_t vocab_size, double margin) {
  config.validate();
  if (vocab_size < 1) throw ConfigError("model needs a nonempty side-effect vocabulary");
  if (margin <= 0.0) throw ConfigError("margin must be positive, got " + std::to_string(margin));
  const std::size_t d = config.feature_dim;
  Model m;
  m.config = config;
  m.vocab_size = vocab_size;
  m.encoder = make_encoder_params(config);
  m.binary.head_map = DiffArray::zeros({d, d}, true);
  m.binary.tail_map = DiffArray::zeros({d, d}, true);
  m.binary.se_embed = DiffArray::zeros({vocab_size, d}, true);
  m.binary.margin = margin;
  m.multilabel.proj_W = DiffArray::zeros({2 * d, vocab_size}, true);
  m.multilabel.proj_b = DiffArray::zeros({vocab_size}, true);
  return m;
}

std::vector<std::pair<std::string, DiffArray>> named_params(const Model& model) {
  std::vector<std::pair<std::string, DiffArray>> out;
  const auto& e = model.encoder;
  out.emplace_back("encoder.atom_embed", e.atom_embed);
  out.emplace_back("encoder.input_proj", e.input_proj);
  out.emplace_back("encoder.edge_embed", e.edge_embed);
  auto add_attn = [&out](const std::string& prefix, const AttnBlockParams& block) {
    for (std::size_t k = 0; k < block.heads.size(); ++k) {
      const std::string hp = prefix + ".head" + std::to_string(k);
      out.emplace_back(hp + ".key_proj", block.heads[k].key_proj);
      out.emplace_back(hp + ".value_proj", block.heads[k].value_proj);
    }
    out.emplace_back(prefix + ".attn_out_W", block.out_W);
    out.emplace_back(prefix + ".attn_out_b", block.out_b);
  };
  for (std::size_t t = 0; t < e.steps.size(); ++t) {
    const std::string sp = "encoder.step" + std::to_string(t);
    const auto& s = e.steps[t];
    out.emplace_back(sp + ".node_proj", s.node_proj);
    out.emplace_back(sp + ".edge_W1", s.edge_W1);
    out.emplace_back(sp + ".edge_b1", s.edge_b1);
    out.emplace_back(sp + ".edge_W2", s.edge_W2);
    out.emplace_back(sp + ".edge_b2", s.edge_b2);
    add_attn(sp, s.attn);
    out.emplace_back(sp + ".ln_gain", s.ln_gain);
    out.emplace_back(sp + ".ln_bias", s.ln_bias);
  }
  if (e.late_attn.has_value()) {
    add_attn("encoder.late", *e.late_attn);
    out.emplace_back("encoder.late.ln_gain", e.late_ln_gain);
    out.emplace_back("encoder.late.ln_bias", e.late_ln_bias);
  }
  out.emplace_back("encoder.readout_W", e.readout_W);
  out.emplace_back("encoder.readout_b", e.readout_b);
  out.emplace_back("binary.head_map", model.binary.head_map);
  out.emplace_back("binary.tail_map", model.binary.tail_map);
  out.emplace_back("binary.se_embed", model.binary.se_embed);
  out.emplace_back("multilabel.proj_W", model.multilabel.proj_W);
  out.emplace_back("multilabel.proj_b", model.multilabel.proj_b);
  return out;
}

void zero_all_grads(const Model& model) {
  for (auto& [name, array] : named_params(model)) {
    (void)name;
    array.zero_grad();
  }
}

}  // namespace ddi
