#include "ddi/encoder.hpp"

#include <cmath>

namespace ddi {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kMhcaddi: return "mhcaddi";
    case Variant::kCaddi: return "caddi";
    case Variant::kMpnnConcat: return "mpnn-concat";
    case Variant::kLateOuter: return "late-outer";
  }
  return "mhcaddi";
}

Variant variant_from_name(const std::string& name) {
  if (name == "mhcaddi") return Variant::kMhcaddi;
  if (name == "caddi") return Variant::kCaddi;
  if (name == "mpnn-concat") return Variant::kMpnnConcat;
  if (name == "late-outer") return Variant::kLateOuter;
  throw ConfigError("unknown encoder variant '" + name +
                    "' (expected mhcaddi, caddi, mpnn-concat or late-outer)");
}

void EncoderConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("encoder: feature_dim must be >= 1");
  if (steps < 1) throw ConfigError("encoder: steps must be >= 1");
  if (heads < 1) throw ConfigError("encoder: heads must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ConfigError("encoder: dropout_p must lie in [0, 1)");
  }
  if (layer_norm_eps <= 0.0) throw ConfigError("encoder: layer_norm_eps must be > 0");
  if (atom_vocab < 2) throw ConfigError("encoder: atom_vocab must cover at least Z=1");
  if (bond_types < 1) throw ConfigError("encoder: bond_types must be >= 1");
}

FeatureStats compute_feature_stats(const DrugTable& drugs) {
  FeatureStats s;
  std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
  std::size_t n = 0;
  for (const auto& g : drugs.drugs) {
    for (const auto& a : g.atoms) {
      const double f[3] = {static_cast<double>(a.atom_number),
                           static_cast<double>(a.hydrogen_count),
                           static_cast<double>(a.charge)};
      for (int k = 0; k < 3; ++k) {
        sum[k] += f[k];
        sumsq[k] += f[k] * f[k];
      }
      ++n;
    }
  }
  if (n == 0) return s;
  for (int k = 0; k < 3; ++k) {
    s.mean[k] = sum[k] / static_cast<double>(n);
    const double var = sumsq[k] / static_cast<double>(n) - s.mean[k] * s.mean[k];
    s.stdev[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

namespace {

AttnBlockParams make_attn_block(std::size_t d, std::size_t k) {
  AttnBlockParams block;
  block.heads.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    block.heads.push_back(AttnHeadParams{DiffArray::zeros({d, d}, true),
                                         DiffArray::zeros({d, d}, true)});
  }
  block.out_W = DiffArray::zeros({k * d, d}, true);
  block.out_b = DiffArray::zeros({d}, true);
  return block;
}

}  // namespace

EncoderParams make_encoder_params(const EncoderConfig& config) {
  config.validate();
  const std::size_t d = config.feature_dim;
  const std::size_t k = config.effective_heads();
  EncoderParams p;
  p.atom_embed = DiffArray::zeros({config.atom_vocab, d}, true);
  p.input_proj = DiffArray::zeros({3 + d, d}, true);
  p.edge_embed = DiffArray::zeros({config.bond_types, d}, true);
  p.steps.reserve(config.steps);
  for (std::size_t t = 0; t < config.steps; ++t) {
    StepParams s;
    s.node_proj = DiffArray::zeros({d, d}, true);
    s.edge_W1 = DiffArray::zeros({d, d}, true);
    s.edge_b1 = DiffArray::zeros({d}, true);
    s.edge_W2 = DiffArray::zeros({d, d}, true);
    s.edge_b2 = DiffArray::zeros({d}, true);
    s.attn = make_attn_block(d, k);
    s.ln_gain = DiffArray::full({d}, 1.0, true);
    s.ln_bias = DiffArray::zeros({d}, true);
    p.steps.push_back(std::move(s));
  }
  if (config.variant == Variant::kLateOuter) {
    p.late_attn = make_attn_block(d, k);
    p.late_ln_gain = DiffArray::full({d}, 1.0, true);
    p.late_ln_bias = DiffArray::zeros({d}, true);
  }
  p.readout_W = DiffArray::zeros({d, d}, true);
  p.readout_b = DiffArray::zeros({d}, true);
  return p;
}

DiffArray embed_inputs(Tape& tape, const DrugGraph& drug, const EncoderConfig& config,
                       const EncoderParams& params, const FeatureStats& stats, Mode mode,
                       Rng* rng, DiffArray* raw_out) {
  const std::size_t n = drug.atom_count();
  if (n == 0) throw DomainError("embed_inputs: drug '" + drug.drug_id + "' has no atoms");

  std::vector<std::size_t> type_idx(n);
  std::vector<double> feats(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = drug.atoms[i];
    if (static_cast<std::size_t>(a.atom_number) >= config.atom_vocab) {
      throw DataError("atom number Z=" + std::to_string(a.atom_number) + " in drug '" +
                      drug.drug_id + "' is outside the embedding vocabulary (" +
                      std::to_string(config.atom_vocab) + ")");
    }
    type_idx[i] = static_cast<std::size_t>(a.atom_number);
    feats[i * 3 + 0] = (a.atom_number - stats.mean[0]) / stats.stdev[0];
    feats[i * 3 + 1] = (a.hydrogen_count - stats.mean[1]) / stats.stdev[1];
    feats[i * 3 + 2] = (a.charge - stats.mean[2]) / stats.stdev[2];
  }
  DiffArray raw = DiffArray::from_values({n, 3}, std::move(feats));
  if (raw_out) *raw_out = raw;

  auto embedded = tape.row_gather(params.atom_embed, std::move(type_idx));
  auto concatenated = tape.concat(raw, embedded);
  auto h0 = tape.matmul(concatenated, params.input_proj);
  return rng ? tape.dropout(h0, config.dropout_p, mode, *rng) : h0;
}

DiffArray lookup_edge_vectors(Tape& tape, const DrugGraph& drug, const EncoderConfig& config,
                              const EncoderParams& params, Mode mode, Rng* rng) {
  for (std::size_t t : drug.edge_type) {
    if (t >= config.bond_types) {
      throw DataError("bond type " + std::to_string(t) + " in drug '" + drug.drug_id +
                      "' is outside the edge vocabulary (" +
                      std::to_string(config.bond_types) + ")");
    }
  }
  auto e = tape.row_gather(params.edge_embed, drug.edge_type);
  return rng ? tape.dropout(e, config.dropout_p, mode, *rng) : e;
}

DiffArray message_pass(Tape& tape, const DrugGraph& drug, const DiffArray& h,
                       const DiffArray& edge_vectors, const StepParams& step,
                       const EncoderConfig& config, Mode mode, Rng* rng) {
  const std::size_t n = drug.atom_count();
  const double p = config.dropout_p;
  auto drop = [&](const DiffArray& x) {
    return rng ? tape.dropout(x, p, mode, *rng) : x;
  };

  // f_e: two leaky-ReLU layers, dropout after each
  auto e1 = drop(tape.leaky_relu(
      tape.add_rowvec(tape.matmul(edge_vectors, step.edge_W1), step.edge_b1),
      config.leaky_slope));
  auto gate = drop(tape.leaky_relu(
      tape.add_rowvec(tape.matmul(e1, step.edge_W2), step.edge_b2), config.leaky_slope));

  // f_v on the sending endpoint of each directed edge
  auto sources = tape.row_gather(h, drug.edge_src);
  auto projected = drop(tape.matmul(sources, step.node_proj));

  auto messages = tape.mul(gate, projected);
  return tape.row_scatter_add(messages, drug.edge_dst, n);
}

DiffArray co_attend(Tape& tape, const DiffArray& h_x, const DiffArray& h_y,
                    const AttnBlockParams& block, const EncoderConfig& config, Mode mode,
                    Rng* rng, std::vector<DiffArray>* alphas_out) {
  if (h_x.rows() == 0 || h_y.rows() == 0) {
    throw DomainError("co_attend: both drugs must be nonempty");
  }
  std::vector<DiffArray> head_outputs;
  head_outputs.reserve(block.heads.size());
  for (const auto& head : block.heads) {
    auto queries = tape.matmul(h_x, head.key_proj);
    auto keys = tape.matmul(h_y, head.key_proj);
    auto scores = tape.matmul(queries, tape.transpose(keys));
    if (config.attention_scaling) {
      scores = tape.scale(scores, 1.0 / std::sqrt(static_cast<double>(config.feature_dim)));
    }
    auto alpha = tape.softmax(scores);
    if (alphas_out) alphas_out->push_back(alpha);
    auto values = tape.matmul(h_y, head.value_proj);
    head_outputs.push_back(tape.matmul(alpha, values));
  }
  auto combined = tape.concat(head_outputs);
  auto out = tape.leaky_relu(tape.add_rowvec(tape.matmul(combined, block.out_W), block.out_b),
                             config.leaky_slope);
  return rng ? tape.dropout(out, config.dropout_p, mode, *rng) : out;
}

DiffArray update_states(Tape& tape, const DiffArray& h, const DiffArray& m,
                        const DiffArray& n, const DiffArray& ln_gain,
                        const DiffArray& ln_bias, double eps) {
  auto combined = tape.add(h, m);
  if (n.valid()) combined = tape.add(combined, n);
  return tape.layer_norm(combined, ln_gain, ln_bias, eps);
}

EncodeResult encode_pair(Tape& tape, const DrugGraph& drug_x, const DrugGraph& drug_y,
                         const EncoderConfig& config, const EncoderParams& params,
                         const FeatureStats& stats, Mode mode, Rng* rng,
                         EncodeTrace* trace) {
  if (drug_x.atom_count() == 0 || drug_y.atom_count() == 0) {
    throw DomainError("encode_pair: drugs must be nonempty");
  }
  if (mode == Mode::kTrain && config.dropout_p > 0.0 && rng == nullptr) {
    throw ConfigError("encode_pair: train mode with dropout needs a generator");
  }
  DiffArray raw_x, raw_y;
  auto h_x = embed_inputs(tape, drug_x, config, params, stats, mode, rng, &raw_x);
  auto h_y = embed_inputs(tape, drug_y, config, params, stats, mode, rng, &raw_y);
  if (trace && trace->want_input_grads) {
    raw_x.set_requires_grad(true);
    raw_y.set_requires_grad(true);
  }
  if (trace) {
    trace->x_inputs = raw_x;
    trace->y_inputs = raw_y;
  }

  auto edges_x = lookup_edge_vectors(tape, drug_x, config, params, mode, rng);
  auto edges_y = lookup_edge_vectors(tape, drug_y, config, params, mode, rng);

  const bool per_step_attention =
      config.variant == Variant::kMhcaddi || config.variant == Variant::kCaddi;

  for (const auto& step : params.steps) {
    auto m_x = message_pass(tape, drug_x, h_x, edges_x, step, config, mode, rng);
    auto m_y = message_pass(tape, drug_y, h_y, edges_y, step, config, mode, rng);
    DiffArray n_x, n_y;
    if (per_step_attention) {
      // both directions read the same h snapshot (synchronous update)
      n_x = co_attend(tape, h_x, h_y, step.attn, config, mode, rng,
                      trace && trace->want_alphas ? &trace->alphas_x : nullptr);
      n_y = co_attend(tape, h_y, h_x, step.attn, config, mode, rng,
                      trace && trace->want_alphas ? &trace->alphas_y : nullptr);
    }
    h_x = update_states(tape, h_x, m_x, n_x, step.ln_gain, step.ln_bias,
                        config.layer_norm_eps);
    h_y = update_states(tape, h_y, m_y, n_y, step.ln_gain, step.ln_bias,
                        config.layer_norm_eps);
  }

  if (config.variant == Variant::kLateOuter) {
    if (!params.late_attn.has_value()) {
      throw ConfigError("late-outer variant requires the late attention block");
    }
    auto n_x = co_attend(tape, h_x, h_y, *params.late_attn, config, mode, rng,
                         trace && trace->want_alphas ? &trace->alphas_x : nullptr);
    auto n_y = co_attend(tape, h_y, h_x, *params.late_attn, config, mode, rng,
                         trace && trace->want_alphas ? &trace->alphas_y : nullptr);
    h_x = update_states(tape, h_x, n_x, DiffArray{}, params.late_ln_gain,
                        params.late_ln_bias, config.layer_norm_eps);
    h_y = update_states(tape, h_y, n_y, DiffArray{}, params.late_ln_gain,
                        params.late_ln_bias, config.layer_norm_eps);
  }

  auto readout = [&](const DiffArray& h) {
    auto transformed = tape.leaky_relu(
        tape.add_rowvec(tape.matmul(h, params.readout_W), params.readout_b),
        config.leaky_slope);
    return tape.sum_rows(transformed);
  };

  EncodeResult result;
  result.atoms_x = h_x;
  result.atoms_y = h_y;
  result.drug_x = readout(h_x);
  result.drug_y = readout(h_y);
  return result;
}

}  // namespace ddi
