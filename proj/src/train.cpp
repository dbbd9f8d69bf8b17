#include "ddi/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace ddi {

std::string objective_name(Objective o) {
  return o == Objective::kBinaryMargin ? "binary_margin" : "multilabel_bce";
}

Objective objective_from_name(const std::string& name) {
  if (name == "binary_margin") return Objective::kBinaryMargin;
  if (name == "multilabel_bce") return Objective::kMultilabelBce;
  throw ConfigError("unknown objective '" + name +
                    "' (expected binary_margin or multilabel_bce)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (base_lr <= 0.0) throw ConfigError("train: base_lr must be positive");
  if (lr_decay <= 0.0) throw ConfigError("train: lr_decay must be positive");
  if (lr_decay_scale <= 0.0) throw ConfigError("train: lr_decay_scale must be positive");
}

namespace {

void fill_uniform(DiffArray& a, Rng& rng, double half_width) {
  for (double& v : a.values()) v = rng.uniform_pm(half_width);
}

void xavier_matrix(DiffArray& a, Rng& rng) {
  const double fan_in = static_cast<double>(a.shape()[0]);
  const double fan_out = static_cast<double>(a.shape()[1]);
  fill_uniform(a, rng, std::sqrt(6.0 / (fan_in + fan_out)));
}

void init_attn_block(AttnBlockParams& block, Rng& rng) {
  for (auto& head : block.heads) {
    xavier_matrix(head.key_proj, rng);
    xavier_matrix(head.value_proj, rng);
  }
  xavier_matrix(block.out_W, rng);
  std::fill(block.out_b.values().begin(), block.out_b.values().end(), 0.0);
}

constexpr double kEmbeddingHalfWidth = 0.05;

}  // namespace

void xavier_init(Model& model, Rng& rng) {
  auto& e = model.encoder;
  fill_uniform(e.atom_embed, rng, kEmbeddingHalfWidth);
  xavier_matrix(e.input_proj, rng);
  fill_uniform(e.edge_embed, rng, kEmbeddingHalfWidth);
  for (auto& step : e.steps) {
    xavier_matrix(step.node_proj, rng);
    xavier_matrix(step.edge_W1, rng);
    std::fill(step.edge_b1.values().begin(), step.edge_b1.values().end(), 0.0);
    xavier_matrix(step.edge_W2, rng);
    std::fill(step.edge_b2.values().begin(), step.edge_b2.values().end(), 0.0);
    init_attn_block(step.attn, rng);
    std::fill(step.ln_gain.values().begin(), step.ln_gain.values().end(), 1.0);
    std::fill(step.ln_bias.values().begin(), step.ln_bias.values().end(), 0.0);
  }
  if (e.late_attn.has_value()) {
    init_attn_block(*e.late_attn, rng);
    std::fill(e.late_ln_gain.values().begin(), e.late_ln_gain.values().end(), 1.0);
    std::fill(e.late_ln_bias.values().begin(), e.late_ln_bias.values().end(), 0.0);
  }
  xavier_matrix(e.readout_W, rng);
  std::fill(e.readout_b.values().begin(), e.readout_b.values().end(), 0.0);

  // The translational maps live in the same additive space as the side-effect
  // embeddings, so they start at the same +-0.05 scale. Xavier-scale maps put
  // the initial distances far above the margin and the hinge then spends most
  // of a desk-scale budget shrinking scores instead of ranking them.
  fill_uniform(model.binary.head_map, rng, kEmbeddingHalfWidth);
  fill_uniform(model.binary.tail_map, rng, kEmbeddingHalfWidth);
  fill_uniform(model.binary.se_embed, rng, kEmbeddingHalfWidth);

  xavier_matrix(model.multilabel.proj_W, rng);
  std::fill(model.multilabel.proj_b.values().begin(), model.multilabel.proj_b.values().end(),
            0.0);
}

double lr_schedule(const TrainConfig& config, std::uint64_t t) {
  return config.base_lr *
         std::pow(config.lr_decay, static_cast<double>(t) * config.lr_decay_scale);
}

void adam_step(Model& model, AdamState& state, double learning_rate) {
  const auto params = named_params(model);
  if (state.names.size() != params.size()) {
    throw ConfigError("optimizer state does not match the model's parameter list");
  }
  state.iteration += 1;
  const double t = static_cast<double>(state.iteration);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, array] = params[i];
    if (name != state.names[i]) {
      throw ConfigError("optimizer state for '" + state.names[i] +
                        "' does not match parameter '" + name + "'");
    }
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto& values = array.values();
    const auto* grad = array.grad_if_allocated();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad ? (*grad)[j] : 0.0;
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter '" + name + "'");
      }
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      values[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    array.zero_grad();
  }
}

namespace {

double margin_example_loss(Tape& tape, const Model& model, const DrugTable& drugs,
                           const InteractionRecord& pos, const InteractionRecord& neg,
                           const TrainConfig& config, Mode mode, Rng* dropout_rng) {
  auto enc_pos = encode_pair(tape, drugs.get(pos.drug1), drugs.get(pos.drug2), model.config,
                             model.encoder, model.stats, mode, dropout_rng);
  auto enc_neg = encode_pair(tape, drugs.get(neg.drug1), drugs.get(neg.drug2), model.config,
                             model.encoder, model.stats, mode, dropout_rng);
  auto f_pos =
      score_binary(tape, enc_pos.drug_x, enc_pos.drug_y, pos.side_effect_id, model.binary);
  auto f_neg =
      score_binary(tape, enc_neg.drug_x, enc_neg.drug_y, neg.side_effect_id, model.binary);
  auto loss =
      margin_loss(tape, f_pos, f_neg, model.binary.margin, config.printed_margin_form);
  tape.backward(loss);
  return loss.item();
}

double multilabel_example_loss(Tape& tape, const Model& model, const DrugTable& drugs,
                               const PairExample& pair, Mode mode, Rng* dropout_rng) {
  auto enc = encode_pair(tape, drugs.get(pair.drug1), drugs.get(pair.drug2), model.config,
                         model.encoder, model.stats, mode, dropout_rng);
  auto probs = predict_multilabel(tape, enc.drug_x, enc.drug_y, model.multilabel);
  std::vector<double> targets(model.vocab_size, 0.0);
  for (int z : pair.observed) targets[static_cast<std::size_t>(z)] = 1.0;
  auto loss = bce_loss(tape, probs, std::move(targets));
  tape.backward(loss);
  return loss.item();
}

std::string record_key(const InteractionRecord& r) {
  const std::string& lo = r.drug1 <= r.drug2 ? r.drug1 : r.drug2;
  const std::string& hi = r.drug1 <= r.drug2 ? r.drug2 : r.drug1;
  return lo + "\x1f" + hi + "\x1f" + std::to_string(r.side_effect_id);
}

}  // namespace

TrainResult train_model(Model& model, AdamState& state, const DrugTable& drugs,
                        const std::vector<InteractionRecord>& positives,
                        const TrainConfig& config, const Rng& root,
                        const PositiveIndex* known_positives) {
  config.validate();
  if (positives.empty()) throw DataError("train: no positive examples");

  TrainResult result;
  const PositiveIndex own_index =
      known_positives ? PositiveIndex() : PositiveIndex::build(positives);
  const PositiveIndex& index = known_positives ? *known_positives : own_index;

  // Frozen negatives are drawn once, in dataset order, and looked up by the
  // positive's canonical triple.
  std::unordered_map<std::string, InteractionRecord> frozen;
  if (config.objective == Objective::kBinaryMargin && config.freeze_negatives) {
    Rng neg_rng = root.derive("negatives", 0);
    for (const auto& pos : positives) {
      frozen.emplace(record_key(pos), sample_negative_train(pos, drugs, index, neg_rng));
    }
  }

  std::vector<PairExample> pairs;
  if (config.objective == Objective::kMultilabelBce) {
    pairs = build_pair_examples(positives);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng = root.derive("shuffle", epoch);
    Rng neg_rng = root.derive("negatives", epoch);
    Rng dropout_rng = root.derive("dropout", epoch);

    double loss_sum = 0.0;
    std::size_t examples = 0;

    if (config.objective == Objective::kBinaryMargin) {
      for (const auto& batch : minibatches(positives, config.batch_size, shuffle_rng)) {
        for (const auto& pos : batch) {
          const InteractionRecord neg =
              config.freeze_negatives ? frozen.at(record_key(pos))
                                      : sample_negative_train(pos, drugs, index, neg_rng);
          Tape tape;
          loss_sum += margin_example_loss(tape, model, drugs, pos, neg, config, Mode::kTrain,
                                          &dropout_rng);
          examples += 2;  // one positive plus its sampled negative
        }
        adam_step(model, state, lr_schedule(config, state.iteration));
      }
    } else {
      for (const auto& batch : minibatches(pairs, config.batch_size, shuffle_rng)) {
        for (const auto& pair : batch) {
          Tape tape;
          loss_sum +=
              multilabel_example_loss(tape, model, drugs, pair, Mode::kTrain, &dropout_rng);
          examples += 1;
        }
        adam_step(model, state, lr_schedule(config, state.iteration));
      }
    }

    const auto finished = std::chrono::steady_clock::now();
    EpochStat stat;
    stat.epoch = epoch;
    stat.examples = examples;
    const std::size_t loss_terms =
        config.objective == Objective::kBinaryMargin ? examples / 2 : examples;
    stat.mean_loss = loss_terms ? loss_sum / static_cast<double>(loss_terms) : 0.0;
    stat.wall_seconds = std::chrono::duration<double>(finished - started).count();
    result.trace.push_back(stat);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check harness

namespace {

DrugTable microcheck_drugs() {
  std::istringstream in(
      "M1|6,1,0 7,0,-1 6,2,1|0-1:1 1-2:2\n"
      "M2|8,0,0 6,1,0 1,0,0 6,3,-1|0-1:0 1-2:1 1-3:3\n");
  return parse_drugs_stream(in, "<microcheck>");
}

double microcheck_forward(const Model& model, const DrugTable& drugs, Objective objective) {
  Tape tape;
  const auto& d1 = drugs.drugs[0];
  const auto& d2 = drugs.drugs[1];
  auto enc = encode_pair(tape, d1, d2, model.config, model.encoder, model.stats, Mode::kEval,
                         nullptr);
  DiffArray loss;
  if (objective == Objective::kBinaryMargin) {
    // Two drugs admit no corrupted pair, so the ranking contrast is between
    // two side effects of the same pair; both scoring paths stay on tape.
    auto f_pos = score_binary(tape, enc.drug_x, enc.drug_y, 0, model.binary);
    auto f_neg = score_binary(tape, enc.drug_x, enc.drug_y, 1, model.binary);
    loss = margin_loss(tape, f_pos, f_neg, model.binary.margin);
  } else {
    auto probs = predict_multilabel(tape, enc.drug_x, enc.drug_y, model.multilabel);
    loss = bce_loss(tape, probs, {1.0, 0.0, 1.0});
  }
  return loss.item();
}

void microcheck_backward(const Model& model, const DrugTable& drugs, Objective objective) {
  Tape tape;
  const auto& d1 = drugs.drugs[0];
  const auto& d2 = drugs.drugs[1];
  auto enc = encode_pair(tape, d1, d2, model.config, model.encoder, model.stats, Mode::kEval,
                         nullptr);
  DiffArray loss;
  if (objective == Objective::kBinaryMargin) {
    auto f_pos = score_binary(tape, enc.drug_x, enc.drug_y, 0, model.binary);
    auto f_neg = score_binary(tape, enc.drug_x, enc.drug_y, 1, model.binary);
    loss = margin_loss(tape, f_pos, f_neg, model.binary.margin);
  } else {
    auto probs = predict_multilabel(tape, enc.drug_x, enc.drug_y, model.multilabel);
    loss = bce_loss(tape, probs, {1.0, 0.0, 1.0});
  }
  tape.backward(loss);
}

}  // namespace

GradCheckReport gradient_check(const GradCheckConfig& check) {
  if (check.dropout_p != 0.0) {
    throw ConfigError(
        "gradient_check: dropout must be disabled; a stochastic forward invalidates the "
        "finite-difference oracle");
  }
  EncoderConfig config;
  config.feature_dim = 8;
  config.steps = 2;
  config.heads = 2;
  config.dropout_p = 0.0;
  config.atom_vocab = 10;
  config.bond_types = 4;

  DrugTable drugs = microcheck_drugs();
  Model model = make_model(config, /*vocab_size=*/3);
  model.stats = compute_feature_stats(drugs);
  Rng rng(check.seed);
  xavier_init(model, rng);

  if (check.objective == Objective::kBinaryMargin) {
    // The hinge must be active, otherwise every gradient is trivially zero.
    const double loss = microcheck_forward(model, drugs, check.objective);
    if (loss < 1e-3) {
      throw ConfigError("gradient_check: margin inactive under this seed, pick another");
    }
  }

  zero_all_grads(model);
  microcheck_backward(model, drugs, check.objective);

  GradCheckReport report;
  for (const auto& [name, array] : named_params(model)) {
    const auto* grad = array.grad_if_allocated();
    auto& values = array.values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + check.fd_step;
      const double up = microcheck_forward(model, drugs, check.objective);
      values[j] = saved - check.fd_step;
      const double down = microcheck_forward(model, drugs, check.objective);
      values[j] = saved;
      const double fd = (up - down) / (2.0 * check.fd_step);
      const double analytic = grad ? (*grad)[j] : 0.0;
      // Relative error with an absolute floor: differences below 1e-8 on
      // near-zero gradients are finite-difference noise, not disagreement.
      const double err =
          std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
      ++report.elements_checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = name;
      }
    }
  }
  return report;
}

}  // namespace ddi
