#include "ddi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ddi {

double auroc(const std::vector<ScoredExample>& examples) {
  std::size_t positives = 0;
  for (const auto& e : examples) positives += e.positive ? 1 : 0;
  const std::size_t negatives = examples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("auroc undefined: need at least one positive and one negative, got " +
                    std::to_string(positives) + "/" + std::to_string(negatives));
  }
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return examples[a].score < examples[b].score;
  });
  // average 1-based ranks across tie groups, summed over positives
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           examples[order[j + 1]].score == examples[order[i]].score) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (examples[order[k]].positive) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

std::map<int, double> per_side_effect_auroc(const std::vector<ScoredExample>& examples,
                                            std::vector<int>* skipped) {
  std::map<int, std::vector<ScoredExample>> strata;
  for (const auto& e : examples) strata[e.side_effect_id].push_back(e);
  std::map<int, double> out;
  for (auto& [z, stratum] : strata) {
    std::size_t pos = 0;
    for (const auto& e : stratum) pos += e.positive ? 1 : 0;
    if (pos == 0 || pos == stratum.size()) {
      if (skipped) skipped->push_back(z);
      continue;
    }
    out[z] = auroc(stratum);
  }
  return out;
}

std::vector<ScoredExample> score_examples(const Model& model, const DrugTable& drugs,
                                          const std::vector<InteractionRecord>& records,
                                          Objective objective) {
  std::vector<ScoredExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Tape tape;
    auto enc = encode_pair(tape, drugs.get(r.drug1), drugs.get(r.drug2), model.config,
                           model.encoder, model.stats, Mode::kEval, nullptr);
    double score = 0.0;
    if (objective == Objective::kBinaryMargin) {
      score = -score_binary(tape, enc.drug_x, enc.drug_y, r.side_effect_id, model.binary)
                   .item();
    } else {
      auto probs = predict_multilabel(tape, enc.drug_x, enc.drug_y, model.multilabel);
      score = probs.values()[static_cast<std::size_t>(r.side_effect_id)];
    }
    out.push_back(ScoredExample{r.drug1, r.drug2, r.side_effect_id, score, r.positive});
  }
  return out;
}

std::vector<InteractionRecord> build_eval_set(const std::vector<InteractionRecord>& positives,
                                              const DrugTable& drugs,
                                              const PositiveIndex& full_index, Rng& rng) {
  std::vector<InteractionRecord> out = positives;
  // group by side effect in first-seen order for a stable sampling sequence
  std::vector<int> order;
  std::map<int, std::size_t> counts;
  for (const auto& r : positives) {
    auto [it, fresh] = counts.try_emplace(r.side_effect_id, 0);
    if (fresh) order.push_back(r.side_effect_id);
    ++it->second;
  }
  for (int z : order) {
    Rng stream = rng.derive("side-effect", static_cast<std::uint64_t>(z));
    auto negs = sample_negatives_eval(z, drugs, full_index, counts[z], stream);
    out.insert(out.end(), negs.begin(), negs.end());
  }
  return out;
}

namespace {

std::string triple_of(const InteractionRecord& r) {
  const std::string& lo = r.drug1 <= r.drug2 ? r.drug1 : r.drug2;
  const std::string& hi = r.drug1 <= r.drug2 ? r.drug2 : r.drug1;
  return lo + "\x1f" + hi + "\x1f" + std::to_string(r.side_effect_id);
}

}  // namespace

EvalReport crossvalidate(const DrugTable& drugs,
                         const std::vector<InteractionRecord>& positives,
                         const SideEffectVocab& vocab, const EncoderConfig& encoder_config,
                         const TrainConfig& train_config, double margin, std::size_t k,
                         const Rng& root, bool want_per_side_effect) {
  Rng fold_rng = root.derive("folds");
  auto folds = stratified_kfold(positives, k, fold_rng);
  const PositiveIndex full_index = PositiveIndex::build(positives);

  EvalReport report;
  std::vector<ScoredExample> pooled;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<InteractionRecord> train_set;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_set.insert(train_set.end(), folds[g].begin(), folds[g].end());
    }
    if (train_set.empty() || folds[f].empty()) {
      throw DataError("crossvalidate: fold " + std::to_string(f) +
                      " leaves an empty train or test split");
    }
    // leakage guard: a held-out triple must never appear in the train split
    {
      const PositiveIndex train_index = PositiveIndex::build(train_set);
      for (const auto& r : folds[f]) {
        if (train_index.contains(r.drug1, r.drug2, r.side_effect_id)) {
          throw Error("crossvalidate: test triple " + triple_of(r) +
                      " leaked into its own training split");
        }
      }
    }

    Model model = make_model(encoder_config, vocab.size(), margin);
    model.stats = compute_feature_stats(drugs);
    Rng init_rng = root.derive("init", f);
    xavier_init(model, init_rng);
    AdamState state = AdamState::for_model(model);
    // corruptions are rejected against every known positive, not just the
    // training split's, so a sampled negative can never be a held-out positive
    train_model(model, state, drugs, train_set, train_config, root.derive("train", f),
                &full_index);

    Rng neg_rng = root.derive("eval-negatives", f);
    auto eval_set = build_eval_set(folds[f], drugs, full_index, neg_rng);
    auto scored = score_examples(model, drugs, eval_set, train_config.objective);
    report.fold_aurocs.push_back(auroc(scored));
    pooled.insert(pooled.end(), scored.begin(), scored.end());
  }

  report.scored_examples = pooled.size();
  report.overall_auroc = auroc(pooled);
  double mean = 0.0;
  for (double a : report.fold_aurocs) mean += a;
  mean /= static_cast<double>(report.fold_aurocs.size());
  double var = 0.0;
  for (double a : report.fold_aurocs) var += (a - mean) * (a - mean);
  var /= static_cast<double>(report.fold_aurocs.size());
  report.fold_mean = mean;
  report.fold_std = std::sqrt(var);

  for (const auto& e : pooled) {
    auto& c = report.counts[e.side_effect_id];
    if (e.positive) {
      ++c.positives;
    } else {
      ++c.negatives;
    }
  }
  if (want_per_side_effect) {
    report.per_side_effect = per_side_effect_auroc(pooled, &report.skipped_strata);
  }
  return report;
}

std::string format_eval_report(const EvalReport& report, const SideEffectVocab& vocab) {
  std::ostringstream os;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "[overall]\n";
  os << "auroc = " << fmt(report.overall_auroc) << "\n";
  os << "scored_examples = " << report.scored_examples << "\n";
  if (!report.fold_aurocs.empty()) {
    os << "\n[folds]\n";
    for (std::size_t i = 0; i < report.fold_aurocs.size(); ++i) {
      os << "fold" << i << " = " << fmt(report.fold_aurocs[i]) << "\n";
    }
    os << "mean = " << fmt(report.fold_mean) << "\n";
    os << "std = " << fmt(report.fold_std) << "\n";
  }
  if (!report.per_side_effect.empty() || !report.skipped_strata.empty()) {
    os << "\n[per-side-effect]\n";
    for (const auto& [z, value] : report.per_side_effect) {
      const auto& entry = vocab.entry(z);
      const auto it = report.counts.find(z);
      os << entry.first << " (" << entry.second << ") = " << fmt(value);
      if (it != report.counts.end()) {
        os << "  # positives=" << it->second.positives
           << " negatives=" << it->second.negatives;
      }
      os << "\n";
    }
    for (int z : report.skipped_strata) {
      os << vocab.entry(z).first << " (" << vocab.entry(z).second
         << ") = skipped  # needs both classes\n";
    }
  }
  return os.str();
}

void export_embeddings(const Model& model, const DrugTable& drugs,
                       const std::vector<InteractionRecord>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write embeddings file: " + path);
  const std::size_t d = model.config.feature_dim;
  out << "drug1\tdrug2\tside_effect_id\tlabel";
  for (std::size_t j = 0; j < 2 * d; ++j) out << "\te" << j;
  out << "\n";
  char buf[64];
  for (const auto& r : pairs) {
    Tape tape;
    auto enc = encode_pair(tape, drugs.get(r.drug1), drugs.get(r.drug2), model.config,
                           model.encoder, model.stats, Mode::kEval, nullptr);
    out << r.drug1 << '\t' << r.drug2 << '\t' << r.side_effect_id << '\t'
        << (r.positive ? 1 : 0);
    for (const auto* vec : {&enc.drug_x, &enc.drug_y}) {
      for (double v : vec->values()) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << '\t' << buf;
      }
    }
    out << "\n";
  }
  if (!out) throw ConfigError("failed writing embeddings file: " + path);
}

}  // namespace ddi
