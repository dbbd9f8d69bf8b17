#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddi/model.hpp"
#include "ddi/train.hpp"

namespace ddi {

// One classifier decision: higher score = more likely interaction
// (-f for the binary head, y_xy^z for the multi-label head).
struct ScoredExample {
  std::string drug1;
  std::string drug2;
  int side_effect_id = 0;
  double score = 0.0;
  bool positive = false;
};

// Area under the ROC curve via the Mann-Whitney statistic with 0.5 credit
// for ties, computed by sort-and-rank in O(n log n). Needs both classes.
double auroc(const std::vector<ScoredExample>& examples);

// Per-stratum AUROC; strata lacking both classes are skipped and listed in
// `skipped` when provided.
std::map<int, double> per_side_effect_auroc(const std::vector<ScoredExample>& examples,
                                            std::vector<int>* skipped = nullptr);

struct StratumCount {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct EvalReport {
  double overall_auroc = 0.0;  // pooled over every scored example
  std::vector<double> fold_aurocs;
  double fold_mean = 0.0;
  double fold_std = 0.0;
  std::map<int, double> per_side_effect;
  std::vector<int> skipped_strata;
  std::map<int, StratumCount> counts;
  std::size_t scored_examples = 0;
};

std::string format_eval_report(const EvalReport& report, const SideEffectVocab& vocab);

// Scores records under a trained model in eval mode.
std::vector<ScoredExample> score_examples(const Model& model, const DrugTable& drugs,
                                          const std::vector<InteractionRecord>& records,
                                          Objective objective);

// Positives plus per-side-effect 1:1 sampled negatives (filtered against the
// whole positive set, per the evaluation protocol).
std::vector<InteractionRecord> build_eval_set(const std::vector<InteractionRecord>& positives,
                                              const DrugTable& drugs,
                                              const PositiveIndex& full_index, Rng& rng);

// Stratified k-fold crossvalidation: per fold, train a fresh model on the
// other folds and score the held-out positives against sampled negatives.
// Never trains on a held-out triple (asserted inside the loop).
EvalReport crossvalidate(const DrugTable& drugs,
                         const std::vector<InteractionRecord>& positives,
                         const SideEffectVocab& vocab, const EncoderConfig& encoder_config,
                         const TrainConfig& train_config, double margin, std::size_t k,
                         const Rng& root, bool want_per_side_effect);

// One row per pair: drug1, drug2, side_effect_id, label, then the 2d values
// of [d_x || d_y] (eval mode). Header line included.
void export_embeddings(const Model& model, const DrugTable& drugs,
                       const std::vector<InteractionRecord>& pairs, const std::string& path);

}  // namespace ddi
