#pragma once

#include "ddi/runconfig.hpp"

namespace ddi {

// Exit codes shared by every command:
//   0 success, 2 configuration or data problem, 3 numerical abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Trains a model and writes checkpoint.bin, loss_trace.tsv and manifest.cfg
// into the output directory.
int cmd_train(const RunConfig& config);

// Scores data under a checkpoint (eval.mode = single) or runs stratified
// k-fold crossvalidation from scratch (eval.mode = crossvalidate); writes
// eval_report.txt and prints the overall AUROC as the final stdout line.
int cmd_eval(const RunConfig& config);

// Writes predictions.tsv for a pairs file: (drug1, drug2, concept) rows for
// the binary head, (drug1, drug2) rows for the multi-label head.
int cmd_predict(const RunConfig& config);

// Writes embeddings.tsv for a labeled pairs file (drug1, drug2, concept, label).
int cmd_export_embeddings(const RunConfig& config);

}  // namespace ddi
