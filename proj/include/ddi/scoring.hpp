#pragma once

#include <vector>

#include "ddi/tensor.hpp"

namespace ddi {

// Translational scoring head for binary classification.
struct BinaryHeadParams {
  DiffArray head_map;  // M_h, [d x d]
  DiffArray tail_map;  // M_t, [d x d]
  DiffArray se_embed;  // one learnable d-vector per side effect, [S x d]
  double margin = 1.0;
};

// Sigmoid prediction layer over all side effects at once.
struct MultiLabelHeadParams {
  DiffArray proj_W;  // [2d x S]
  DiffArray proj_b;  // [S]
};

// Symmetrized squared distance in the mapped space:
//   f = |M_h dx + se_z - M_t dy|^2 + |M_h dy + se_z - M_t dx|^2.
// Nonnegative; exactly symmetric under swapping dx and dy. Lower = more
// likely, so the classifier score of a triple is -f.
DiffArray score_binary(Tape& tape, const DiffArray& drug_x, const DiffArray& drug_y,
                       int side_effect_id, const BinaryHeadParams& head);

// Margin ranking loss max(0, margin + f_pos - f_neg). The alternative
// printed form max(0, margin - f_pos - f_neg) is kept behind a flag for
// fidelity experiments; it does not rank and is off by default.
DiffArray margin_loss(Tape& tape, const DiffArray& f_pos, const DiffArray& f_neg,
                      double margin, bool printed_form = false);

// sigmoid(W_p [dx || dy] + b_p): one probability per side effect, in (0,1).
// Deliberately asymmetric in the pair, as defined.
DiffArray predict_multilabel(Tape& tape, const DiffArray& drug_x, const DiffArray& drug_y,
                             const MultiLabelHeadParams& head);

// Summed binary cross-entropy against 0/1 targets (clamped logs).
DiffArray bce_loss(Tape& tape, const DiffArray& probs, std::vector<double> targets);

}  // namespace ddi
