#include "ddi/scoring.hpp"

namespace ddi {

DiffArray score_binary(Tape& tape, const DiffArray& drug_x, const DiffArray& drug_y,
                       int side_effect_id, const BinaryHeadParams& head) {
  const std::size_t vocab = head.se_embed.shape()[0];
  if (side_effect_id < 0 || static_cast<std::size_t>(side_effect_id) >= vocab) {
    throw DataError("side effect id " + std::to_string(side_effect_id) +
                    " outside embedding table of size " + std::to_string(vocab));
  }
  auto se = tape.row_gather(head.se_embed, {static_cast<std::size_t>(side_effect_id)});

  auto residual = [&](const DiffArray& a, const DiffArray& b) {
    // M_h a + se_z - M_t b
    auto r = tape.sub(tape.add(tape.matmul(a, head.head_map), se),
                      tape.matmul(b, head.tail_map));
    return tape.sum_all(tape.mul(r, r));
  };
  return tape.add(residual(drug_x, drug_y), residual(drug_y, drug_x));
}

DiffArray margin_loss(Tape& tape, const DiffArray& f_pos, const DiffArray& f_neg,
                      double margin, bool printed_form) {
  if (printed_form) {
    return tape.relu(tape.add_scalar(tape.scale(tape.add(f_pos, f_neg), -1.0), margin));
  }
  return tape.relu(tape.add_scalar(tape.sub(f_pos, f_neg), margin));
}

DiffArray predict_multilabel(Tape& tape, const DiffArray& drug_x, const DiffArray& drug_y,
                             const MultiLabelHeadParams& head) {
  auto joint = tape.concat(drug_x, drug_y);
  return tape.sigmoid(tape.add_rowvec(tape.matmul(joint, head.proj_W), head.proj_b));
}

DiffArray bce_loss(Tape& tape, const DiffArray& probs, std::vector<double> targets) {
  return tape.bce(probs, std::move(targets));
}

}  // namespace ddi
