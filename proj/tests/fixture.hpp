#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddi/data.hpp"
#include "ddi/encoder.hpp"

namespace ddi::testutil {

// Synthetic corpus with planted joint rules, one per side effect. Each drug
// is generated with six independent structural coin flips (one P and one Q
// property per side effect), and a pair is positive for side effect z
// exactly when one drug satisfies P_z and the other satisfies Q_z:
//   rule z: P = contains a bond of type 1+z,
//           Q = contains a marker atom with element 10+z.
// The three channels are structurally identical up to relabeling, so the
// learned score offsets per side effect stay comparable. Neither drug alone
// determines any label; the signal is strictly pairwise.
struct SyntheticFixture {
  std::string drugs_text;
  std::string interactions_text;
  DrugTable drugs;
  SideEffectVocab vocab;
  std::vector<InteractionRecord> positives;
};

SyntheticFixture make_planted_fixture(std::uint64_t seed, std::size_t n_drugs = 60,
                                      double p_rate = 0.35, double q_rate = 0.22);

// The encoder configuration the fixture is meant to be read with (default
// dimensions, bond vocabulary sized for the signature types).
EncoderConfig planted_fixture_encoder_config();

}  // namespace ddi::testutil
