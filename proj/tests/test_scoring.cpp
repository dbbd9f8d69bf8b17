#include <cmath>

#include "ddi/scoring.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ddi;
using testutil::fd_gradient;
using testutil::max_rel_error;
using testutil::random_array;

namespace {

BinaryHeadParams identity_head(std::size_t d, std::size_t vocab) {
  BinaryHeadParams head;
  head.head_map = DiffArray::zeros({d, d});
  head.tail_map = DiffArray::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    head.head_map.values()[i * d + i] = 1.0;
    head.tail_map.values()[i * d + i] = 1.0;
  }
  head.se_embed = DiffArray::zeros({vocab, d});
  return head;
}

BinaryHeadParams random_head(std::size_t d, std::size_t vocab, Rng& rng) {
  BinaryHeadParams head;
  head.head_map = random_array({d, d}, rng, 0.8, false);
  head.tail_map = random_array({d, d}, rng, 0.8, false);
  head.se_embed = random_array({vocab, d}, rng, 0.5, false);
  return head;
}

}  // namespace

TEST_CASE("score is zero when both residuals vanish") {
  auto head = identity_head(4, 2);
  auto v = DiffArray::from_values({1, 4}, {0.3, -1.2, 0.7, 2.0});
  Tape tape;
  CHECK(score_binary(tape, v, v, 0, head).item() == 0.0);
}

TEST_CASE("score on the d=2 toy example") {
  // M_h = I, M_t = 0, dx = (1,0), dy = (0,1), se = 0  ->  1 + 1
  BinaryHeadParams head;
  head.head_map = DiffArray::from_values({2, 2}, {1, 0, 0, 1});
  head.tail_map = DiffArray::zeros({2, 2});
  head.se_embed = DiffArray::zeros({1, 2});
  auto dx = DiffArray::from_values({1, 2}, {1, 0});
  auto dy = DiffArray::from_values({1, 2}, {0, 1});
  Tape tape;
  CHECK(score_binary(tape, dx, dy, 0, head).item() == 2.0);
}

TEST_CASE("score is symmetric under pair swap, bitwise, and nonnegative") {
  Rng rng(31);
  auto head = random_head(6, 4, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    auto dx = random_array({1, 6}, rng, 2.0, false);
    auto dy = random_array({1, 6}, rng, 2.0, false);
    const int z = static_cast<int>(rng.uniform_int(4));
    Tape tape;
    const double fwd = score_binary(tape, dx, dy, z, head).item();
    const double rev = score_binary(tape, dy, dx, z, head).item();
    CHECK(fwd == rev);  // exact
    CHECK(fwd >= 0.0);
  }
}

TEST_CASE("score rejects out-of-range side effects") {
  auto head = identity_head(4, 2);
  auto v = DiffArray::zeros({1, 4});
  Tape tape;
  CHECK_THROWS_AS(score_binary(tape, v, v, 2, head), DataError);
  CHECK_THROWS_AS(score_binary(tape, v, v, -1, head), DataError);
}

TEST_CASE("margin loss point values") {
  Tape tape;
  auto f = [&](double pos, double neg, double gamma) {
    return margin_loss(tape, DiffArray::scalar(pos), DiffArray::scalar(neg), gamma).item();
  };
  CHECK(f(0, 2, 1) == 0.0);    // margin satisfied
  CHECK(f(5, 5, 1) == 1.0);    // tie penalized by the full margin
  CHECK(f(3, 1, 1) == 3.0);    // 1 + 3 - 1

  // printed form kept behind the flag
  auto printed = margin_loss(tape, DiffArray::scalar(0.2), DiffArray::scalar(0.3), 1.0, true);
  CHECK(printed.item() == doctest::Approx(0.5));
}

TEST_CASE("active margin feeds gradient into both scores") {
  Tape tape;
  auto f_pos = DiffArray::scalar(3.0, true);
  auto f_neg = DiffArray::scalar(1.0, true);
  auto loss = margin_loss(tape, f_pos, f_neg, 1.0);
  tape.backward(loss);
  CHECK(f_pos.grad()[0] == 1.0);
  CHECK(f_neg.grad()[0] == -1.0);

  // inactive hinge: no gradient
  f_pos.zero_grad();
  f_neg.zero_grad();
  Tape tape2;
  auto quiet = margin_loss(tape2, DiffArray::scalar(0.0, true), f_neg, 0.5);
  tape2.backward(quiet);
  CHECK(f_neg.grad()[0] == 0.0);
}

TEST_CASE("multilabel head produces probabilities of width S") {
  const std::size_t d = 4, s = 964;
  MultiLabelHeadParams head;
  head.proj_W = DiffArray::zeros({2 * d, s});
  head.proj_b = DiffArray::zeros({s});
  auto dx = DiffArray::from_values({1, d}, {1, 2, 3, 4});
  auto dy = DiffArray::from_values({1, d}, {4, 3, 2, 1});
  Tape tape;
  auto probs = predict_multilabel(tape, dx, dy, head);
  CHECK(probs.size() == 964);
  for (double v : probs.values()) CHECK(v == 0.5);  // sigma(0)
}

TEST_CASE("multilabel head is asymmetric in the pair") {
  Rng rng(17);
  const std::size_t d = 4, s = 6;
  MultiLabelHeadParams head;
  head.proj_W = random_array({2 * d, s}, rng, 0.9, false);
  head.proj_b = random_array({s}, rng, 0.2, false);
  auto dx = random_array({1, d}, rng, 1.0, false);
  auto dy = random_array({1, d}, rng, 1.0, false);
  Tape tape;
  auto ab = predict_multilabel(tape, dx, dy, head);
  auto ba = predict_multilabel(tape, dy, dx, head);
  CHECK(ab.values() != ba.values());
}

TEST_CASE("bce gradient w.r.t. logits equals probability minus target") {
  Rng rng(19);
  auto logits = random_array({5}, rng, 2.0);
  const std::vector<double> targets = {1, 0, 0, 1, 0};

  Tape tape;
  auto probs = tape.sigmoid(logits);
  auto loss = bce_loss(tape, probs, targets);
  tape.backward(loss);

  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(logits.grad()[i] ==
          doctest::Approx(probs.values()[i] - targets[i]).epsilon(1e-12));
  }

  auto fd = fd_gradient(logits, [&]() {
    Tape t;
    return bce_loss(t, t.sigmoid(logits), targets).item();
  });
  CHECK(max_rel_error(logits.grad(), fd) < 1e-5);
}

TEST_CASE("bce loss equality only at clamp-perfect prediction") {
  Tape tape;
  auto nearly = DiffArray::from_values({2}, {1.0 - 1e-13, 1e-13});
  CHECK(bce_loss(tape, nearly, {1, 0}).item() < 1e-6);
  auto wrong = DiffArray::from_values({2}, {0.5, 0.5});
  CHECK(bce_loss(tape, wrong, {1, 0}).item() > 1.0);
}
