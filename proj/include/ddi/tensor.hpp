#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/rng.hpp"

namespace ddi {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense array of doubles participating in reverse-mode differentiation.
// Copying a DiffArray copies the handle, not the storage; arrays are treated
// as immutable once produced by an op. Gradients accumulate until zeroed.
class DiffArray {
 public:
  DiffArray() = default;

  static DiffArray zeros(Shape shape, bool requires_grad = false);
  static DiffArray full(Shape shape, double value, bool requires_grad = false);
  static DiffArray from_values(Shape shape, std::vector<double> values,
                               bool requires_grad = false);
  static DiffArray scalar(double value, bool requires_grad = false);

  bool valid() const { return static_cast<bool>(state_); }
  const Shape& shape() const { return state_->shape; }
  std::size_t size() const { return state_->values.size(); }
  std::size_t rank() const { return state_->shape.size(); }
  // Row/column view of a rank-1 or rank-2 array (rank-1 counts as one row).
  std::size_t rows() const { return rank() == 2 ? shape()[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? shape()[1] : size(); }

  // The handle is shared-storage: a const DiffArray still exposes mutable
  // values and gradient, exactly like a shared_ptr to mutable state.
  std::vector<double>& values() const { return state_->values; }
  double at(std::size_t i) const { return state_->values[i]; }
  double item() const;

  bool requires_grad() const { return state_->requires_grad; }
  void set_requires_grad(bool b) const { state_->requires_grad = b; }

  // Gradient accumulator; allocated (zero-filled) on first access.
  std::vector<double>& grad() const;
  // All-zero semantics: returns nullptr when never touched.
  const std::vector<double>* grad_if_allocated() const;
  void zero_grad() const;

  bool same_storage(const DiffArray& other) const { return state_ == other.state_; }

 private:
  struct State {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<State> state_;

  explicit DiffArray(std::shared_ptr<State> s) : state_(std::move(s)) {}
};

enum class Mode { kTrain, kEval };

// Ordered record of executed primitives (define-by-run). Rebuilt every
// forward pass; backward() replays it in exact reverse execution order.
// Leaf arrays (parameters, inputs) keep their grads across passes so calls
// accumulate; intermediates created on this tape are re-zeroed first.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- linear algebra
  DiffArray matmul(const DiffArray& a, const DiffArray& b);
  DiffArray transpose(const DiffArray& a);

  // -- elementwise; shapes must match except scalar-with-array
  DiffArray add(const DiffArray& a, const DiffArray& b);
  DiffArray sub(const DiffArray& a, const DiffArray& b);
  DiffArray mul(const DiffArray& a, const DiffArray& b);
  DiffArray add_scalar(const DiffArray& a, double c);
  DiffArray scale(const DiffArray& a, double c);

  // -- nonlinearities
  // Rank-1: softmax over the whole set of scores. Rank-2: per row.
  DiffArray softmax(const DiffArray& scores);
  DiffArray layer_norm(const DiffArray& x, const DiffArray& gain,
                       const DiffArray& bias, double eps);
  DiffArray leaky_relu(const DiffArray& x, double negative_slope);
  DiffArray relu(const DiffArray& x) { return leaky_relu(x, 0.0); }
  DiffArray sigmoid(const DiffArray& x);

  // -- reductions and stitching
  DiffArray sum_all(const DiffArray& x);   // -> scalar
  DiffArray sum_rows(const DiffArray& x);  // [N x d] -> [1 x d]; N may be 0
  DiffArray add_rowvec(const DiffArray& x, const DiffArray& b);
  // Concatenate along the last axis (featurewise for rank-2, plain for rank-1).
  DiffArray concat(std::span<const DiffArray> parts);
  DiffArray concat(const DiffArray& a, const DiffArray& b);

  // -- indexed row movement (embedding lookup / neighborhood aggregation)
  DiffArray row_gather(const DiffArray& table, std::vector<std::size_t> idx);
  DiffArray row_scatter_add(const DiffArray& x, std::vector<std::size_t> dst,
                            std::size_t n_rows);

  // -- regularization and losses
  // Inverted dropout: train mode zeroes entries w.p. p and scales survivors
  // by 1/(1-p); eval mode and p == 0 are the identity.
  DiffArray dropout(const DiffArray& x, double p, Mode mode, Rng& rng);
  // Binary cross-entropy of probabilities against 0/1 targets, summed.
  // Logs are clamped at 1e-12 for saturated probabilities.
  DiffArray bce(const DiffArray& probs, std::vector<double> targets);

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable
  // from `loss`. Repeated calls without zeroing leaf grads accumulate.
  void backward(const DiffArray& loss);

  void clear();
  std::size_t op_count() const { return ops_.size(); }

 private:
  struct OpRecord {
    DiffArray out;
    std::function<void()> back;
  };
  std::vector<OpRecord> ops_;

  void record(DiffArray out, std::function<void()> back);
  DiffArray elementwise(int op, const DiffArray& a, const DiffArray& b);
};

}  // namespace ddi
