#include "ddi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace ddi {

namespace {

std::size_t shape_product(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_rank2(const DiffArray& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 array, got " +
                         shape_str(a.shape()));
  }
}

constexpr double kBceClamp = 1e-12;

constexpr int kOpAdd = 0, kOpSub = 1, kOpMul = 2;

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

DiffArray DiffArray::zeros(Shape shape, bool requires_grad) {
  auto st = std::make_shared<State>();
  st->values.assign(shape_product(shape), 0.0);
  st->shape = std::move(shape);
  st->requires_grad = requires_grad;
  return DiffArray(std::move(st));
}

DiffArray DiffArray::full(Shape shape, double value, bool requires_grad) {
  auto st = std::make_shared<State>();
  st->values.assign(shape_product(shape), value);
  st->shape = std::move(shape);
  st->requires_grad = requires_grad;
  return DiffArray(std::move(st));
}

DiffArray DiffArray::from_values(Shape shape, std::vector<double> values,
                                 bool requires_grad) {
  if (shape_product(shape) != values.size()) {
    throw DimensionError("from_values: shape " + shape_str(shape) + " wants " +
                         std::to_string(shape_product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto st = std::make_shared<State>();
  st->shape = std::move(shape);
  st->values = std::move(values);
  st->requires_grad = requires_grad;
  return DiffArray(std::move(st));
}

DiffArray DiffArray::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

double DiffArray::item() const {
  if (size() != 1) {
    throw DomainError("item() on non-scalar array " + shape_str(shape()));
  }
  return state_->values[0];
}

std::vector<double>& DiffArray::grad() const {
  if (state_->grad.size() != state_->values.size()) {
    state_->grad.assign(state_->values.size(), 0.0);
  }
  return state_->grad;
}

const std::vector<double>* DiffArray::grad_if_allocated() const {
  if (state_->grad.size() != state_->values.size()) return nullptr;
  return &state_->grad;
}

void DiffArray::zero_grad() const {
  if (!state_->grad.empty()) {
    std::fill(state_->grad.begin(), state_->grad.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(DiffArray out, std::function<void()> back) {
  ops_.push_back(OpRecord{std::move(out), std::move(back)});
}

DiffArray Tape::matmul(const DiffArray& a, const DiffArray& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  DiffArray out = DiffArray::zeros({m, n}, a.requires_grad() || b.requires_grad());
  {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = av[i * k + kk];
        const double* brow = bv.data() + kk * n;
        double* orow = ov.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  if (out.requires_grad()) {
    record(out, [a, b, out, m, k, n]() mutable {
      const auto& g = *out.grad_if_allocated();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        const auto& bv = b.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* grow = g.data() + i * n;
            const double* brow = bv.data() + kk * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + kk] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        const auto& av = a.values();
        for (std::size_t kk = 0; kk < k; ++kk) {
          for (std::size_t i = 0; i < m; ++i) {
            const double aik = av[i * k + kk];
            const double* grow = g.data() + i * n;
            double* gbrow = gb.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return out;
}

DiffArray Tape::transpose(const DiffArray& a) {
  check_rank2(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  DiffArray out = DiffArray::zeros({n, m}, a.requires_grad());
  {
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
  }
  if (out.requires_grad()) {
    record(out, [a, out, m, n]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

DiffArray Tape::elementwise(int op, const DiffArray& a, const DiffArray& b) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (a.shape() != b.shape() && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const DiffArray& big = (a_scalar && !b_scalar) ? b : a;
  const std::size_t n = big.size();
  // Stride 0 re-reads the single scalar entry; stride 1 walks the array.
  const std::size_t sa = (a_scalar && n > 1) ? 0 : 1;
  const std::size_t sb = (b_scalar && n > 1) ? 0 : 1;
  DiffArray out = DiffArray::zeros(big.shape(), a.requires_grad() || b.requires_grad());
  {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    switch (op) {
      case kOpAdd:
        for (std::size_t i = 0; i < n; ++i) ov[i] = av[i * sa] + bv[i * sb];
        break;
      case kOpSub:
        for (std::size_t i = 0; i < n; ++i) ov[i] = av[i * sa] - bv[i * sb];
        break;
      case kOpMul:
        for (std::size_t i = 0; i < n; ++i) ov[i] = av[i * sa] * bv[i * sb];
        break;
    }
  }
  if (out.requires_grad()) {
    record(out, [op, a, b, out, n, sa, sb]() mutable {
      const auto& g = *out.grad_if_allocated();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        if (op == kOpMul) {
          for (std::size_t i = 0; i < n; ++i) ga[i * sa] += g[i] * b.values()[i * sb];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i * sa] += g[i];
        }
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        switch (op) {
          case kOpAdd:
            for (std::size_t i = 0; i < n; ++i) gb[i * sb] += g[i];
            break;
          case kOpSub:
            for (std::size_t i = 0; i < n; ++i) gb[i * sb] -= g[i];
            break;
          case kOpMul:
            for (std::size_t i = 0; i < n; ++i) gb[i * sb] += g[i] * a.values()[i * sa];
            break;
        }
      }
    });
  }
  return out;
}

DiffArray Tape::add(const DiffArray& a, const DiffArray& b) { return elementwise(kOpAdd, a, b); }
DiffArray Tape::sub(const DiffArray& a, const DiffArray& b) { return elementwise(kOpSub, a, b); }
DiffArray Tape::mul(const DiffArray& a, const DiffArray& b) { return elementwise(kOpMul, a, b); }

DiffArray Tape::add_scalar(const DiffArray& a, double c) {
  DiffArray out = DiffArray::zeros(a.shape(), a.requires_grad());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] + c;
  if (out.requires_grad()) {
    record(out, [a, out, n]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    });
  }
  return out;
}

DiffArray Tape::scale(const DiffArray& a, double c) {
  DiffArray out = DiffArray::zeros(a.shape(), a.requires_grad());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * c;
  if (out.requires_grad()) {
    record(out, [a, out, n, c]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

DiffArray Tape::softmax(const DiffArray& scores) {
  if (scores.size() == 0 || scores.cols() == 0) {
    throw DomainError("softmax over an empty set of scores");
  }
  if (scores.rank() > 2) {
    throw DimensionError("softmax: expected rank-1 or rank-2, got " +
                         shape_str(scores.shape()));
  }
  const std::size_t rows = scores.rows(), cols = scores.cols();
  DiffArray out = DiffArray::zeros(scores.shape(), scores.requires_grad());
  {
    const auto& xv = scores.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* x = xv.data() + r * cols;
      double* o = ov.data() + r * cols;
      double mx = x[0];
      for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        o[j] = std::exp(x[j] - mx);
        sum += o[j];
      }
      for (std::size_t j = 0; j < cols; ++j) o[j] /= sum;
    }
  }
  if (out.requires_grad()) {
    record(out, [scores, out, rows, cols]() mutable {
      const auto& g = *out.grad_if_allocated();
      const auto& s = out.values();
      auto& gx = scores.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * cols;
        const double* sr = s.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * sr[j];
        double* gxr = gx.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) gxr[j] += sr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

DiffArray Tape::layer_norm(const DiffArray& x, const DiffArray& gain,
                           const DiffArray& bias, double eps) {
  if (eps < 0.0) throw ConfigError("layer_norm: eps must be nonnegative");
  const std::size_t rows = x.rows(), d = x.cols();
  if (d < 1) throw DomainError("layer_norm over zero features");
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match feature width " +
                         std::to_string(d));
  }
  DiffArray out = DiffArray::zeros(x.shape(), x.requires_grad() || gain.requires_grad() ||
                                                  bias.requires_grad());
  // Normalized rows are reused by the backward pass.
  auto norm = std::make_shared<std::vector<double>>(x.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  {
    const auto& xv = x.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = xv.data() + r * d;
      double mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) mean += xr[j];
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double c = xr[j] - mean;
        var += c * c;
      }
      var /= static_cast<double>(d);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_sigma)[r] = is;
      double* nr = norm->data() + r * d;
      double* orow = ov.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) {
        nr[j] = (xr[j] - mean) * is;
        orow[j] = gain.values()[j] * nr[j] + bias.values()[j];
      }
    }
  }
  if (out.requires_grad()) {
    record(out, [x, gain, bias, out, norm, inv_sigma, rows, d]() mutable {
      const auto& g = *out.grad_if_allocated();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * d;
        const double* nr = norm->data() + r * d;
        if (gain.requires_grad()) {
          auto& gg = gain.grad();
          for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * nr[j];
        }
        if (bias.requires_grad()) {
          auto& gb = bias.grad();
          for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
        }
        if (x.requires_grad()) {
          auto& gx = x.grad();
          double mean_gy = 0.0, mean_gyn = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gy = gr[j] * gain.values()[j];
            mean_gy += gy;
            mean_gyn += gy * nr[j];
          }
          mean_gy /= static_cast<double>(d);
          mean_gyn /= static_cast<double>(d);
          const double is = (*inv_sigma)[r];
          double* gxr = gx.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gy = gr[j] * gain.values()[j];
            gxr[j] += is * (gy - mean_gy - nr[j] * mean_gyn);
          }
        }
      }
    });
  }
  return out;
}

DiffArray Tape::leaky_relu(const DiffArray& x, double negative_slope) {
  DiffArray out = DiffArray::zeros(x.shape(), x.requires_grad());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.values()[i];
    out.values()[i] = v > 0.0 ? v : negative_slope * v;
  }
  if (out.requires_grad()) {
    record(out, [x, out, n, negative_slope]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < n; ++i) {
        gx[i] += g[i] * (x.values()[i] > 0.0 ? 1.0 : negative_slope);
      }
    });
  }
  return out;
}

DiffArray Tape::sigmoid(const DiffArray& x) {
  DiffArray out = DiffArray::zeros(x.shape(), x.requires_grad());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = stable_sigmoid(x.values()[i]);
  if (out.requires_grad()) {
    record(out, [x, out, n]() mutable {
      const auto& g = *out.grad_if_allocated();
      const auto& s = out.values();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
  }
  return out;
}

DiffArray Tape::sum_all(const DiffArray& x) {
  DiffArray out = DiffArray::zeros({1}, x.requires_grad());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  out.values()[0] = acc;
  if (out.requires_grad()) {
    record(out, [x, out]() mutable {
      const double g = (*out.grad_if_allocated())[0];
      auto& gx = x.grad();
      for (double& v : gx) v += g;
    });
  }
  return out;
}

DiffArray Tape::sum_rows(const DiffArray& x) {
  check_rank2(x, "sum_rows");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  DiffArray out = DiffArray::zeros({1, d}, x.requires_grad());
  {
    const auto& xv = x.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) ov[j] += xv[r * d + j];
  }
  if (out.requires_grad()) {
    record(out, [x, out, n, d]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& gx = x.grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[j];
    });
  }
  return out;
}

DiffArray Tape::add_rowvec(const DiffArray& x, const DiffArray& b) {
  check_rank2(x, "add_rowvec");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  if (b.size() != d) {
    throw DimensionError("add_rowvec: row vector " + shape_str(b.shape()) +
                         " does not match width " + std::to_string(d));
  }
  DiffArray out = DiffArray::zeros(x.shape(), x.requires_grad() || b.requires_grad());
  {
    const auto& xv = x.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) ov[r * d + j] = xv[r * d + j] + bv[j];
  }
  if (out.requires_grad()) {
    record(out, [x, b, out, n, d]() mutable {
      const auto& g = *out.grad_if_allocated();
      if (x.requires_grad()) {
        auto& gx = x.grad();
        for (std::size_t i = 0; i < n * d; ++i) gx[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
      }
    });
  }
  return out;
}

DiffArray Tape::concat(std::span<const DiffArray> parts) {
  if (parts.empty()) throw DomainError("concat of zero parts");
  const std::size_t rank = parts.front().rank();
  const std::size_t rows = parts.front().rows();
  std::size_t total_cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rank() != rank || p.rows() != rows) {
      throw DimensionError("concat: leading dimensions disagree, " +
                           shape_str(parts.front().shape()) + " vs " + shape_str(p.shape()));
    }
    total_cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Shape out_shape = rank == 2 ? Shape{rows, total_cols} : Shape{total_cols};
  DiffArray out = DiffArray::zeros(out_shape, rg);
  {
    auto& ov = out.values();
    std::size_t col_off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < pc; ++j)
          ov[r * total_cols + col_off + j] = p.values()[r * pc + j];
      col_off += pc;
    }
  }
  if (out.requires_grad()) {
    std::vector<DiffArray> owned(parts.begin(), parts.end());
    record(out, [owned = std::move(owned), out, rows, total_cols]() mutable {
      const auto& g = *out.grad_if_allocated();
      std::size_t col_off = 0;
      for (auto& p : owned) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < pc; ++j)
              gp[r * pc + j] += g[r * total_cols + col_off + j];
        }
        col_off += pc;
      }
    });
  }
  return out;
}

DiffArray Tape::concat(const DiffArray& a, const DiffArray& b) {
  const DiffArray parts[2] = {a, b};
  return concat(std::span<const DiffArray>(parts, 2));
}

DiffArray Tape::row_gather(const DiffArray& table, std::vector<std::size_t> idx) {
  check_rank2(table, "row_gather");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (std::size_t r : idx) {
    if (r >= v) {
      throw DataError("row_gather: index " + std::to_string(r) + " out of range for table " +
                      shape_str(table.shape()));
    }
  }
  const std::size_t k = idx.size();
  DiffArray out = DiffArray::zeros({k, d}, table.requires_grad());
  {
    const auto& tv = table.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t j = 0; j < d; ++j) ov[r * d + j] = tv[idx[r] * d + j];
  }
  if (out.requires_grad()) {
    record(out, [table, out, idx = std::move(idx), d]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& gt = table.grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) gt[idx[r] * d + j] += g[r * d + j];
    });
  }
  return out;
}

DiffArray Tape::row_scatter_add(const DiffArray& x, std::vector<std::size_t> dst,
                                std::size_t n_rows) {
  check_rank2(x, "row_scatter_add");
  const std::size_t e = x.shape()[0], d = x.shape()[1];
  if (dst.size() != e) {
    throw DimensionError("row_scatter_add: " + std::to_string(dst.size()) +
                         " destinations for " + std::to_string(e) + " rows");
  }
  for (std::size_t r : dst) {
    if (r >= n_rows) {
      throw DataError("row_scatter_add: destination " + std::to_string(r) +
                      " out of range for " + std::to_string(n_rows) + " rows");
    }
  }
  DiffArray out = DiffArray::zeros({n_rows, d}, x.requires_grad());
  {
    const auto& xv = x.values();
    auto& ov = out.values();
    for (std::size_t r = 0; r < e; ++r)
      for (std::size_t j = 0; j < d; ++j) ov[dst[r] * d + j] += xv[r * d + j];
  }
  if (out.requires_grad()) {
    record(out, [x, out, dst = std::move(dst), d]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& gx = x.grad();
      for (std::size_t r = 0; r < dst.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[dst[r] * d + j];
    });
  }
  return out;
}

DiffArray Tape::dropout(const DiffArray& x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  const std::size_t n = x.size();
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep_scale;
  }
  DiffArray out = DiffArray::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] * (*mask)[i];
  if (out.requires_grad()) {
    record(out, [x, out, mask, n]() mutable {
      const auto& g = *out.grad_if_allocated();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

DiffArray Tape::bce(const DiffArray& probs, std::vector<double> targets) {
  const std::size_t n = probs.size();
  if (targets.size() != n) {
    throw DimensionError("bce: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " probabilities");
  }
  DiffArray out = DiffArray::zeros({1}, probs.requires_grad());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs.values()[i], kBceClamp, 1.0 - kBceClamp);
    acc -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  out.values()[0] = acc;
  if (out.requires_grad()) {
    record(out, [probs, out, targets = std::move(targets), n]() mutable {
      const double g = (*out.grad_if_allocated())[0];
      auto& gp = probs.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double p = probs.values()[i];
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) continue;  // clamp region
        gp[i] += g * (-targets[i] / p + (1.0 - targets[i]) / (1.0 - p));
      }
    });
  }
  return out;
}

void Tape::backward(const DiffArray& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw DomainError("backward: loss must be a scalar");
  }
  if (ops_.empty()) {
    throw DomainError("backward: tape is empty");
  }
  // Intermediates produced on this tape restart from zero each pass; leaf
  // gradients are left alone so repeated calls accumulate.
  for (auto& op : ops_) {
    op.out.grad();  // allocate
    op.out.zero_grad();
  }
  DiffArray seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    it->back();
  }
}

void Tape::clear() { ops_.clear(); }

}  // namespace ddi
