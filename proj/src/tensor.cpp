#include "cala/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <unordered_set>

namespace cala {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;
using BackwardFn = std::function<void(detail::Node&)>;

void check_finite(const std::vector<double>& v, const char* op, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NonFiniteError(fmt::format("non-finite value {} at flat index {} in output of '{}' ({}x{})",
                                       v[i], i, op, rows, cols));
    }
  }
}

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values, const char* op,
                   std::vector<NodePtr> parents, BackwardFn fn) {
  check_finite(values, op, rows, cols);
  auto node = std::make_shared<detail::Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->op = op;
  node->is_leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, a.rows(), a.cols(), b.rows(),
                                 b.cols()));
  }
}

void require_defined(const Tensor& a, const char* op) {
  if (!a.defined()) throw std::invalid_argument(fmt::format("{}: undefined tensor", op));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (rows == 0 || cols == 0) {
    throw ShapeError(fmt::format("tensor dimensions must be positive, got {}x{}", rows, cols));
  }
  if (values.size() != rows * cols) {
    throw ShapeError(fmt::format("tensor {}x{} needs {} values, got {}", rows, cols, rows * cols,
                                 values.size()));
  }
  check_finite(values, "leaf", rows, cols);
  auto node = std::make_shared<detail::Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from(1, 1, {v}, requires_grad); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from(n, n, std::move(v));
}

Tensor Tensor::ones(std::size_t rows, std::size_t cols) {
  return from(rows, cols, std::vector<double>(rows * cols, 1.0));
}

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf) throw std::logic_error("mutable_data() on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw ShapeError(fmt::format("item() needs a 1x1 tensor, got {}x{}", rows(), cols()));
  }
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  node_->requires_grad = on;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

void Tensor::backward() {
  if (!is_scalar()) {
    throw std::logic_error(
        fmt::format("backward() needs a scalar loss, got {}x{}", rows(), cols()));
  }
  if (!node_->requires_grad) return;

  // Post-order DFS gives a topological order with inputs first.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf || !n->backward_fn) continue;
    n->backward_fn(*n);
  }

  // Free the recorded graph; only leaves keep their gradients.
  for (detail::Node* n : order) {
    if (n->is_leaf) continue;
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: inner dimensions disagree ({}x{} x {}x{})", a.rows(),
                                 a.cols(), b.rows(), b.cols()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  auto an = a.node(), bn = b.node();
  return make_result(m, n, std::move(out), "matmul", {an, bn}, [an, bn, m, k, n](detail::Node& self) {
    const auto& G = self.grad;
    if (an->requires_grad) {
      auto& ga = an->grad_buffer();
      const auto& Bv = bn->value;
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * Bv[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      const auto& Av = an->value;
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), "add", {an, bn}, [an, bn](detail::Node& self) {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), "sub", {an, bn}, [an, bn](detail::Node& self) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), "mul", {an, bn}, [an, bn](detail::Node& self) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  auto an = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), "scale", {an}, [an, s](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  auto an = a.node();
  return make_result(c, r, std::move(out), "transpose", {an}, [an, r, c](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
  auto an = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), "exp", {an}, [an](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.data()[i]);
  auto an = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), "log", {an}, [an](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / an->value[i];
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto an = a.node();
  return make_result(1, 1, {s}, "sum", {an}, [an](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (double& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a, Axis axis) {
  require_defined(a, "mean");
  const std::size_t r = a.rows(), c = a.cols();
  auto an = a.node();
  if (axis == Axis::Rows) {
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += a.data()[i * c + j];
    for (double& v : out) v /= static_cast<double>(r);
    return make_result(1, c, std::move(out), "mean_rows", {an}, [an, r, c](detail::Node& self) {
      auto& g = an->grad_buffer();
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j] * inv;
    });
  }
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += a.data()[i * c + j];
    out[i] /= static_cast<double>(c);
  }
  return make_result(r, 1, std::move(out), "mean_cols", {an}, [an, r, c](detail::Node& self) {
    auto& g = an->grad_buffer();
    const double inv = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i] * inv;
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) {
    require_defined(p, "concat_rows");
    if (p.cols() != c) {
      throw ShapeError(fmt::format("concat_rows: column count {} vs {}", p.cols(), c));
    }
    r += p.rows();
    nodes.push_back(p.node());
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result(r, c, std::move(out), "concat_rows", nodes, [nodes](detail::Node& self) {
    std::size_t offset = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (p.rows() != r) {
      throw ShapeError(fmt::format("concat_cols: row count {} vs {}", p.rows(), r));
    }
    c += p.cols();
    nodes.push_back(p.node());
  }
  std::vector<double> out(r * c);
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out[i * c + col0 + j] = p.data()[i * p.cols() + j];
    col0 += p.cols();
  }
  return make_result(r, c, std::move(out), "concat_cols", nodes, [nodes, r, c](detail::Node& self) {
    std::size_t col = 0;
    for (const auto& p : nodes) {
      const std::size_t pc = p->cols;
      if (p->requires_grad) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += self.grad[i * c + col + j];
      }
      col += pc;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_defined(a, "slice_rows");
  if (count == 0 || begin + count > a.rows()) {
    throw ShapeError(
        fmt::format("slice_rows: [{}, {}) out of range for {} rows", begin, begin + count, a.rows()));
  }
  const std::size_t c = a.cols();
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                          a.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  auto an = a.node();
  return make_result(count, c, std::move(out), "slice_rows", {an}, [an, begin, c](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_defined(a, "slice_cols");
  if (count == 0 || begin + count > a.cols()) {
    throw ShapeError(
        fmt::format("slice_cols: [{}, {}) out of range for {} cols", begin, begin + count, a.cols()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a.data()[i * c + begin + j];
  auto an = a.node();
  return make_result(r, count, std::move(out), "slice_cols", {an},
                     [an, begin, count, r, c](detail::Node& self) {
                       auto& g = an->grad_buffer();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           g[i * c + begin + j] += self.grad[i * count + j];
                     });
}

Tensor diagonal(const Tensor& a) {
  require_defined(a, "diagonal");
  if (a.rows() != a.cols()) {
    throw ShapeError(fmt::format("diagonal: square matrix required, got {}x{}", a.rows(), a.cols()));
  }
  const std::size_t n = a.rows();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i * n + i];
  auto an = a.node();
  return make_result(n, 1, std::move(out), "diagonal", {an}, [an, n](detail::Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) g[i * n + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_defined(table, "gather_rows");
  if (ids.empty()) throw ShapeError("gather_rows: empty id list");
  const std::size_t c = table.cols();
  std::vector<double> out(ids.size() * c);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw std::out_of_range(
          fmt::format("gather_rows: id {} outside table of {} rows", ids[i], table.rows()));
    }
    const auto row = table.data().subspan(static_cast<std::size_t>(ids[i]) * c, c);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  auto tn = table.node();
  std::vector<int> idv(ids.begin(), ids.end());
  return make_result(ids.size(), c, std::move(out), "gather_rows", {tn},
                     [tn, idv = std::move(idv), c](detail::Node& self) {
                       auto& g = tn->grad_buffer();
                       for (std::size_t i = 0; i < idv.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           g[static_cast<std::size_t>(idv[i]) * c + j] += self.grad[i * c + j];
                     });
}

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "softmax_rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = x.data().subspan(i * c, c);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(row[j] - mx);
      z += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  auto xn = x.node();
  return make_result(r, c, std::move(out), "softmax_rows", {xn}, [xn, r, c](detail::Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        g[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  require_defined(x, "log_softmax_rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = x.data().subspan(i * c, c);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  auto xn = x.node();
  return make_result(r, c, std::move(out), "log_softmax_rows", {xn}, [xn, r, c](detail::Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += self.grad[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        g[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * gs;
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_defined(x, "l2_normalize_rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().begin(), x.data().end());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += out[i * c + j] * out[i * c + j];
    norms[i] = std::sqrt(s);
    if (norms[i] < kNormEpsilon) continue;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= norms[i];
  }
  auto xn = x.node();
  return make_result(r, c, std::move(out), "l2_normalize_rows", {xn},
                     [xn, r, c, norms = std::move(norms)](detail::Node& self) {
                       auto& g = xn->grad_buffer();
                       for (std::size_t i = 0; i < r; ++i) {
                         if (norms[i] < kNormEpsilon) {
                           for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j];
                           continue;
                         }
                         // d(x/|x|) = (g - y (y.g)) / |x|
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j)
                           dot += self.grad[i * c + j] * self.value[i * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           g[i * c + j] += (self.grad[i * c + j] - self.value[i * c + j] * dot) / norms[i];
                       }
                     });
}

}  // namespace cala
