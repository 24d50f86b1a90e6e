#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cala {

/// Thrown when an operation produces NaN or Inf. The message names the op.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown on incompatible operand shapes.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

namespace detail {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents.
  std::function<void(Node&)> backward_fn;

  void accumulate(std::size_t i, double g) {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    grad[i] += g;
  }
  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major matrix of doubles with reverse-mode gradient tracking.
///
/// Every value in the engine is two-dimensional; a scalar is 1x1. Copies share
/// the underlying node, so a Tensor behaves like a handle. Operations record
/// their inputs while grad mode is on; backward() walks the recorded graph
/// once, accumulates into leaf gradients, and then releases the graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor identity(std::size_t n);
  static Tensor ones(std::size_t rows, std::size_t cols);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }

  std::span<const double> data() const { return node_->value; }
  /// Writable view; only legal on leaves (parameters and inputs).
  std::span<double> mutable_data();
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return node_->is_leaf; }
  const char* op_name() const { return node_->op; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward();

  /// Deep copy of values into a fresh leaf with no history.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Engine internals.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether operations record a graph. Thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All shapes are explicit; the only broadcast is
// scalar-times-tensor via scale().

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

/// Sum of all entries, 1x1.
Tensor sum(const Tensor& a);

enum class Axis { Rows, Cols };
/// Mean along an axis. Axis::Rows averages over rows and yields 1 x cols;
/// Axis::Cols yields rows x 1.
Tensor mean(const Tensor& a, Axis axis);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);

/// Main diagonal of a square matrix as an n x 1 column.
Tensor diagonal(const Tensor& a);

/// Row i of the result is row ids[i] of the table (embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

/// Numerically stable softmax over each row.
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

inline constexpr double kNormEpsilon = 1e-12;
/// Scales each row to unit L2 norm. Rows with norm below kNormEpsilon pass
/// through unchanged.
Tensor l2_normalize_rows(const Tensor& x);

}  // namespace cala
