#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cala/tensor.hpp"

namespace cala {

/// A named trainable array. Frozen parameters never receive optimizer updates.
struct Param {
  std::string name;
  Tensor value;
  bool frozen = false;
};

/// Ordered registry of model parameters. Registration order is the
/// iteration order for initialization, optimization and checkpoints.
class ParamStore {
 public:
  /// Registers a leaf and returns its handle. Names must be unique.
  Tensor add(std::string name, Tensor init, bool frozen = false);

  const std::vector<Param>& params() const { return params_; }
  const Param* find(const std::string& name) const;
  Param* find(const std::string& name);
  const Param& at(const std::string& name) const;

  /// Total scalar count over parameters whose name starts with prefix.
  std::size_t scalar_count(const std::string& prefix = "", bool trainable_only = false) const;
  void zero_grad();

 private:
  std::vector<Param> params_;
};

/// Seeded Gaussian initializer.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor normal(std::size_t rows, std::size_t cols, double stddev);

  /// Rows (or columns, whichever are fewer) orthonormal, then scaled by gain.
  Tensor orthogonal(std::size_t rows, std::size_t cols, double gain);

 private:
  std::mt19937_64 rng_;
};

}  // namespace cala
