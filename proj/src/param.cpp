#include "cala/param.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <fmt/format.h>
#include <stdexcept>

namespace cala {

Tensor ParamStore::add(std::string name, Tensor init, bool frozen) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  init.set_requires_grad(!frozen);
  params_.push_back(Param{std::move(name), init, frozen});
  return init;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Param& ParamStore::at(const std::string& name) const {
  const Param* p = find(name);
  if (p == nullptr) throw std::out_of_range("unknown parameter: " + name);
  return *p;
}

std::size_t ParamStore::scalar_count(const std::string& prefix, bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (trainable_only && p.frozen) continue;
    if (p.name.rfind(prefix, 0) == 0) n += p.value.size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

Tensor Initializer::normal(std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng_);
  return Tensor::from(rows, cols, std::move(v));
}

Tensor Initializer::orthogonal(std::size_t rows, std::size_t cols, double gain) {
  const auto tall = static_cast<Eigen::Index>(std::max(rows, cols));
  const auto wide = static_cast<Eigen::Index>(std::min(rows, cols));
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd a(tall, wide);
  for (Eigen::Index j = 0; j < wide; ++j) {
    for (Eigen::Index i = 0; i < tall; ++i) a(i, j) = dist(rng_);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
  // Sign fix so the result is uniformly distributed over orthogonal matrices.
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < wide; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  if (rows < cols) q.transposeInPlace();
  std::vector<double> v(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      v[i * cols + j] = gain * q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return Tensor::from(rows, cols, std::move(v));
}

}  // namespace cala
