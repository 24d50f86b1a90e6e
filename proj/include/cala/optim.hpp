#pragma once

#include <cstddef>
#include <vector>

#include "cala/param.hpp"

namespace cala {

/// Adam over the trainable entries of a ParamStore. Frozen parameters are
/// never written.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(ParamStore& store, Options opts);

  /// One update from the accumulated gradients; does not clear them.
  void step();
  std::size_t steps() const { return t_; }

 private:
  ParamStore& store_;
  Options opts_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace cala
