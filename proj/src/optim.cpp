#include "cala/optim.hpp"

#include <cmath>

namespace cala {

Adam::Adam(ParamStore& store, Options opts) : store_(store), opts_(opts) {
  for (const auto& p : store_.params()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = params[i];
    if (p.frozen || !p.value.has_grad()) continue;
    Tensor handle = p.value;
    const auto g = handle.mutable_grad();
    auto w = handle.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g[k];
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g[k] * g[k];
      w[k] -= opts_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opts_.eps);
    }
  }
}

}  // namespace cala
