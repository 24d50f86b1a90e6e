#include "cala/hca.hpp"

#include <cmath>
#include <fmt/format.h>
#include <vector>

#include "cala/encoders.hpp"
#include "cala/objective.hpp"

namespace cala {

HcaParams HcaParams::create(ParamStore& store, const std::string& prefix, std::size_t dim,
                            bool share_text_projection, double tau, Initializer& init) {
  if (!(tau > 0.0)) throw std::invalid_argument("hca: tau must be positive");
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  HcaParams p;
  p.tau = tau;
  p.w_r = store.add(prefix + ".w_r", init.normal(dim, dim, stddev));
  p.w_c = store.add(prefix + ".w_c", init.normal(dim, dim, stddev));
  p.w_c_prime = share_text_projection ? p.w_c
                                      : store.add(prefix + ".w_c_prime", init.normal(dim, dim, stddev));
  p.w_t = store.add(prefix + ".w_t", init.normal(dim, dim, stddev));
  p.w_v = store.add(prefix + ".w_v", init.normal(dim, dim, stddev));
  return p;
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError(fmt::format("cosine_matrix: dims {} vs {}", a.cols(), b.cols()));
  }
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

Tensor attend_ref_to_text(const Tensor& f_r_bar, const Tensor& f_c, const HcaParams& p) {
  ++p.uses;
  return cosine_matrix(matmul(f_r_bar, p.w_r), matmul(f_c, p.w_c));
}

Tensor attend_text_to_target(const Tensor& f_c, const Tensor& f_t, const HcaParams& p) {
  ++p.uses;
  return cosine_matrix(matmul(f_c, p.w_c_prime), matmul(f_t, p.w_t));
}

Tensor hinge_attention(const Tensor& a_r2c, const Tensor& a_c2t, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("hinge_attention: dim must be positive");
  return softmax_rows(scale(matmul(a_r2c, a_c2t), 1.0 / std::sqrt(static_cast<double>(dim))));
}

Tensor query_target(const Tensor& a_r2t, const Tensor& f_t, const HcaParams& p) {
  ++p.uses;
  return matmul(a_r2t, matmul(f_t, p.w_v));
}

Tensor tbia_similarities(std::span<const TbiaInputs> batch, const HcaParams& p) {
  if (batch.empty()) throw InputError("tbia_loss: empty batch");
  const std::size_t n = batch.size();
  const std::size_t dim = p.dim();

  // Target-side projections do not depend on the query; compute them once.
  std::vector<Tensor> keys_t, values_t;
  keys_t.reserve(n);
  values_t.reserve(n);
  for (const auto& item : batch) {
    keys_t.push_back(l2_normalize_rows(matmul(item.f_t, p.w_t)));
    values_t.push_back(matmul(item.f_t, p.w_v));
  }
  ++p.uses;

  std::vector<Tensor> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = batch[i];
    const Tensor a_r2c = attend_ref_to_text(q.f_r_bar, q.f_c, p);
    const Tensor text_q = l2_normalize_rows(matmul(q.f_c, p.w_c_prime));
    const Tensor ref_pooled = l2_normalize_rows(mean(q.f_r_bar, Axis::Rows));
    std::vector<Tensor> pooled;
    pooled.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      const Tensor a_c2t = matmul(text_q, transpose(keys_t[j]));
      const Tensor a_r2t = hinge_attention(a_r2c, a_c2t, dim);
      pooled.push_back(mean(matmul(a_r2t, values_t[j]), Axis::Rows));
    }
    // 1 x n row of cosines between the pooled reference and each pooled F_r2t.
    rows.push_back(matmul(ref_pooled, transpose(l2_normalize_rows(concat_rows(pooled)))));
  }
  return concat_rows(rows);
}

Tensor tbia_loss(std::span<const TbiaInputs> batch, const HcaParams& p) {
  return in_batch_contrastive(tbia_similarities(batch, p), p.tau);
}

}  // namespace cala
