#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "cala/param.hpp"
#include "cala/tensor.hpp"

namespace cala {

/// Projections of the hinge-based cross attention. When the text projections
/// are shared, w_c_prime is the same storage as w_c.
struct HcaParams {
  Tensor w_r;
  Tensor w_c;
  Tensor w_c_prime;
  Tensor w_t;
  Tensor w_v;
  double tau = 0.1;

  /// Forward-call counter; inference must leave it untouched.
  mutable std::uint64_t uses = 0;

  static HcaParams create(ParamStore& store, const std::string& prefix, std::size_t dim,
                          bool share_text_projection, double tau, Initializer& init);

  bool text_projection_shared() const { return w_c.same_storage(w_c_prime); }
  std::size_t dim() const { return w_r.rows(); }
};

/// Row-wise cosine similarity matrix between the rows of a and b.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

/// A_r2c (N x L): cosine between rows of F̄_r W_r and rows of F_c W_c.
Tensor attend_ref_to_text(const Tensor& f_r_bar, const Tensor& f_c, const HcaParams& p);

/// A_c2t (L x N): cosine between rows of F_c W_c' and rows of F_t W_t.
Tensor attend_text_to_target(const Tensor& f_c, const Tensor& f_t, const HcaParams& p);

/// A_r2t = softmax_rows(A_r2c A_c2t / sqrt(d)); each reference row is a
/// distribution over target rows.
Tensor hinge_attention(const Tensor& a_r2c, const Tensor& a_c2t, std::size_t dim);

/// F_r2t = A_r2t (F_t W_v).
Tensor query_target(const Tensor& a_r2t, const Tensor& f_t, const HcaParams& p);

/// Per-triplet inputs to the text-bridged alignment loss.
struct TbiaInputs {
  Tensor f_r_bar;  // cross-encoded (or pure) reference features
  Tensor f_c;      // text features
  Tensor f_t;      // target features
};

/// In-batch contrastive alignment of mean(F̄_r) with mean(F_r2t). For query i
/// and every candidate target j the full reference -> text_i -> target_j chain
/// is evaluated; the matched target is the positive.
Tensor tbia_loss(std::span<const TbiaInputs> batch, const HcaParams& p);

/// Logit matrix behind tbia_loss, before scaling by 1/tau.
Tensor tbia_similarities(std::span<const TbiaInputs> batch, const HcaParams& p);

}  // namespace cala
