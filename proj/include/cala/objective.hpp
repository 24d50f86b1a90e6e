#pragma once

#include <optional>

#include "cala/tensor.hpp"

namespace cala {

/// Trade-off weights of the joint loss and the shared temperature.
struct ObjectiveWeights {
  double alpha = 0.45;
  double beta = 0.1;
  double tau = 0.1;

  void validate() const;
};

/// Mean negative log-likelihood of the diagonal under a row-wise softmax of
/// similarities / tau. Row i holds query i against every in-batch candidate.
Tensor in_batch_contrastive(const Tensor& similarities, double tau);

/// Query-target matching over B x d query and target embeddings
/// (rows L2-normalized by the caller).
Tensor qtm_loss(const Tensor& queries, const Tensor& targets, double tau);

/// L_QTM + alpha L_TBIA + beta L_CTR. Absent terms contribute nothing.
Tensor total_loss(const Tensor& l_qtm, const std::optional<Tensor>& l_tbia,
                  const std::optional<Tensor>& l_ctr, const ObjectiveWeights& w);

/// Cosine score of one normalized query (1 x d) against G normalized gallery
/// rows; returns 1 x G. This is the only scoring path used at inference.
Tensor score_query_against_gallery(const Tensor& query, const Tensor& gallery);

/// Scalar loss values of one batch.
struct LossBreakdown {
  Tensor qtm;
  std::optional<Tensor> tbia;
  std::optional<Tensor> ctr;
  Tensor total;
};

}  // namespace cala
