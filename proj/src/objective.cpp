#include "cala/objective.hpp"

#include <fmt/format.h>
#include <stdexcept>

namespace cala {

void ObjectiveWeights::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument(fmt::format("alpha must be >= 0, got {}", alpha));
  if (!(beta >= 0.0)) throw std::invalid_argument(fmt::format("beta must be >= 0, got {}", beta));
  if (!(tau > 0.0)) throw std::invalid_argument(fmt::format("tau must be > 0, got {}", tau));
}

Tensor in_batch_contrastive(const Tensor& similarities, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (similarities.rows() != similarities.cols()) {
    throw ShapeError(fmt::format("in-batch similarities must be square, got {}x{}", similarities.rows(),
                                 similarities.cols()));
  }
  const double batch = static_cast<double>(similarities.rows());
  const Tensor log_probs = log_softmax_rows(scale(similarities, 1.0 / tau));
  return scale(sum(diagonal(log_probs)), -1.0 / batch);
}

Tensor qtm_loss(const Tensor& queries, const Tensor& targets, double tau) {
  if (queries.rows() != targets.rows() || queries.cols() != targets.cols()) {
    throw ShapeError(fmt::format("qtm_loss: queries {}x{} vs targets {}x{}", queries.rows(), queries.cols(),
                                 targets.rows(), targets.cols()));
  }
  return in_batch_contrastive(matmul(queries, transpose(targets)), tau);
}

Tensor total_loss(const Tensor& l_qtm, const std::optional<Tensor>& l_tbia,
                  const std::optional<Tensor>& l_ctr, const ObjectiveWeights& w) {
  w.validate();
  Tensor total = l_qtm;
  if (l_tbia && w.alpha != 0.0) total = add(total, scale(*l_tbia, w.alpha));
  if (l_ctr && w.beta != 0.0) total = add(total, scale(*l_ctr, w.beta));
  return total;
}

Tensor score_query_against_gallery(const Tensor& query, const Tensor& gallery) {
  if (!gallery.defined()) throw std::invalid_argument("empty gallery");
  if (query.rows() != 1 || query.cols() != gallery.cols()) {
    throw ShapeError(fmt::format("score: query {}x{} vs gallery {}x{}", query.rows(), query.cols(),
                                 gallery.rows(), gallery.cols()));
  }
  return matmul(query, transpose(gallery));
}

}  // namespace cala
