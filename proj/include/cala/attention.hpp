#pragma once

#include <cstddef>
#include <string>

#include "cala/param.hpp"
#include "cala/tensor.hpp"

namespace cala {

/// Query/key/value projections of one attention block, each d x d.
struct AttentionWeights {
  Tensor wq;
  Tensor wk;
  Tensor wv;

  /// Orthogonal projections scaled by gain.
  static AttentionWeights create(ParamStore& store, const std::string& prefix, std::size_t dim,
                                 Initializer& init, double gain, bool frozen);
};

/// Scaled dot-product attention:
///   softmax((X_q Wq)(X_kv Wk)^T / sqrt(d_head)) (X_kv Wv)
/// The result has one row per query row. With heads > 1 the projected
/// columns are split evenly and the per-head outputs concatenated.
Tensor attention(const Tensor& query_src, const Tensor& kv_src, const AttentionWeights& w,
                 std::size_t heads = 1);

}  // namespace cala
