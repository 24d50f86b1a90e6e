#include "cala/attention.hpp"

#include <fmt/format.h>
#include <vector>

namespace cala {

AttentionWeights AttentionWeights::create(ParamStore& store, const std::string& prefix,
                                          std::size_t dim, Initializer& init, double gain,
                                          bool frozen) {
  AttentionWeights w;
  w.wq = store.add(prefix + ".wq", init.orthogonal(dim, dim, gain), frozen);
  w.wk = store.add(prefix + ".wk", init.orthogonal(dim, dim, gain), frozen);
  w.wv = store.add(prefix + ".wv", init.orthogonal(dim, dim, gain), frozen);
  return w;
}

Tensor attention(const Tensor& query_src, const Tensor& kv_src, const AttentionWeights& w,
                 std::size_t heads) {
  if (query_src.cols() != w.wq.rows() || kv_src.cols() != w.wk.rows()) {
    throw ShapeError(fmt::format("attention: feature dim {} / {} vs projection {}", query_src.cols(),
                                 kv_src.cols(), w.wq.rows()));
  }
  const std::size_t dim = w.wq.cols();
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument(fmt::format("attention: {} heads do not divide dim {}", heads, dim));
  }
  const Tensor q = matmul(query_src, w.wq);
  const Tensor k = matmul(kv_src, w.wk);
  const Tensor v = matmul(kv_src, w.wv);
  const std::size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  if (heads == 1) {
    return matmul(softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt)), v);
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    outs.push_back(matmul(softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt)), vh));
  }
  return concat_cols(outs);
}

}  // namespace cala
