#include "cala/tac.hpp"

#include <cmath>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <vector>

#include "cala/encoders.hpp"
#include "cala/objective.hpp"

namespace cala {

TacParams TacParams::create(ParamStore& store, const std::string& prefix, std::size_t dim,
                            std::size_t layers, std::size_t heads, bool share_across_branches,
                            Initializer& init) {
  if (layers == 0) throw std::invalid_argument("tac: layer count must be at least 1");
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument(fmt::format("tac: {} heads do not divide dim {}", heads, dim));
  }
  TacParams p;
  p.layers = layers;
  p.heads = heads;
  p.target_oriented = AttentionWeights::create(store, prefix + ".target", dim, init, 1.0, false);
  p.reference_oriented =
      share_across_branches
          ? p.target_oriented
          : AttentionWeights::create(store, prefix + ".reference", dim, init, 1.0, false);
  return p;
}

Tensor fuse_branch(const Tensor& anchor, const Tensor& other, const TacParams& p, TacBranch branch) {
  if (p.layers == 0) throw std::invalid_argument("tac: layer count must be at least 1");
  if (anchor.cols() != other.cols()) {
    throw ShapeError(fmt::format("tac: anchor dim {} vs other dim {}", anchor.cols(), other.cols()));
  }
  ++p.uses;
  const AttentionWeights& w = p.branch(branch);
  Tensor state = other;
  for (std::size_t m = 0; m < p.layers; ++m) state = attention(anchor, state, w, p.heads);
  return state;
}

Composite compose(const Tensor& f_r_prime, const Tensor& f_t, const TacParams& p) {
  if (!f_r_prime.defined() || !f_t.defined()) throw InputError("tac: missing CLS row");
  const Tensor h_t = fuse_branch(f_r_prime, f_t, p, TacBranch::TargetOriented);
  const Tensor h_r = fuse_branch(f_t, f_r_prime, p, TacBranch::ReferenceOriented);
  const Tensor mixed = scale(add(slice_rows(h_t, 0, 1), slice_rows(h_r, 0, 1)), 0.5);
  double norm_sq = 0.0;
  for (double v : mixed.data()) norm_sq += v * v;
  Composite out{l2_normalize_rows(mixed), std::sqrt(norm_sq) < kNormEpsilon};
  if (out.degenerate) spdlog::warn("tac: composite visual feature has near-zero norm");
  return out;
}

Tensor ctr_similarities(std::span<const CtrInputs> batch, const TacParams& p) {
  if (batch.empty()) throw InputError("ctr_loss: empty batch");
  std::vector<Tensor> visual, text;
  visual.reserve(batch.size());
  text.reserve(batch.size());
  for (const auto& item : batch) {
    visual.push_back(compose(item.f_r_prime, item.f_t, p).fv);
    text.push_back(l2_normalize_rows(mean(item.f_c, Axis::Rows)));
  }
  return matmul(concat_rows(visual), transpose(concat_rows(text)));
}

Tensor ctr_loss(std::span<const CtrInputs> batch, const TacParams& p, double tau) {
  return in_batch_contrastive(ctr_similarities(batch, p), tau);
}

}  // namespace cala
