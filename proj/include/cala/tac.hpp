#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "cala/attention.hpp"
#include "cala/param.hpp"
#include "cala/tensor.hpp"

namespace cala {

enum class TacBranch { TargetOriented, ReferenceOriented };

/// Twin attention compositor weights. All layers of a branch reuse that
/// branch's projections, so the parameter count does not depend on layers.
struct TacParams {
  AttentionWeights target_oriented;
  AttentionWeights reference_oriented;
  std::size_t layers = 4;
  std::size_t heads = 1;

  mutable std::uint64_t uses = 0;

  static TacParams create(ParamStore& store, const std::string& prefix, std::size_t dim,
                          std::size_t layers, std::size_t heads, bool share_across_branches,
                          Initializer& init);

  const AttentionWeights& branch(TacBranch b) const {
    return b == TacBranch::TargetOriented ? target_oriented : reference_oriented;
  }
};

/// H_0 = other; H_m = Attention(anchor, H_{m-1}, H_{m-1}) for m = 1..layers.
/// The anchor is the query at every layer. Returns H_layers (anchor rows x d).
Tensor fuse_branch(const Tensor& anchor, const Tensor& other, const TacParams& p, TacBranch branch);

struct Composite {
  Tensor fv;                // 1 x d
  bool degenerate = false;  // pre-normalization mean had near-zero norm
};

/// F_v: average of the CLS rows of both branch outputs, L2-normalized. The
/// target-oriented branch anchors on f_r_prime, the reference-oriented branch
/// anchors on f_t.
Composite compose(const Tensor& f_r_prime, const Tensor& f_t, const TacParams& p);

struct CtrInputs {
  Tensor f_r_prime;  // reference image through the target branch
  Tensor f_t;
  Tensor f_c;
};

/// In-batch contrastive matching of each composite F_v against every text
/// (mean-pooled, L2-normalized); the triplet's own text is the positive.
Tensor ctr_loss(std::span<const CtrInputs> batch, const TacParams& p, double tau);

/// Similarity matrix behind ctr_loss: row i is F_v_i against every text.
Tensor ctr_similarities(std::span<const CtrInputs> batch, const TacParams& p);

}  // namespace cala
