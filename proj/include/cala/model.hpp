#pragma once

#include <span>
#include <vector>

#include "cala/config.hpp"
#include "cala/data.hpp"
#include "cala/encoders.hpp"
#include "cala/hca.hpp"
#include "cala/objective.hpp"
#include "cala/param.hpp"
#include "cala/tac.hpp"

namespace cala {

/// Features of one triplet as seen by the three training objectives.
struct TripletFeatures {
  Tensor f_r;        // reference image, reference branch (N+1) x d
  Tensor f_c;        // text, L x d
  Tensor f_t;        // target image, target branch (N+1) x d
  Tensor query;      // fused query embedding, 1 x d, unit norm
  Tensor target;     // CLS row of f_t, unit norm
  Tensor f_r_bar;    // reference features for the hinge attention (undefined if unused)
  Tensor f_r_prime;  // reference image through the target branch (undefined if unused)
};

/// The full model: frozen image encoders, trainable text encoder, cross
/// encoder, query fusion block, hinge cross attention and twin compositor.
///
/// Parameter names are prefixed by component: ref_image., target_image.,
/// text., cross., qformer., hca., tac.
class CalaModel {
 public:
  explicit CalaModel(const RunConfig& cfg);

  CalaModel(const CalaModel&) = delete;
  CalaModel& operator=(const CalaModel&) = delete;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const RunConfig& config() const { return cfg_; }

  const ImageEncoder& ref_encoder() const { return ref_image_; }
  const ImageEncoder& target_encoder() const { return target_image_; }
  const TextEncoder& text_encoder() const { return text_; }
  const CrossEncoder& cross_encoder() const { return cross_; }
  const QFormerLite& qformer() const { return qformer_; }
  const HcaParams& hca() const { return hca_; }
  const TacParams& tac() const { return tac_; }

  TripletFeatures features(const TripletRecord& r) const;

  /// Joint loss over an in-batch contrastive batch.
  LossBreakdown forward(std::span<const TripletRecord* const> batch) const;
  LossBreakdown forward(const std::vector<TripletRecord>& batch) const;

  /// Inference path: fused query embedding (1 x d) and gallery embedding (1 x d).
  Tensor encode_query(const std::vector<int>& ref_tokens, const std::vector<int>& text_tokens) const;
  Tensor encode_gallery_item(const std::vector<int>& target_tokens) const;

 private:
  RunConfig cfg_;
  ParamStore store_;
  Initializer init_;
  ImageEncoder ref_image_;
  ImageEncoder target_image_;
  TextEncoder text_;
  CrossEncoder cross_;
  QFormerLite qformer_;
  HcaParams hca_;
  TacParams tac_;
};

}  // namespace cala
