#include "cala/model.hpp"

namespace cala {

namespace {

EncoderConfig image_config(const RunConfig& cfg) {
  return {cfg.dim, cfg.image_vocab, cfg.max_image_len, cfg.attn_heads, cfg.positional};
}

EncoderConfig text_config(const RunConfig& cfg) {
  return {cfg.dim, cfg.text_vocab, cfg.max_text_len, cfg.attn_heads, cfg.positional};
}

const RunConfig& validated(const RunConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

CalaModel::CalaModel(const RunConfig& cfg)
    : cfg_(validated(cfg)),
      init_(cfg.seed),
      ref_image_(store_, "ref_image", image_config(cfg), init_, /*frozen=*/true),
      target_image_(store_, "target_image", image_config(cfg), init_, /*frozen=*/true),
      text_(store_, "text", text_config(cfg), init_, /*frozen=*/false),
      cross_(store_, "cross", cfg.dim, init_, /*frozen=*/false),
      qformer_(store_, "qformer", cfg.dim, cfg.prompts, init_, /*frozen=*/false),
      hca_(HcaParams::create(store_, "hca", cfg.dim, cfg.share_text_proj, cfg.tau, init_)),
      tac_(TacParams::create(store_, "tac", cfg.dim, cfg.tac_layers, cfg.tac_heads,
                             cfg.share_tac_branches, init_)) {}

TripletFeatures CalaModel::features(const TripletRecord& r) const {
  TripletFeatures f;
  f.f_r = ref_image_.encode({r.ref_tokens, SeqKind::ReferenceImage});
  f.f_c = text_.encode({r.text_tokens, SeqKind::Text});
  f.f_t = target_image_.encode({r.target_tokens, SeqKind::TargetImage});
  f.query = qformer_.fuse(f.f_c, f.f_r).embedding;
  f.target = l2_normalize_rows(slice_rows(f.f_t, 0, 1));
  if (cfg_.tbia_active()) {
    f.f_r_bar = cfg_.pure_reference ? f.f_r : cross_.encode(f.f_r, f.f_c);
  }
  if (cfg_.ctr_active()) {
    f.f_r_prime = target_image_.encode({r.ref_tokens, SeqKind::ReferenceImage});
  }
  return f;
}

LossBreakdown CalaModel::forward(std::span<const TripletRecord* const> batch) const {
  if (batch.empty()) throw InputError("forward: empty batch");
  std::vector<Tensor> queries, targets;
  std::vector<TbiaInputs> tbia_in;
  std::vector<CtrInputs> ctr_in;
  for (const TripletRecord* r : batch) {
    TripletFeatures f = features(*r);
    queries.push_back(f.query);
    targets.push_back(f.target);
    if (cfg_.tbia_active()) tbia_in.push_back({f.f_r_bar, f.f_c, f.f_t});
    if (cfg_.ctr_active()) ctr_in.push_back({f.f_r_prime, f.f_t, f.f_c});
  }
  LossBreakdown out;
  out.qtm = qtm_loss(concat_rows(queries), concat_rows(targets), cfg_.tau);
  if (cfg_.tbia_active()) out.tbia = tbia_loss(tbia_in, hca_);
  if (cfg_.ctr_active()) out.ctr = ctr_loss(ctr_in, tac_, cfg_.tau);
  out.total = total_loss(out.qtm, out.tbia, out.ctr, cfg_.weights());
  return out;
}

LossBreakdown CalaModel::forward(const std::vector<TripletRecord>& batch) const {
  std::vector<const TripletRecord*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& r : batch) ptrs.push_back(&r);
  return forward(std::span<const TripletRecord* const>(ptrs));
}

Tensor CalaModel::encode_query(const std::vector<int>& ref_tokens,
                               const std::vector<int>& text_tokens) const {
  const Tensor f_r = ref_image_.encode({ref_tokens, SeqKind::ReferenceImage});
  const Tensor f_c = text_.encode({text_tokens, SeqKind::Text});
  return qformer_.fuse(f_c, f_r).embedding;
}

Tensor CalaModel::encode_gallery_item(const std::vector<int>& target_tokens) const {
  const Tensor f_t = target_image_.encode({target_tokens, SeqKind::TargetImage});
  return l2_normalize_rows(slice_rows(f_t, 0, 1));
}

}  // namespace cala
