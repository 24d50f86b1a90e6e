#include "cala/encoders.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace cala {

namespace {

// Token embeddings and projections start orthogonal: the frozen image branch
// then keeps distinct tokens apart instead of squeezing them together in a
// small random subspace. Positions and CLS start small so that branch stays
// close to a linear read-out of its tokens.
double prompt_std(std::size_t dim) { return 1.0 / std::sqrt(static_cast<double>(dim)); }
double offset_std(std::size_t dim) { return 0.1 / std::sqrt(static_cast<double>(dim)); }

const char* kind_name(SeqKind k) {
  switch (k) {
    case SeqKind::ReferenceImage:
      return "reference-image";
    case SeqKind::TargetImage:
      return "target-image";
    case SeqKind::Text:
      return "text";
  }
  return "?";
}

}  // namespace

SequenceEncoder::SequenceEncoder(ParamStore& store, const std::string& prefix,
                                 const EncoderConfig& cfg, Initializer& init, bool with_cls,
                                 bool frozen)
    : cfg_(cfg), name_(prefix), with_cls_(with_cls) {
  if (cfg.dim == 0 || cfg.vocab == 0 || cfg.max_len == 0) {
    throw std::invalid_argument(prefix + ": dim, vocab and max_len must be positive");
  }
  embedding_ = store.add(prefix + ".embedding", init.orthogonal(cfg.vocab, cfg.dim, 1.0),
                         frozen);
  if (with_cls) {
    cls_ = store.add(prefix + ".cls", init.normal(1, cfg.dim, offset_std(cfg.dim)), frozen);
  }
  if (cfg.positional) {
    const std::size_t rows = cfg.max_len + (with_cls ? 1 : 0);
    positions_ = store.add(prefix + ".positions", init.normal(rows, cfg.dim, offset_std(cfg.dim)), frozen);
  }
  block_ = AttentionWeights::create(store, prefix + ".attn", cfg.dim, init, 1.0,
                                    frozen);
}

Tensor SequenceEncoder::encode(std::span<const int> tokens) const {
  if (tokens.empty()) throw InputError(name_ + ": empty token sequence");
  if (tokens.size() > cfg_.max_len) {
    throw InputError(fmt::format("{}: sequence length {} exceeds maximum {}", name_, tokens.size(),
                                 cfg_.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab) {
      throw InputError(fmt::format("{}: token id {} outside vocabulary of {}", name_, t, cfg_.vocab));
    }
  }
  Tensor x = gather_rows(embedding_, tokens);
  if (with_cls_) x = concat_rows({cls_, x});
  if (cfg_.positional) x = add(x, slice_rows(positions_, 0, x.rows()));
  return add(x, attention(x, x, block_, cfg_.heads));
}

ImageEncoder::ImageEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                           Initializer& init, bool frozen)
    : enc_(store, prefix, cfg, init, /*with_cls=*/true, frozen) {}

Tensor ImageEncoder::encode(const TokenSeq& seq) const {
  if (seq.kind == SeqKind::Text) {
    throw InputError(fmt::format("image encoder given a {} sequence", kind_name(seq.kind)));
  }
  return enc_.encode(seq.tokens);
}

TextEncoder::TextEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                         Initializer& init, bool frozen)
    : enc_(store, prefix, cfg, init, /*with_cls=*/false, frozen) {}

Tensor TextEncoder::encode(const TokenSeq& seq) const {
  if (seq.kind != SeqKind::Text) {
    throw InputError(fmt::format("text encoder given a {} sequence", kind_name(seq.kind)));
  }
  return enc_.encode(seq.tokens);
}

CrossEncoder::CrossEncoder(ParamStore& store, const std::string& prefix, std::size_t dim,
                           Initializer& init, bool frozen)
    : w_(AttentionWeights::create(store, prefix, dim, init, 1.0, frozen)) {}

Tensor CrossEncoder::encode(const Tensor& f_r, const Tensor& f_c) const {
  if (f_r.cols() != f_c.cols()) {
    throw ShapeError(fmt::format("cross encoder: dims {} vs {}", f_r.cols(), f_c.cols()));
  }
  return add(f_r, attention(f_r, f_c, w_));
}

QFormerLite::QFormerLite(ParamStore& store, const std::string& prefix, std::size_t dim,
                         std::size_t prompts, Initializer& init, bool frozen)
    : dim_(dim), prompt_count_(prompts) {
  if (prompts > 0) {
    prompts_ = store.add(prefix + ".prompts", init.normal(prompts, dim, prompt_std(dim)), frozen);
  }
  w_ = AttentionWeights::create(store, prefix + ".attn", dim, init, 1.0, frozen);
}

QueryFusion QFormerLite::fuse(const Tensor& f_c, const Tensor& f_r) const {
  if (f_c.cols() != dim_ || f_r.cols() != dim_) {
    throw ShapeError(fmt::format("qformer: expected dim {}, got text {} / image {}", dim_, f_c.cols(),
                                 f_r.cols()));
  }
  const std::size_t words = f_c.rows();
  const Tensor queries = prompt_count_ > 0 ? concat_rows({prompts_, f_c}) : f_c;
  Tensor out = attention(queries, f_r, w_);

  // Every word row gets the mean text feature added.
  const Tensor pooled_text = mean(f_c, Axis::Rows);
  Tensor text_rows = matmul(Tensor::ones(words, 1), pooled_text);
  if (prompt_count_ > 0) text_rows = concat_rows({Tensor::zeros(prompt_count_, dim_), text_rows});
  out = add(out, text_rows);

  return QueryFusion{out, l2_normalize_rows(mean(out, Axis::Rows))};
}

}  // namespace cala
