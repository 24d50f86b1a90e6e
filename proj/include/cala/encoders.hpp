#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cala/attention.hpp"
#include "cala/param.hpp"
#include "cala/tensor.hpp"

namespace cala {

enum class SeqKind { ReferenceImage, TargetImage, Text };

/// Token ids standing in for image patches or words.
struct TokenSeq {
  std::vector<int> tokens;
  SeqKind kind = SeqKind::Text;
};

/// Raised for malformed encoder inputs (empty, too long, bad ids, wrong kind).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

struct EncoderConfig {
  std::size_t dim = 16;
  std::size_t vocab = 16;
  std::size_t max_len = 16;
  std::size_t heads = 1;
  bool positional = true;
};

/// Embedding table, optional learned positions, and one residual
/// self-attention block: X + Attention(X, X, X).
class SequenceEncoder {
 public:
  SequenceEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                  Initializer& init, bool with_cls, bool frozen);

  /// Rows are [CLS, tok_1..tok_n] when built with a CLS vector, else tok_1..tok_n.
  Tensor encode(std::span<const int> tokens) const;

  const EncoderConfig& config() const { return cfg_; }
  const AttentionWeights& block() const { return block_; }

 private:
  EncoderConfig cfg_;
  std::string name_;
  bool with_cls_;
  Tensor embedding_;
  Tensor cls_;
  Tensor positions_;
  AttentionWeights block_;
};

/// Image branch. Reference and target images use separate instances, so
/// they never share storage.
class ImageEncoder {
 public:
  ImageEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
               Initializer& init, bool frozen);

  /// (N+1) x d features; row 0 is the CLS position.
  Tensor encode(const TokenSeq& seq) const;

 private:
  SequenceEncoder enc_;
};

class TextEncoder {
 public:
  TextEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
              Initializer& init, bool frozen);

  /// L x d features, one row per word.
  Tensor encode(const TokenSeq& seq) const;

 private:
  SequenceEncoder enc_;
};

/// Text-conditioned reference features: F_r + Attention(F_r, F_c, F_c).
/// Reference rows attend over the words; the residual keeps the shape of F_r
/// and routes gradient to both the image and text sides.
class CrossEncoder {
 public:
  CrossEncoder(ParamStore& store, const std::string& prefix, std::size_t dim, Initializer& init,
               bool frozen);

  Tensor encode(const Tensor& f_r, const Tensor& f_c) const;
  const AttentionWeights& weights() const { return w_; }

 private:
  AttentionWeights w_;
};

struct QueryFusion {
  Tensor tokens;     // (P + L) x d
  Tensor embedding;  // 1 x d, mean over rows then L2-normalized
};

/// Prompt-token fusion block standing in for a Q-former: learnable prompts
/// concatenated with the words form the query side, the reference image
/// supplies keys and values, and the mean-pooled text feature is added back
/// onto the word rows.
class QFormerLite {
 public:
  QFormerLite(ParamStore& store, const std::string& prefix, std::size_t dim, std::size_t prompts,
              Initializer& init, bool frozen);

  QueryFusion fuse(const Tensor& f_c, const Tensor& f_r) const;

  std::size_t prompt_count() const { return prompt_count_; }
  const Tensor& prompts() const { return prompts_; }
  const AttentionWeights& weights() const { return w_; }

 private:
  std::size_t dim_;
  std::size_t prompt_count_;
  Tensor prompts_;  // undefined when prompt_count_ == 0
  AttentionWeights w_;
};

}  // namespace cala
