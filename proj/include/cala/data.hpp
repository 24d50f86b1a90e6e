#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cala {

/// One composed-retrieval triplet. The gallery identity of a record's target
/// image is the record id itself.
struct TripletRecord {
  std::string id;
  std::vector<int> ref_tokens;
  std::vector<int> text_tokens;
  std::vector<int> target_tokens;
  std::optional<std::vector<std::string>> subset_ids;

  bool operator==(const TripletRecord&) const = default;
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Checks non-empty token lists, unique ids, and that every subset list
/// contains the record's own id. Throws DataError.
void validate_records(const std::vector<TripletRecord>& records);

/// JSON Lines, one record per line with fields id, ref_tokens, text_tokens,
/// target_tokens and (optionally) subset_ids.
void write_jsonl(const std::filesystem::path& path, const std::vector<TripletRecord>& records);
std::vector<TripletRecord> read_jsonl(const std::filesystem::path& path);

/// Parameters of the synthetic benchmark.
///
/// Every image carries a latent vector with one coordinate per attribute,
/// measured in quantization levels. An image is written as count-coded
/// tokens: attribute s contributes (levels - 1) tokens, of which round(z_s)
/// use the "high" id 2s+1 and the rest the "low" id 2s. A text names one
/// attribute to raise by one level (token id = attribute) padded with filler
/// words drawn from the remaining text vocabulary.
struct SynthSpec {
  std::size_t image_vocab = 16;
  std::size_t text_vocab = 16;
  std::size_t max_image_len = 16;
  std::size_t text_len = 3;
  std::size_t n_train = 512;
  std::size_t n_val = 128;
  std::size_t n_attributes = 8;
  std::size_t levels = 2;
  std::size_t subset_size = 5;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Ground truth kept alongside each generated record.
struct LatentTriplet {
  std::vector<double> reference;
  std::vector<double> target;  // reference + direction + noise
  std::size_t direction = 0;
};

struct SynthDataset {
  std::vector<TripletRecord> train;
  std::vector<TripletRecord> val;
  std::vector<LatentTriplet> train_latent;
  std::vector<LatentTriplet> val_latent;
};

/// Deterministic for a given spec. Validation targets occupy distinct latent
/// cells, and each validation record lists itself plus its nearest
/// validation targets (by target latent) as its subset.
SynthDataset generate(const SynthSpec& spec);

/// Count-coded image tokens for a latent vector (levels are rounded and clamped).
std::vector<int> encode_latent(const std::vector<double>& latent, std::size_t levels);

/// Shuffled mini-batches of record indices. The order depends only on
/// (seed, epoch); a trailing partial batch is dropped.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const { return dataset_size_ / batch_size_; }
  std::vector<std::vector<std::size_t>> epoch(std::uint64_t epoch) const;

 private:
  std::size_t dataset_size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace cala
