#include "cala/data.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace cala {

using nlohmann::json;

void validate_records(const std::vector<TripletRecord>& records) {
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (r.id.empty()) throw DataError("record with empty id");
    if (!ids.insert(r.id).second) throw DataError("duplicate record id: " + r.id);
    if (r.ref_tokens.empty() || r.text_tokens.empty() || r.target_tokens.empty()) {
      throw DataError("record " + r.id + " has an empty token list");
    }
    if (r.subset_ids && std::find(r.subset_ids->begin(), r.subset_ids->end(), r.id) == r.subset_ids->end()) {
      throw DataError("record " + r.id + " subset does not contain its own target");
    }
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<TripletRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["ref_tokens"] = r.ref_tokens;
    j["text_tokens"] = r.text_tokens;
    j["target_tokens"] = r.target_tokens;
    if (r.subset_ids) j["subset_ids"] = *r.subset_ids;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<int> token_list(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw DataError(fmt::format("line {}: missing or non-array field '{}'", line, field));
  }
  std::vector<int> out;
  for (const auto& v : j.at(field)) {
    if (!v.is_number_integer()) throw DataError(fmt::format("line {}: non-integer token in '{}'", line, field));
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

std::vector<TripletRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  static const std::set<std::string> kFields{"id", "ref_tokens", "text_tokens", "target_tokens",
                                             "subset_ids"};
  std::vector<TripletRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    if (!j.is_object()) throw DataError(fmt::format("line {}: expected a JSON object", lineno));
    for (const auto& [key, _] : j.items()) {
      if (!kFields.contains(key)) throw DataError(fmt::format("line {}: unknown field '{}'", lineno, key));
    }
    if (!j.contains("id") || !j.at("id").is_string()) {
      throw DataError(fmt::format("line {}: missing string field 'id'", lineno));
    }
    TripletRecord r;
    r.id = j.at("id").get<std::string>();
    r.ref_tokens = token_list(j, "ref_tokens", lineno);
    r.text_tokens = token_list(j, "text_tokens", lineno);
    r.target_tokens = token_list(j, "target_tokens", lineno);
    if (j.contains("subset_ids")) r.subset_ids = j.at("subset_ids").get<std::vector<std::string>>();
    records.push_back(std::move(r));
  }
  validate_records(records);
  return records;
}

void SynthSpec::validate() const {
  if (n_train == 0 || n_val == 0 || n_attributes == 0 || text_len == 0 || max_image_len == 0) {
    throw std::invalid_argument("synth: counts must be at least 1");
  }
  if (levels < 2) throw std::invalid_argument("synth: need at least 2 levels per attribute");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synth: noise_sigma must be >= 0");
  if (image_vocab < 2 * n_attributes) {
    throw std::invalid_argument(fmt::format(
        "synth: image vocabulary {} too small for {} attributes (needs {})", image_vocab, n_attributes,
        2 * n_attributes));
  }
  const std::size_t text_needed = n_attributes + (text_len > 1 ? 1 : 0);
  if (text_vocab < text_needed) {
    throw std::invalid_argument(fmt::format("synth: text vocabulary {} too small (needs {})", text_vocab,
                                            text_needed));
  }
  if (n_attributes * (levels - 1) > max_image_len) {
    throw std::invalid_argument(fmt::format("synth: {} attributes x {} tokens exceeds image length {}",
                                            n_attributes, levels - 1, max_image_len));
  }
  if (subset_size == 0 || subset_size > n_val) {
    throw std::invalid_argument("synth: subset size must be in [1, n_val]");
  }
}

std::vector<int> encode_latent(const std::vector<double>& latent, std::size_t levels) {
  const std::size_t per_attr = levels - 1;
  std::vector<int> tokens;
  tokens.reserve(latent.size() * per_attr);
  for (std::size_t s = 0; s < latent.size(); ++s) {
    const double clamped = std::clamp(std::round(latent[s]), 0.0, static_cast<double>(per_attr));
    const auto high = static_cast<std::size_t>(clamped);
    for (std::size_t i = 0; i < per_attr; ++i) {
      tokens.push_back(static_cast<int>(i < high ? 2 * s + 1 : 2 * s));
    }
  }
  return tokens;
}

namespace {

struct Generator {
  const SynthSpec& spec;
  std::mt19937_64 rng;

  std::size_t uniform(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  LatentTriplet sample_latent() {
    const std::size_t top = spec.levels - 1;
    LatentTriplet t;
    std::vector<std::size_t> raisable;
    do {
      t.reference.assign(spec.n_attributes, 0.0);
      raisable.clear();
      for (std::size_t s = 0; s < spec.n_attributes; ++s) {
        const std::size_t level = uniform(spec.levels);
        t.reference[s] = static_cast<double>(level);
        if (level < top) raisable.push_back(s);
      }
    } while (raisable.empty());
    t.direction = raisable[uniform(raisable.size())];
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    t.target = t.reference;
    t.target[t.direction] += 1.0;
    if (spec.noise_sigma > 0.0) {
      for (double& z : t.target) z += noise(rng);
    }
    return t;
  }

  std::vector<int> text_for(std::size_t direction) {
    std::vector<int> text(spec.text_len);
    const std::size_t slot = uniform(spec.text_len);
    for (std::size_t i = 0; i < spec.text_len; ++i) {
      text[i] = i == slot ? static_cast<int>(direction)
                          : static_cast<int>(spec.n_attributes + uniform(spec.text_vocab - spec.n_attributes));
    }
    return text;
  }

  TripletRecord record(const std::string& id, const LatentTriplet& t) {
    TripletRecord r;
    r.id = id;
    r.ref_tokens = encode_latent(t.reference, spec.levels);
    r.text_tokens = text_for(t.direction);
    r.target_tokens = encode_latent(t.target, spec.levels);
    return r;
  }
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  Generator gen{spec, std::mt19937_64(spec.seed)};
  SynthDataset ds;

  for (std::size_t i = 0; i < spec.n_train; ++i) {
    auto t = gen.sample_latent();
    ds.train.push_back(gen.record(fmt::format("train-{:06d}", i), t));
    ds.train_latent.push_back(std::move(t));
  }

  // Distinct target cells keep the gallery free of duplicate images.
  std::set<std::vector<int>> used_cells;
  const std::size_t max_attempts = 1000 * spec.n_val;
  std::size_t attempts = 0;
  while (ds.val.size() < spec.n_val) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument(fmt::format(
          "synth: could not draw {} distinct validation targets from the latent grid", spec.n_val));
    }
    auto t = gen.sample_latent();
    auto cell = encode_latent(t.target, spec.levels);
    if (!used_cells.insert(cell).second) continue;
    ds.val.push_back(gen.record(fmt::format("val-{:06d}", ds.val.size()), t));
    ds.val_latent.push_back(std::move(t));
  }

  const std::size_t n = ds.val.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (a == i || b == i) return a == i && b != i;
      return squared_distance(ds.val_latent[a].target, ds.val_latent[i].target) <
             squared_distance(ds.val_latent[b].target, ds.val_latent[i].target);
    });
    std::vector<std::string> subset;
    for (std::size_t k = 0; k < spec.subset_size; ++k) subset.push_back(ds.val[order[k]].id);
    ds.val[i].subset_ids = std::move(subset);
  }
  return ds;
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : dataset_size_(dataset_size), batch_size_(batch_size), seed_(seed) {
  if (dataset_size == 0) throw DataError("cannot batch an empty dataset");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (batch_size > dataset_size) {
    throw std::invalid_argument(
        fmt::format("batch size {} exceeds dataset size {}", batch_size, dataset_size));
  }
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::uint64_t epoch) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(dataset_size_);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = dataset_size_; i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < batches_per_epoch(); ++b) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size_),
                         order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size_));
  }
  return batches;
}

}  // namespace cala
