#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cala/data.hpp"
#include "cala/objective.hpp"

namespace cala {

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Everything a run needs. Defaults are small enough to train on one CPU core
/// in seconds; alpha 0.45, beta 0.1, tau 0.1 and four compositor layers.
struct RunConfig {
  // model
  std::size_t dim = 16;
  std::size_t image_vocab = 16;
  std::size_t text_vocab = 16;
  std::size_t max_image_len = 16;
  std::size_t max_text_len = 16;
  std::size_t prompts = 8;
  std::size_t tac_layers = 4;
  std::size_t tac_heads = 1;
  std::size_t attn_heads = 1;
  bool positional = true;

  // objective
  double alpha = 0.45;
  double beta = 0.1;
  double tau = 0.1;

  // training
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  double lr = 3e-3;
  std::uint64_t seed = 1;

  // ablations
  bool share_text_proj = true;
  bool share_tac_branches = false;
  bool pure_reference = false;
  bool disable_tbia = false;
  bool disable_ctr = false;

  // synthetic data
  std::size_t n_train = 512;
  std::size_t n_val = 128;
  std::size_t n_attributes = 8;
  std::size_t levels = 2;
  std::size_t text_len = 3;
  std::size_t subset_size = 5;
  double noise_sigma = 0.05;
  std::uint64_t synth_seed = 7;

  // paths
  std::string data_dir = "data";
  std::string checkpoint = "cala_checkpoint.json";
  std::string train_log = "train_log.jsonl";
  std::string report = "report";

  bool operator==(const RunConfig&) const = default;

  ObjectiveWeights weights() const { return {alpha, beta, tau}; }
  SynthSpec synth_spec() const;
  bool tbia_active() const { return !disable_tbia && alpha > 0.0; }
  bool ctr_active() const { return !disable_ctr && beta > 0.0; }

  std::filesystem::path train_path() const { return std::filesystem::path(data_dir) / "train.jsonl"; }
  std::filesystem::path val_path() const { return std::filesystem::path(data_dir) / "val.jsonl"; }

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Starts from defaults and applies the given keys. Unknown keys and values
/// of the wrong type are rejected.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one "key=value" override. The value is parsed as JSON when
/// possible and as a bare string otherwise.
void apply_override(RunConfig& cfg, std::string_view assignment);

}  // namespace cala
