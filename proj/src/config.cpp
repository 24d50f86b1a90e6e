#include "cala/config.hpp"

#include <fmt/format.h>
#include <fstream>

namespace cala {

using nlohmann::json;
using nlohmann::ordered_json;

#define CALA_CONFIG_FIELDS(X)                                                                    \
  X(dim) X(image_vocab) X(text_vocab) X(max_image_len) X(max_text_len) X(prompts) X(tac_layers)  \
  X(tac_heads) X(attn_heads) X(positional) X(alpha) X(beta) X(tau) X(batch_size) X(epochs) X(lr) \
  X(seed) X(share_text_proj) X(share_tac_branches) X(pure_reference) X(disable_tbia)             \
  X(disable_ctr) X(n_train) X(n_val) X(n_attributes) X(levels) X(text_len) X(subset_size)        \
  X(noise_sigma) X(synth_seed) X(data_dir) X(checkpoint) X(train_log) X(report)

namespace {

template <typename T>
void read_field(const json& value, const std::string& key, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!value.is_boolean()) throw ConfigError(fmt::format("config key '{}' expects a boolean", key));
    out = value.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!value.is_number_integer() ||
        (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
      throw ConfigError(fmt::format("config key '{}' expects a non-negative integer", key));
    }
    out = value.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!value.is_number()) throw ConfigError(fmt::format("config key '{}' expects a number", key));
    out = value.get<T>();
  } else {
    if (!value.is_string()) throw ConfigError(fmt::format("config key '{}' expects a string", key));
    out = value.get<std::string>();
  }
}

bool set_field(RunConfig& cfg, const std::string& key, const json& value) {
#define CALA_SET(name)            \
  if (key == #name) {             \
    read_field(value, key, cfg.name); \
    return true;                  \
  }
  CALA_CONFIG_FIELDS(CALA_SET)
#undef CALA_SET
  return false;
}

}  // namespace

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.image_vocab = image_vocab;
  s.text_vocab = text_vocab;
  s.max_image_len = max_image_len;
  s.text_len = text_len;
  s.n_train = n_train;
  s.n_val = n_val;
  s.n_attributes = n_attributes;
  s.levels = levels;
  s.subset_size = subset_size;
  s.noise_sigma = noise_sigma;
  s.seed = synth_seed;
  return s;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (dim == 0) fail("dim must be positive");
  if (image_vocab == 0 || text_vocab == 0) fail("vocabulary sizes must be positive");
  if (max_image_len == 0 || max_text_len == 0) fail("maximum lengths must be positive");
  if (tac_layers == 0) fail("tac_layers must be at least 1");
  if (tac_heads == 0 || dim % tac_heads != 0) fail("tac_heads must divide dim");
  if (attn_heads == 0 || dim % attn_heads != 0) fail("attn_heads must divide dim");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be non-negative");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (batch_size == 0) fail("batch_size must be at least 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
#define CALA_PUT(name) j[#name] = cfg.name;
  CALA_CONFIG_FIELDS(CALA_PUT)
#undef CALA_PUT
  return j;
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (!set_field(cfg, key, value)) throw ConfigError("unknown config key: " + key);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(j);
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  if (!set_field(cfg, key, value)) throw ConfigError("unknown config key: " + key);
}

}  // namespace cala
