#include "cala/checkpoint.hpp"

#include <fmt/format.h>
#include <fstream>
#include <stdexcept>

namespace cala {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json checkpoint_to_json(const ParamStore& store) {
  ordered_json j = ordered_json::object();
  for (const auto& p : store.params()) {
    ordered_json entry;
    entry["shape"] = {p.value.rows(), p.value.cols()};
    entry["data"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
    entry["frozen"] = p.frozen;
    j[p.name] = std::move(entry);
  }
  return j;
}

void checkpoint_from_json(ParamStore& store, const json& j) {
  if (!j.is_object()) throw std::runtime_error("checkpoint must be a JSON object");
  if (j.size() != store.params().size()) {
    throw std::runtime_error(fmt::format("checkpoint has {} parameters, model has {}", j.size(),
                                         store.params().size()));
  }
  for (const auto& p : store.params()) {
    if (!j.contains(p.name)) throw std::runtime_error("checkpoint lacks parameter " + p.name);
    const auto& entry = j.at(p.name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw std::runtime_error(fmt::format("checkpoint shape mismatch for {}: expected {}x{}", p.name,
                                           p.value.rows(), p.value.cols()));
    }
    if (entry.at("frozen").get<bool>() != p.frozen) {
      throw std::runtime_error("checkpoint frozen flag mismatch for " + p.name);
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != p.value.size()) {
      throw std::runtime_error("checkpoint data length mismatch for " + p.name);
    }
    Tensor handle = p.value;
    std::copy(data.begin(), data.end(), handle.mutable_data().begin());
  }
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << checkpoint_to_json(store).dump() << '\n';
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  checkpoint_from_json(store, json::parse(in));
}

}  // namespace cala
