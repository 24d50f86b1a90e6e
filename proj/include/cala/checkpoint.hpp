#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "cala/param.hpp"

namespace cala {

/// {name: {"shape": [rows, cols], "data": [...], "frozen": bool}} in
/// registration order. Doubles are written in shortest round-trip form, so
/// save followed by load is value-exact.
nlohmann::ordered_json checkpoint_to_json(const ParamStore& store);

/// Copies values into an existing store. Names, shapes and frozen flags
/// must match exactly.
void checkpoint_from_json(ParamStore& store, const nlohmann::json& j);

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace cala
