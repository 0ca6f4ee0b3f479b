#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "ganscope/scene.hpp"

namespace ganscope::harness {

/// {"classes": [{"id", "name", "color": [r,g,b], "family", "size_min",
/// "size_max", "aspect", "presence"}, ...]}
nlohmann::json inventory_to_json(const scene::Inventory& inv);
/// Validates the result; throws DataError on malformed or invalid input.
scene::Inventory inventory_from_json(const nlohmann::json& j);
scene::Inventory read_inventory(const std::filesystem::path& path);

}  // namespace ganscope::harness
