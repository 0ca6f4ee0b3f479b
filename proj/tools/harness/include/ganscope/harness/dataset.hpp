#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/scene.hpp"

namespace ganscope::harness {

/// A dataset directory: images/NNNNN.png (8-bit RGB), segs/NNNNN.png (class
/// id per pixel) and manifest.json (inventory, seeds, withheld classes).
struct Dataset {
  scene::Inventory inventory;
  std::vector<Tensor> images;  // [3,H,W] in [-1,1]
  std::vector<scene::SegMap> segs;
  nlohmann::json manifest;
};

std::string sample_name(std::size_t index);

/// Writes make_dataset(n, seed, inv, withhold) to `dir`.
void export_dataset(const std::filesystem::path& dir, int n, std::uint64_t seed,
                    const scene::Inventory& inv, std::optional<int> withhold);

/// Reads the first `limit` samples (all when limit < 0).
Dataset load_dataset(const std::filesystem::path& dir, int limit = -1);

/// Every *.png directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace ganscope::harness
