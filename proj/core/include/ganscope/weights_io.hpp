#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/layers.hpp"

namespace ganscope::io {

/// Container shared by generator and encoder weight files:
///
///   "GSCP" | u16 version | u32 header length | JSON header | float32 blobs
///
/// All integers and floats are little-endian. The header lists every
/// network's layer specs; blobs follow in that order, weight then bias per
/// layer.
inline constexpr char kWeightsMagic[4] = {'G', 'S', 'C', 'P'};
inline constexpr std::uint16_t kWeightsVersion = 1;

struct NetworkBundle {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, nn::Sequential>> networks;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_bundle(const NetworkBundle& bundle);
NetworkBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

void write_bundle(const std::filesystem::path& path, const NetworkBundle& bundle);
NetworkBundle read_bundle(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

nlohmann::json spec_to_json(const nn::LayerSpec& spec);
nn::LayerSpec spec_from_json(const nlohmann::json& j);

}  // namespace ganscope::io
