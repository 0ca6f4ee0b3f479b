#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "ganscope/encoders.hpp"
#include "ganscope/generator.hpp"
#include "ganscope/inversion.hpp"

namespace ganscope::harness {

/// Bad command-line usage; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unreadable input data; maps to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ExperimentConfig() { derive_seeds(); }

  std::uint64_t seed = 1;     // master seed
  std::string inventory;      // JSON inventory file; empty selects the standard one
  int withhold = 4;           // class absent from the generator's training data; 0 for none
  int dataset_size = 20000;   // truth samples; the noise floor splits them in half
  int generated_size = 10000; // generated samples for statistics
  int top_k = 8;              // histogram classes
  gen::TrainConfig generator;
  enc::EncoderConfig encoder;
  inv::InversionConfig inversion;
  int invert_images = 100;
  std::string methods = "abcdef";
  std::string output = "run";

  /// Seeds of every stage, derived from the master seed.
  void derive_seeds();
  void validate() const;
  scene::Inventory load_inventory() const;
};

/// TOML-style `key = value` text with `[section]` headers. Every field is
/// written, doubles at full precision, so parse(dump(c)) == c.
std::string dump(const ExperimentConfig& c);
ExperimentConfig parse(const std::string& text);
ExperimentConfig load(const std::filesystem::path& path);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace ganscope::harness
