#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/generator.hpp"

namespace ganscope::enc {

struct EncoderConfig {
  int inverter_steps = 800;  // per layer inverter
  int finetune_steps = 1500;
  int direct_steps = 0;  // direct encoder; 0 selects finetune_steps
  int batch = 16;
  double lr = 1e-3;
  double lambda_r = 0.01;  // right-inversion weight
  std::uint64_t seed = 2;
};

/// Inverter for generator layers [begin, end): maps r_end back to r_begin.
///
/// Conv blocks mirror the generator block with a 2x wider hidden width: a
/// conv with the same kernel, stride and padding followed by a 3x3 conv to
/// the target channels. The linear stem is mirrored by two linear layers.
/// A head spanning several blocks is mirrored block by block.
nn::Sequential make_inverter(const gen::Generator& g, std::size_t begin, std::size_t end);

struct InverterReport {
  double left_before = 0.0;  // validation L_L of the untrained inverter
  double left_after = 0.0;
  double right_before = 0.0;
  double right_after = 0.0;
};

/// Minimises L_L + lambda_r * L_R over r_begin sampled by pushing random z
/// through the first `begin` generator layers.
InverterReport train_layer_inverter(const gen::Generator& g, std::size_t begin, std::size_t end,
                                    nn::Sequential& inverter, const EncoderConfig& cfg,
                                    std::uint64_t seed);

/// Validation losses of an image-to-latent encoder on generated samples.
struct EncoderEval {
  double latent_l1 = 0.0;  // l1(z, E(G(z)))
  double image_l1 = 0.0;   // l1(G(z), G(E(G(z))))
};

struct FinetuneReport {
  EncoderEval before;
  EncoderEval after;
};

/// End-to-end objective l1(z, E(G(z))) + l1(G(z), G(E(G(z)))).
FinetuneReport finetune_encoder(const gen::Generator& g, nn::Sequential& encoder, int steps,
                                const EncoderConfig& cfg, std::uint64_t seed);

EncoderEval evaluate_encoder(const gen::Generator& g, const nn::Sequential& encoder, int n,
                             std::uint64_t seed);

struct EncoderStack {
  /// inverters[i-1] is e_i (r_i -> r_{i-1}) for i = 1..n.
  std::vector<nn::Sequential> inverters;
  nn::Sequential head_inverter;  // e_f: image -> r_n
  nn::Sequential composed;       // E* = e_1(e_2(...e_n(e_f(x))))
  nn::Sequential finetuned;      // E
  nlohmann::json provenance = nlohmann::json::object();

  /// Image [N,3,H,W] (or [3,H,W]) to latents with the fine-tuned encoder.
  Tensor encode(const Tensor& images) const;
};

/// E* assembled from the trained pieces; throws if any inverter is missing.
nn::Sequential compose(const std::vector<nn::Sequential>& inverters, const nn::Sequential& head);

/// Trains e_f then e_n..e_1, composes E* and fine-tunes it into E.
EncoderStack train_encoder_stack(const gen::Generator& g, const EncoderConfig& cfg);

/// Same architecture as E, trained end to end from scratch with the
/// fine-tuning objective.
nn::Sequential train_direct_encoder(const gen::Generator& g, const EncoderConfig& cfg,
                                    FinetuneReport* report = nullptr);

/// Runs a frozen image-to-latent network on [N,3,H,W] or [3,H,W] input.
Tensor run_encoder(const nn::Sequential& encoder, const Tensor& images);

void save_stack(const EncoderStack& stack, const std::filesystem::path& path);
EncoderStack load_stack(const std::filesystem::path& path);
void save_direct(const nn::Sequential& encoder, const nlohmann::json& meta,
                 const std::filesystem::path& path);
nn::Sequential load_direct(const std::filesystem::path& path);

}  // namespace ganscope::enc
