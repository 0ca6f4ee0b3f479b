#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ganscope/layers.hpp"
#include "ganscope/scene.hpp"

namespace ganscope::gen {

/// Intermediate representation r_i, the output of the first i layers.
struct LayerActivation {
  std::size_t index = 0;
  Tensor value;  // [N, shape_of(index)...]
};

/// Layered generator G = G_f(g_n(...g_1(z))).
///
/// Layers [0, split) are the early layers g_1..g_n; the remaining layers form
/// the head G_f. Every forward variant runs the same layer loop, so splitting
/// a pass at any index reproduces the unsplit result bit for bit.
class Generator {
 public:
  Generator() = default;
  Generator(nn::Sequential layers, std::size_t split);

  /// Linear stem to 64x4x4, three transposed-conv blocks (r_4 = 16x8x8),
  /// then a two-block head upsampling to 3x32x32 with tanh.
  static Generator standard(int latent_dim = 32, std::size_t split = 4);

  int latent_dim() const;
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t split() const noexcept { return split_; }
  void set_split(std::size_t split);

  /// Per-sample shape of r_i; index 0 is the latent.
  Shape shape_of(std::size_t index) const;
  const Shape& output_shape() const { return layers_.out_shape(); }

  /// z is [latent] or [N, latent]; the result drops the batch axis only when
  /// z had none.
  Tensor forward(const Tensor& z) const;
  LayerActivation forward_layers(const Tensor& z, std::size_t upto) const;
  Tensor forward_from(const LayerActivation& r) const;
  /// Layers [begin, end) applied to r_begin, batched or not.
  Tensor run(const Tensor& x, std::size_t begin, std::size_t end) const;

  /// Taped pieces with frozen weights, for inversion.
  ad::Var forward(ad::Tape& tape, ad::Var z) const;
  ad::Var forward_range(ad::Tape& tape, ad::Var x, std::size_t begin, std::size_t end) const;

  nn::Sequential& layers() noexcept { return layers_; }
  const nn::Sequential& layers() const noexcept { return layers_; }

  std::uint64_t inventory_hash() const noexcept { return inventory_hash_; }
  void set_inventory_hash(std::uint64_t h) noexcept { inventory_hash_ = h; }

  void init(std::uint64_t seed);

  friend bool operator==(const Generator& a, const Generator& b) {
    return a.split_ == b.split_ && a.inventory_hash_ == b.inventory_hash_ && a.layers_ == b.layers_;
  }

 private:
  nn::Sequential layers_;
  std::size_t split_ = 0;
  std::uint64_t inventory_hash_ = 0;
};

enum class TrainMode { kDistill, kAdversarial };
std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::kDistill;
  int steps = 20000;
  int batch = 16;
  double lr = 3e-3;  // peak of a cosine schedule
  double squared_fraction = 0.65;  // distill: leading share of steps trained on squared error
  double critic_lr = 2e-4;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> losses;  // generator loss per step
  double initial_loss = 0.0;   // distill: l1 of the untrained generator on a held-out batch
  double final_loss = 0.0;     // same batch after training
};

/// Fits `g` to the scene distribution described by `inv`.
///
/// Distill mode minimises the error between G(z) and render(decode(z)) over
/// fresh standard normal z, squared error first and l1 afterwards; a withheld class (presence 0 in `inv`) therefore never appears
/// in the targets. Adversarial mode alternates a small convolutional critic
/// with the non-saturating GAN loss against rendered scenes. Deterministic
/// given the config.
TrainReport train(Generator& g, const scene::Inventory& inv, const TrainConfig& cfg);

/// Mean l1 between G(z) and the distillation target over `n` latents drawn
/// from `seed`.
double distill_error(const Generator& g, const scene::Inventory& inv, int n, std::uint64_t seed);

/// Batch of standard-normal latents [n, dim].
Tensor sample_latents(int n, int dim, std::uint64_t seed);
/// Targets render(decode(z_k)) stacked as [n,3,H,W].
Tensor render_targets(const Tensor& z, const scene::Inventory& inv, int canvas);

void save_weights(const Generator& g, const std::filesystem::path& path);
Generator load_weights(const std::filesystem::path& path);

}  // namespace ganscope::gen
