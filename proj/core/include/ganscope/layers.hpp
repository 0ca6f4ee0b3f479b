#pragma once

#include <string>
#include <vector>

#include "ganscope/ops.hpp"
#include "ganscope/rng.hpp"

namespace ganscope::nn {

enum class LayerKind { kLinear, kConv, kConvTranspose };
enum class Activation { kNone, kLeakyRelu, kTanh };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

/// Whether a forward pass should register weights as trainable leaves.
enum class Weights { kTrainable, kFrozen };

/// Geometry of one layer; shapes exclude the batch axis.
///
/// A linear layer flattens its input and reshapes its output, so it doubles
/// as the "project and reshape" stem of a generator.
struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  Shape in_shape;
  Shape out_shape;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  Activation activation = Activation::kNone;
  float slope = 0.2f;

  /// Fills out_shape for conv layers from in_shape, channel count and geometry.
  static LayerSpec conv(Shape in, int out_channels, int kernel, int stride, int padding,
                        Activation act);
  static LayerSpec conv_transpose(Shape in, int out_channels, int kernel, int stride,
                                  int padding, Activation act);
  static LayerSpec linear(Shape in, Shape out, Activation act);

  Shape weight_shape() const;
  Shape bias_shape() const;
  /// Contributions summed into one output element; drives initialization.
  double fan_in() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

class Layer {
 public:
  Layer() = default;
  explicit Layer(LayerSpec spec);

  const LayerSpec& spec() const noexcept { return spec_; }
  Tensor& weight() noexcept { return weight_; }
  Tensor& bias() noexcept { return bias_; }
  const Tensor& weight() const noexcept { return weight_; }
  const Tensor& bias() const noexcept { return bias_; }

  /// Kaiming-uniform (fan-in) weights, zero bias.
  void init(Rng& rng);
  /// x has shape [N, in_shape...]; result [N, out_shape...].
  ad::Var forward(ad::Tape& tape, ad::Var x, Weights mode);
  /// Frozen-weight pass.
  ad::Var forward(ad::Tape& tape, ad::Var x) const;

 private:
  ad::Var apply(ad::Var x, ad::Var w, ad::Var b) const;

  LayerSpec spec_;
  Tensor weight_;
  Tensor bias_;
};

/// Ordered chain of layers.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> specs);

  void init(Rng& rng);
  ad::Var forward(ad::Tape& tape, ad::Var x, Weights mode);
  ad::Var forward(ad::Tape& tape, ad::Var x) const;
  /// Runs layers [begin, end).
  ad::Var forward_range(ad::Tape& tape, ad::Var x, std::size_t begin, std::size_t end,
                        Weights mode);
  ad::Var forward_range(ad::Tape& tape, ad::Var x, std::size_t begin, std::size_t end) const;

  std::size_t size() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  Layer& operator[](std::size_t i) { return layers_.at(i); }
  const Layer& operator[](std::size_t i) const { return layers_.at(i); }
  const Shape& in_shape() const { return layers_.front().spec().in_shape; }
  const Shape& out_shape() const { return layers_.back().spec().out_shape; }

  std::vector<Tensor*> parameters();
  void append(Layer layer);
  void append(const Sequential& other);

  friend bool operator==(const Sequential& a, const Sequential& b);

 private:
  std::vector<Layer> layers_;
};

/// Prepends a batch axis.
Shape batched(int n, const Shape& per_sample);

}  // namespace ganscope::nn
