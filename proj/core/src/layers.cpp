#include "ganscope/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ganscope::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv: return "conv";
    case LayerKind::kConvTranspose: return "conv_transpose";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kNone: return "none";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "linear") return LayerKind::kLinear;
  if (s == "conv") return LayerKind::kConv;
  if (s == "conv_transpose") return LayerKind::kConvTranspose;
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "none") return Activation::kNone;
  if (s == "leaky_relu") return Activation::kLeakyRelu;
  if (s == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::conv(Shape in, int out_channels, int kernel, int stride, int padding,
                          Activation act) {
  if (in.size() != 3) throw ShapeError("conv layer input must be [C,H,W], got " + ganscope::to_string(in));
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  s.out_shape = {out_channels, (in[1] + 2 * padding - kernel) / stride + 1,
                 (in[2] + 2 * padding - kernel) / stride + 1};
  s.in_shape = std::move(in);
  return s;
}

LayerSpec LayerSpec::conv_transpose(Shape in, int out_channels, int kernel, int stride,
                                    int padding, Activation act) {
  if (in.size() != 3) {
    throw ShapeError("conv_transpose layer input must be [C,H,W], got " + ganscope::to_string(in));
  }
  LayerSpec s;
  s.kind = LayerKind::kConvTranspose;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  s.out_shape = {out_channels, (in[1] - 1) * stride - 2 * padding + kernel,
                 (in[2] - 1) * stride - 2 * padding + kernel};
  s.in_shape = std::move(in);
  return s;
}

LayerSpec LayerSpec::linear(Shape in, Shape out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::kLinear;
  s.in_shape = std::move(in);
  s.out_shape = std::move(out);
  s.activation = act;
  return s;
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kLinear:
      return {static_cast<int>(element_count(in_shape)), static_cast<int>(element_count(out_shape))};
    case LayerKind::kConv:
      return {out_shape[0], in_shape[0], kernel, kernel};
    case LayerKind::kConvTranspose:
      return {in_shape[0], out_shape[0], kernel, kernel};
  }
  return {};
}

Shape LayerSpec::bias_shape() const {
  if (kind == LayerKind::kLinear) return {static_cast<int>(element_count(out_shape))};
  return {out_shape[0]};
}

double LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::kLinear: return static_cast<double>(element_count(in_shape));
    case LayerKind::kConv: return static_cast<double>(in_shape[0]) * kernel * kernel;
    case LayerKind::kConvTranspose:
      return static_cast<double>(in_shape[0]) * kernel * kernel / (static_cast<double>(stride) * stride);
  }
  return 1.0;
}

Layer::Layer(LayerSpec spec)
    : spec_(std::move(spec)), weight_(spec_.weight_shape()), bias_(spec_.bias_shape()) {}

void Layer::init(Rng& rng) {
  const double slope = spec_.activation == Activation::kLeakyRelu ? spec_.slope : 1.0;
  const double gain = spec_.activation == Activation::kLeakyRelu
                          ? std::sqrt(2.0 / (1.0 + slope * slope))
                          : 1.0;
  const double bound = gain * std::sqrt(3.0 / spec_.fan_in());
  for (float& w : weight_.data()) w = static_cast<float>(rng.uniform(-bound, bound));
  for (float& b : bias_.data()) b = 0.0f;
}

ad::Var Layer::apply(ad::Var x, ad::Var w, ad::Var b) const {
  const int n = x.shape().at(0);
  const Shape expect = batched(n, spec_.in_shape);
  if (element_count(x.shape()) != element_count(expect)) {
    throw ShapeError("layer expects input " + ganscope::to_string(expect) + ", got " +
                     ganscope::to_string(x.shape()));
  }
  ad::Var y;
  switch (spec_.kind) {
    case LayerKind::kLinear: {
      ad::Var flat = ad::reshape(x, {n, static_cast<int>(element_count(spec_.in_shape))});
      y = ad::reshape(ad::linear(flat, w, b), batched(n, spec_.out_shape));
      break;
    }
    case LayerKind::kConv:
      if (x.shape() != expect) x = ad::reshape(x, expect);
      y = ad::add_channel_bias(ad::conv2d(x, w, {spec_.stride, spec_.padding}), b);
      break;
    case LayerKind::kConvTranspose:
      if (x.shape() != expect) x = ad::reshape(x, expect);
      y = ad::add_channel_bias(ad::conv_transpose2d(x, w, {spec_.stride, spec_.padding}), b);
      break;
  }
  switch (spec_.activation) {
    case Activation::kNone: return y;
    case Activation::kLeakyRelu: return ad::leaky_relu(y, spec_.slope);
    case Activation::kTanh: return ad::tanh(y);
  }
  return y;
}

ad::Var Layer::forward(ad::Tape& tape, ad::Var x, Weights mode) {
  if (mode == Weights::kFrozen) return std::as_const(*this).forward(tape, x);
  return apply(x, tape.param(weight_), tape.param(bias_));
}

ad::Var Layer::forward(ad::Tape& tape, ad::Var x) const {
  return apply(x, tape.constant_ref(weight_), tape.constant_ref(bias_));
}

Sequential::Sequential(std::vector<LayerSpec> specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && element_count(specs[i].in_shape) != element_count(layers_.back().spec().out_shape)) {
      throw ShapeError("layer " + std::to_string(i) + " input " +
                       ganscope::to_string(specs[i].in_shape) + " does not follow output " +
                       ganscope::to_string(layers_.back().spec().out_shape));
    }
    layers_.emplace_back(std::move(specs[i]));
  }
}

void Sequential::init(Rng& rng) {
  for (Layer& l : layers_) l.init(rng);
}

ad::Var Sequential::forward(ad::Tape& tape, ad::Var x, Weights mode) {
  return forward_range(tape, x, 0, layers_.size(), mode);
}

ad::Var Sequential::forward(ad::Tape& tape, ad::Var x) const {
  return forward_range(tape, x, 0, layers_.size());
}

ad::Var Sequential::forward_range(ad::Tape& tape, ad::Var x, std::size_t begin, std::size_t end,
                                  Weights mode) {
  if (begin > end || end > layers_.size()) throw std::out_of_range("layer range out of bounds");
  for (std::size_t i = begin; i < end; ++i) x = layers_[i].forward(tape, x, mode);
  return x;
}

ad::Var Sequential::forward_range(ad::Tape& tape, ad::Var x, std::size_t begin,
                                  std::size_t end) const {
  if (begin > end || end > layers_.size()) throw std::out_of_range("layer range out of bounds");
  for (std::size_t i = begin; i < end; ++i) x = layers_[i].forward(tape, x);
  return x;
}

std::vector<Tensor*> Sequential::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

void Sequential::append(Layer layer) {
  if (!layers_.empty() &&
      element_count(layer.spec().in_shape) != element_count(layers_.back().spec().out_shape)) {
    throw ShapeError("appended layer input " + ganscope::to_string(layer.spec().in_shape) +
                     " does not follow " + ganscope::to_string(layers_.back().spec().out_shape));
  }
  layers_.push_back(std::move(layer));
}

void Sequential::append(const Sequential& other) {
  for (std::size_t i = 0; i < other.size(); ++i) append(other[i]);
}

bool operator==(const Sequential& a, const Sequential& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].spec() == b[i].spec()) || !(a[i].weight() == b[i].weight()) ||
        !(a[i].bias() == b[i].bias()))
      return false;
  }
  return true;
}

Shape batched(int n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

}  // namespace ganscope::nn
