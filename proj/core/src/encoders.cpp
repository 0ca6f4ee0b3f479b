#include "ganscope/encoders.hpp"

#include <stdexcept>
#include <string>

#include "ganscope/optim.hpp"
#include "ganscope/rng.hpp"
#include "ganscope/weights_io.hpp"

namespace ganscope::enc {
namespace {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;

constexpr std::uint64_t kStreamInit = 0x100;
constexpr std::uint64_t kStreamTrain = 0x200;
constexpr std::uint64_t kStreamValid = 0x300;
constexpr int kValidationSize = 64;

// Layers [0, index) applied to z; index 0 returns z itself.
Tensor activation_at(const gen::Generator& g, const Tensor& z, std::size_t index) {
  return index == 0 ? z : g.forward_layers(z, index).value;
}

struct InverterLosses {
  double left = 0.0;
  double right = 0.0;
};

InverterLosses inverter_losses(const gen::Generator& g, std::size_t begin, std::size_t end,
                               const nn::Sequential& inverter, std::uint64_t seed) {
  const Tensor z = gen::sample_latents(kValidationSize, g.latent_dim(), seed);
  const Tensor ra = activation_at(g, z, begin);
  const Tensor rb = g.run(ra, begin, end);
  ad::Tape tape;
  ad::Var est = inverter.forward(tape, tape.constant_ref(rb));
  ad::Var left = ad::l1(est, tape.constant_ref(ra));
  ad::Var right = ad::l1(g.forward_range(tape, est, begin, end), tape.constant_ref(rb));
  return {left.value().item(), right.value().item()};
}

void init_network(nn::Sequential& net, std::uint64_t seed) {
  Rng rng(seed);
  net.init(rng);
}

}  // namespace

nn::Sequential make_inverter(const gen::Generator& g, std::size_t begin, std::size_t end) {
  if (begin >= end || end > g.depth()) {
    throw std::out_of_range("inverter range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") is not inside the generator");
  }
  std::vector<LayerSpec> specs;
  for (std::size_t i = end; i-- > begin;) {
    const LayerSpec& s = g.layers()[i].spec();
    switch (s.kind) {
      case LayerKind::kConvTranspose: {
        LayerSpec down = LayerSpec::conv(s.out_shape, 2 * s.in_shape[0], s.kernel, s.stride, s.padding,
                                         Activation::kLeakyRelu);
        if (down.out_shape[1] != s.in_shape[1] || down.out_shape[2] != s.in_shape[2]) {
          throw ShapeError("cannot mirror layer " + std::to_string(i) + ": geometry is not invertible");
        }
        specs.push_back(down);
        specs.push_back(LayerSpec::conv(down.out_shape, s.in_shape[0], 3, 1, 1, Activation::kNone));
        break;
      }
      case LayerKind::kLinear: {
        const int hidden = 2 * static_cast<int>(element_count(s.in_shape));
        specs.push_back(LayerSpec::linear(s.out_shape, {hidden}, Activation::kLeakyRelu));
        specs.push_back(LayerSpec::linear({hidden}, s.in_shape, Activation::kNone));
        break;
      }
      case LayerKind::kConv:
        throw std::invalid_argument("generator layer " + std::to_string(i) +
                                    " is a plain convolution; only transposed convolutions and "
                                    "linear layers can be mirrored");
    }
  }
  return nn::Sequential(std::move(specs));
}

InverterReport train_layer_inverter(const gen::Generator& g, std::size_t begin, std::size_t end,
                                    nn::Sequential& inverter, const EncoderConfig& cfg,
                                    std::uint64_t seed) {
  if (inverter.in_shape() != g.shape_of(end) || inverter.out_shape() != g.shape_of(begin)) {
    throw ShapeError("inverter maps " + to_string(inverter.in_shape()) + " -> " +
                     to_string(inverter.out_shape()) + " but layers [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") need " + to_string(g.shape_of(end)) + " -> " +
                     to_string(g.shape_of(begin)));
  }
  if (cfg.inverter_steps < 1 || cfg.batch < 1) throw std::invalid_argument("inverter training needs steps and batch >= 1");
  if (cfg.lambda_r < 0.0) throw std::invalid_argument("lambda_r must be non-negative");
  const std::uint64_t valid_seed = derive_seed(seed, kStreamValid);
  InverterReport rep;
  const InverterLosses before = inverter_losses(g, begin, end, inverter, valid_seed);
  rep.left_before = before.left;
  rep.right_before = before.right;

  ad::Adam opt(inverter.parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  const auto lambda_r = static_cast<float>(cfg.lambda_r);
  for (int step = 0; step < cfg.inverter_steps; ++step) {
    const Tensor z = gen::sample_latents(cfg.batch, g.latent_dim(),
                                         derive_seed(seed, kStreamTrain + static_cast<std::uint64_t>(step)));
    const Tensor ra = activation_at(g, z, begin);
    const Tensor rb = g.run(ra, begin, end);
    opt.zero_grad();
    ad::Tape tape;
    ad::Var est = inverter.forward(tape, tape.constant_ref(rb), nn::Weights::kTrainable);
    ad::Var left = ad::l1(est, tape.constant_ref(ra));
    ad::Var loss = left;
    if (lambda_r > 0.0f) {
      ad::Var right = ad::l1(g.forward_range(tape, est, begin, end), tape.constant_ref(rb));
      loss = ad::add(left, ad::scale(right, lambda_r));
    }
    tape.backward(loss);
    opt.step();
  }
  const InverterLosses after = inverter_losses(g, begin, end, inverter, valid_seed);
  rep.left_after = after.left;
  rep.right_after = after.right;
  return rep;
}

EncoderEval evaluate_encoder(const gen::Generator& g, const nn::Sequential& encoder, int n,
                             std::uint64_t seed) {
  const Tensor z = gen::sample_latents(n, g.latent_dim(), seed);
  const Tensor x = g.forward(z);
  ad::Tape tape;
  ad::Var est = encoder.forward(tape, tape.constant_ref(x));
  ad::Var latent = ad::l1(est, tape.constant_ref(z));
  ad::Var image = ad::l1(g.forward(tape, est), tape.constant_ref(x));
  return {latent.value().item(), image.value().item()};
}

FinetuneReport finetune_encoder(const gen::Generator& g, nn::Sequential& encoder, int steps,
                                const EncoderConfig& cfg, std::uint64_t seed) {
  if (encoder.in_shape() != g.output_shape() || encoder.out_shape() != g.shape_of(0)) {
    throw ShapeError("encoder maps " + to_string(encoder.in_shape()) + " -> " +
                     to_string(encoder.out_shape()) + ", generator needs the reverse of " +
                     to_string(g.shape_of(0)) + " -> " + to_string(g.output_shape()));
  }
  if (steps < 0 || cfg.batch < 1) throw std::invalid_argument("fine-tuning needs steps >= 0 and batch >= 1");
  const std::uint64_t valid_seed = derive_seed(seed, kStreamValid);
  FinetuneReport rep;
  rep.before = evaluate_encoder(g, encoder, kValidationSize, valid_seed);
  ad::Adam opt(encoder.parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  for (int step = 0; step < steps; ++step) {
    const Tensor z = gen::sample_latents(cfg.batch, g.latent_dim(),
                                         derive_seed(seed, kStreamTrain + static_cast<std::uint64_t>(step)));
    const Tensor x = g.forward(z);
    opt.zero_grad();
    ad::Tape tape;
    ad::Var est = encoder.forward(tape, tape.constant_ref(x), nn::Weights::kTrainable);
    ad::Var loss = ad::add(ad::l1(est, tape.constant_ref(z)),
                           ad::l1(g.forward(tape, est), tape.constant_ref(x)));
    tape.backward(loss);
    opt.step();
  }
  rep.after = evaluate_encoder(g, encoder, kValidationSize, valid_seed);
  return rep;
}

nn::Sequential compose(const std::vector<nn::Sequential>& inverters, const nn::Sequential& head) {
  if (head.empty()) throw std::invalid_argument("composition needs the head inverter e_f");
  if (inverters.empty()) throw std::invalid_argument("composition needs at least one layer inverter");
  nn::Sequential out;
  out.append(head);
  for (std::size_t i = inverters.size(); i-- > 0;) {
    if (inverters[i].empty()) {
      throw std::invalid_argument("layer inverter e_" + std::to_string(i + 1) + " is missing");
    }
    out.append(inverters[i]);
  }
  return out;
}

Tensor EncoderStack::encode(const Tensor& images) const { return run_encoder(finetuned, images); }

EncoderStack train_encoder_stack(const gen::Generator& g, const EncoderConfig& cfg) {
  const std::size_t n = g.split();
  const std::size_t depth = g.depth();
  EncoderStack st;
  nlohmann::json layers = nlohmann::json::array();

  // Stream k seeds inverter k, where k = n for e_f and i - 1 for e_i.
  auto layer_seed = [&](std::size_t k) { return derive_seed(cfg.seed, kStreamInit + k); };
  st.head_inverter = make_inverter(g, n, depth);
  init_network(st.head_inverter, layer_seed(n));
  const InverterReport head = train_layer_inverter(g, n, depth, st.head_inverter, cfg, layer_seed(n));
  layers.push_back({{"name", "e_f"},
                    {"left_before", head.left_before},
                    {"left_after", head.left_after},
                    {"right_before", head.right_before},
                    {"right_after", head.right_after}});

  st.inverters.resize(n);
  for (std::size_t i = n; i >= 1; --i) {
    nn::Sequential& e = st.inverters[i - 1];
    e = make_inverter(g, i - 1, i);
    init_network(e, layer_seed(i - 1));
    const InverterReport r = train_layer_inverter(g, i - 1, i, e, cfg, layer_seed(i - 1));
    layers.push_back({{"name", "e_" + std::to_string(i)},
                      {"left_before", r.left_before},
                      {"left_after", r.left_after},
                      {"right_before", r.right_before},
                      {"right_after", r.right_after}});
  }

  st.composed = compose(st.inverters, st.head_inverter);
  st.finetuned = st.composed;
  const FinetuneReport ft =
      finetune_encoder(g, st.finetuned, cfg.finetune_steps, cfg, derive_seed(cfg.seed, kStreamTrain));
  st.provenance = {{"seed", cfg.seed},
                   {"inverter_steps", cfg.inverter_steps},
                   {"finetune_steps", cfg.finetune_steps},
                   {"batch", cfg.batch},
                   {"lr", cfg.lr},
                   {"lambda_r", cfg.lambda_r},
                   {"layers", layers},
                   {"composed", {{"latent_l1", ft.before.latent_l1}, {"image_l1", ft.before.image_l1}}},
                   {"finetuned", {{"latent_l1", ft.after.latent_l1}, {"image_l1", ft.after.image_l1}}}};
  return st;
}

nn::Sequential train_direct_encoder(const gen::Generator& g, const EncoderConfig& cfg,
                                    FinetuneReport* report) {
  nn::Sequential e = make_inverter(g, 0, g.depth());
  init_network(e, derive_seed(cfg.seed, kStreamInit + 0xd1));
  const int steps = cfg.direct_steps > 0 ? cfg.direct_steps : cfg.finetune_steps;
  const FinetuneReport rep = finetune_encoder(g, e, steps, cfg, derive_seed(cfg.seed, kStreamTrain + 0xd1));
  if (report) *report = rep;
  return e;
}

Tensor run_encoder(const nn::Sequential& encoder, const Tensor& images) {
  const Shape& per = encoder.in_shape();
  const bool unbatched = images.shape() == per;
  Tensor in = images;
  in.drop_grad();
  if (unbatched) {
    in.reshape(nn::batched(1, per));
  } else if (images.rank() != per.size() + 1 ||
             !std::equal(per.begin(), per.end(), images.shape().begin() + 1)) {
    throw ShapeError("encoder expects " + to_string(per) + " or a batch of it, got " +
                     to_string(images.shape()));
  }
  ad::Tape tape;
  Tensor out = encoder.forward(tape, tape.constant(std::move(in))).value();
  if (unbatched) out.reshape(encoder.out_shape());
  return out;
}

void save_stack(const EncoderStack& stack, const std::filesystem::path& path) {
  io::NetworkBundle b;
  b.kind = "encoder_stack";
  b.meta = stack.provenance;
  for (std::size_t i = 0; i < stack.inverters.size(); ++i) {
    b.networks.emplace_back("e_" + std::to_string(i + 1), stack.inverters[i]);
  }
  b.networks.emplace_back("e_f", stack.head_inverter);
  b.networks.emplace_back("E_star", stack.composed);
  b.networks.emplace_back("E", stack.finetuned);
  io::write_bundle(path, b);
}

EncoderStack load_stack(const std::filesystem::path& path) {
  io::NetworkBundle b = io::read_bundle(path);
  if (b.kind != "encoder_stack") {
    throw io::FormatError("'" + path.string() + "' holds a " + b.kind + ", not an encoder stack");
  }
  EncoderStack st;
  st.provenance = b.meta;
  for (auto& [name, net] : b.networks) {
    if (name == "e_f") {
      st.head_inverter = std::move(net);
    } else if (name == "E_star") {
      st.composed = std::move(net);
    } else if (name == "E") {
      st.finetuned = std::move(net);
    } else if (name.rfind("e_", 0) == 0) {
      st.inverters.push_back(std::move(net));
    } else {
      throw io::FormatError("'" + path.string() + "': unexpected network '" + name + "'");
    }
  }
  if (st.finetuned.empty() || st.composed.empty() || st.head_inverter.empty() || st.inverters.empty()) {
    throw io::FormatError("'" + path.string() + "': encoder stack is incomplete");
  }
  return st;
}

void save_direct(const nn::Sequential& encoder, const nlohmann::json& meta,
                 const std::filesystem::path& path) {
  io::NetworkBundle b;
  b.kind = "encoder_direct";
  b.meta = meta;
  b.networks.emplace_back("E_direct", encoder);
  io::write_bundle(path, b);
}

nn::Sequential load_direct(const std::filesystem::path& path) {
  io::NetworkBundle b = io::read_bundle(path);
  if (b.kind != "encoder_direct" || b.networks.size() != 1) {
    throw io::FormatError("'" + path.string() + "' is not a direct encoder file");
  }
  return std::move(b.networks[0].second);
}

}  // namespace ganscope::enc
