#include "ganscope/generator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ganscope/optim.hpp"
#include "ganscope/rng.hpp"
#include "ganscope/weights_io.hpp"

namespace ganscope::gen {
namespace {

using nn::Activation;
using nn::LayerSpec;

constexpr std::uint64_t kStreamBatch = 0x1000;
constexpr std::uint64_t kStreamHoldout = 0x2000;
constexpr std::uint64_t kStreamInit = 0x3000;
constexpr std::uint64_t kStreamCritic = 0x4000;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

nn::Sequential make_critic(const Shape& image_shape) {
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::conv(image_shape, 16, 4, 2, 1, Activation::kLeakyRelu));
  specs.push_back(LayerSpec::conv(specs.back().out_shape, 32, 4, 2, 1, Activation::kLeakyRelu));
  specs.push_back(LayerSpec::linear(specs.back().out_shape, {1}, Activation::kNone));
  return nn::Sequential(std::move(specs));
}

}  // namespace

Generator::Generator(nn::Sequential layers, std::size_t split) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("generator needs at least one layer");
  if (layers_.in_shape().size() != 1) {
    throw ShapeError("generator input must be a flat latent, got " + ganscope::to_string(layers_.in_shape()));
  }
  set_split(split);
}

Generator Generator::standard(int latent_dim, std::size_t split) {
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::linear({latent_dim}, {64, 4, 4}, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv_transpose({64, 4, 4}, 32, 4, 2, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv_transpose({32, 8, 8}, 32, 3, 1, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv_transpose({32, 8, 8}, 16, 3, 1, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv_transpose({16, 8, 8}, 16, 4, 2, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv_transpose({16, 16, 16}, 3, 4, 2, 1, Activation::kTanh));
  return Generator(nn::Sequential(std::move(s)), split);
}

int Generator::latent_dim() const { return layers_.in_shape().at(0); }

void Generator::set_split(std::size_t split) {
  if (split < 1 || split > layers_.size()) {
    throw std::out_of_range("split index " + std::to_string(split) + " outside [1, " +
                            std::to_string(layers_.size()) + "]");
  }
  split_ = split;
}

Shape Generator::shape_of(std::size_t index) const {
  if (index > layers_.size()) throw std::out_of_range("layer index out of range");
  return index == 0 ? layers_.in_shape() : layers_[index - 1].spec().out_shape;
}

void Generator::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamInit));
  layers_.init(rng);
}

Tensor Generator::run(const Tensor& x, std::size_t begin, std::size_t end) const {
  if (begin > end || end > layers_.size()) throw std::out_of_range("layer range out of bounds");
  const Shape per = shape_of(begin);
  const bool unbatched = x.shape() == per;
  Tensor in = x;
  in.drop_grad();
  if (unbatched) {
    in.reshape(nn::batched(1, per));
  } else if (x.rank() != per.size() + 1 || !std::equal(per.begin(), per.end(), x.shape().begin() + 1)) {
    throw ShapeError("generator layer " + std::to_string(begin) + " expects " + ganscope::to_string(per) +
                     " or a batch of it, got " + ganscope::to_string(x.shape()));
  }
  ad::Tape tape;
  ad::Var out = layers_.forward_range(tape, tape.constant(std::move(in)), begin, end);
  Tensor result = out.value();
  if (unbatched) result.reshape(shape_of(end));
  return result;
}

Tensor Generator::forward(const Tensor& z) const {
  if (z.shape().back() != latent_dim()) {
    throw ShapeError("latent of shape " + ganscope::to_string(z.shape()) + " does not match latent dim " +
                     std::to_string(latent_dim()));
  }
  return run(z, 0, layers_.size());
}

LayerActivation Generator::forward_layers(const Tensor& z, std::size_t upto) const {
  if (upto < 1 || upto > layers_.size()) {
    throw std::out_of_range("forward_layers index " + std::to_string(upto) + " outside [1, " +
                            std::to_string(layers_.size()) + "]");
  }
  if (z.shape().back() != latent_dim()) {
    throw ShapeError("latent of shape " + ganscope::to_string(z.shape()) + " does not match latent dim " +
                     std::to_string(latent_dim()));
  }
  return {upto, run(z, 0, upto)};
}

Tensor Generator::forward_from(const LayerActivation& r) const {
  if (r.index < 1 || r.index > layers_.size()) throw std::out_of_range("activation index out of range");
  return run(r.value, r.index, layers_.size());
}

ad::Var Generator::forward(ad::Tape& tape, ad::Var z) const {
  return layers_.forward_range(tape, z, 0, layers_.size());
}

ad::Var Generator::forward_range(ad::Tape& tape, ad::Var x, std::size_t begin, std::size_t end) const {
  return layers_.forward_range(tape, x, begin, end);
}

std::string to_string(TrainMode m) { return m == TrainMode::kDistill ? "distill" : "adversarial"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "distill") return TrainMode::kDistill;
  if (s == "adversarial") return TrainMode::kAdversarial;
  throw std::invalid_argument("unknown training mode '" + s + "'");
}

Tensor sample_latents(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z(Shape{n, dim});
  for (float& v : z.data()) v = static_cast<float>(rng.normal());
  return z;
}

Tensor render_targets(const Tensor& z, const scene::Inventory& inv, int canvas) {
  const int n = z.dim(0), dim = z.dim(1);
  const std::size_t per = 3 * static_cast<std::size_t>(canvas) * canvas;
  Tensor out(Shape{n, 3, canvas, canvas});
  for (int k = 0; k < n; ++k) {
    std::span<const float> zk = z.data().subspan(static_cast<std::size_t>(k) * dim, dim);
    Tensor img = scene::render(scene::decode(zk, inv, canvas), inv);
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + k * per);
  }
  return out;
}

double distill_error(const Generator& g, const scene::Inventory& inv, int n, std::uint64_t seed) {
  const Tensor z = sample_latents(n, g.latent_dim(), seed);
  const Tensor target = render_targets(z, inv, g.output_shape().at(1));
  const Tensor out = g.forward(z);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += std::fabs(out[i] - target[i]);
  return acc / static_cast<double>(out.size());
}

TrainReport train(Generator& g, const scene::Inventory& inv, const TrainConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("training needs steps >= 1");
  if (cfg.batch < 1) throw std::invalid_argument("training needs batch >= 1");
  inv.validate();
  if (inv.latent_dim() != g.latent_dim()) {
    throw ShapeError("generator latent dim " + std::to_string(g.latent_dim()) +
                     " does not match the scene latent dim " + std::to_string(inv.latent_dim()));
  }
  const Shape& out_shape = g.output_shape();
  if (out_shape.size() != 3 || out_shape[0] != 3 || out_shape[1] != out_shape[2]) {
    throw ShapeError("generator output " + ganscope::to_string(out_shape) + " is not a square RGB image");
  }
  const int canvas = out_shape[1];
  g.set_inventory_hash(inv.hash());

  TrainReport report;
  const std::uint64_t holdout_seed = derive_seed(cfg.seed, kStreamHoldout);
  report.initial_loss = distill_error(g, inv, 64, holdout_seed);

  ad::Adam opt(g.layers().parameters(), {cfg.lr, 0.5, 0.999, 1e-8});
  if (cfg.mode == TrainMode::kDistill) {
    opt = ad::Adam(g.layers().parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
    const int sq_steps = static_cast<int>(std::lround(cfg.squared_fraction * cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
      const Tensor z = sample_latents(cfg.batch, g.latent_dim(),
                                      derive_seed(cfg.seed, kStreamBatch + static_cast<std::uint64_t>(step)));
      const Tensor target = render_targets(z, inv, canvas);
      opt.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / cfg.steps)));
      opt.zero_grad();
      ad::Tape tape;
      ad::Var out = g.layers().forward(tape, tape.constant_ref(z), nn::Weights::kTrainable);
      ad::Var tgt = tape.constant_ref(target);
      ad::Var loss = step < sq_steps
                         ? ad::scale(ad::sq_dist(out, tgt), 1.0f / static_cast<float>(target.size()))
                         : ad::l1(out, tgt);
      tape.backward(loss);
      opt.step();
      report.losses.push_back(loss.value().item());
    }
  } else {
    nn::Sequential critic = make_critic(out_shape);
    Rng crng(derive_seed(cfg.seed, kStreamCritic));
    critic.init(crng);
    ad::Adam copt(critic.parameters(), {cfg.critic_lr, 0.5, 0.999, 1e-8});
    for (int step = 0; step < cfg.steps; ++step) {
      const std::uint64_t s = derive_seed(cfg.seed, kStreamBatch + static_cast<std::uint64_t>(step));
      const Tensor real = render_targets(sample_latents(cfg.batch, g.latent_dim(), derive_seed(s, 1)),
                                         inv, canvas);
      const Tensor z = sample_latents(cfg.batch, g.latent_dim(), derive_seed(s, 2));
      const Tensor fake = g.forward(z);
      {
        copt.zero_grad();
        ad::Tape tape;
        ad::Var d_real = critic.forward(tape, tape.constant_ref(real), nn::Weights::kTrainable);
        ad::Var d_fake = critic.forward(tape, tape.constant_ref(fake), nn::Weights::kTrainable);
        ad::Var loss = ad::add(ad::mean(ad::softplus(ad::scale(d_real, -1.0f))),
                               ad::mean(ad::softplus(d_fake)));
        tape.backward(loss);
        copt.step();
      }
      opt.zero_grad();
      ad::Tape tape;
      ad::Var out = g.layers().forward(tape, tape.constant_ref(z), nn::Weights::kTrainable);
      ad::Var d_out = std::as_const(critic).forward(tape, out);
      ad::Var loss = ad::mean(ad::softplus(ad::scale(d_out, -1.0f)));
      tape.backward(loss);
      opt.step();
      report.losses.push_back(loss.value().item());
    }
  }
  report.final_loss = distill_error(g, inv, 64, holdout_seed);
  return report;
}

void save_weights(const Generator& g, const std::filesystem::path& path) {
  io::NetworkBundle b;
  b.kind = "generator";
  b.meta = {{"latent_dim", g.latent_dim()},
            {"split", g.split()},
            {"inventory_hash", hex64(g.inventory_hash())}};
  b.networks.emplace_back("layers", g.layers());
  io::write_bundle(path, b);
}

Generator load_weights(const std::filesystem::path& path) {
  io::NetworkBundle b = io::read_bundle(path);
  if (b.kind != "generator") {
    throw io::FormatError("'" + path.string() + "' holds a " + b.kind + ", not a generator");
  }
  if (b.networks.size() != 1) throw io::FormatError("generator file must hold one network");
  try {
    Generator g(std::move(b.networks[0].second), b.meta.at("split").get<std::size_t>());
    if (g.latent_dim() != b.meta.at("latent_dim").get<int>()) {
      throw io::FormatError("latent dim in header disagrees with the first layer");
    }
    g.set_inventory_hash(std::stoull(b.meta.at("inventory_hash").get<std::string>(), nullptr, 16));
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw io::FormatError("'" + path.string() + "': malformed generator header: " + e.what());
  }
}

}  // namespace ganscope::gen
