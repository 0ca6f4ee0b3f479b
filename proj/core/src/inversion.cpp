#include "ganscope/inversion.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "ganscope/encoders.hpp"
#include "ganscope/rng.hpp"

namespace ganscope::inv {
namespace {

using nn::Activation;
using nn::LayerSpec;

using Objective = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

std::span<const float> row(const Tensor& t, int b) {
  const std::size_t m = t.size() / static_cast<std::size_t>(t.dim(0));
  return t.data().subspan(b * m, m);
}

Tensor take_row(const Tensor& t, int b) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  auto r = row(t, b);
  return Tensor(std::move(s), std::vector<float>(r.begin(), r.end()));
}

void check_images(const gen::Generator& g, const Tensor& images) {
  const Shape& out = g.output_shape();
  if (images.rank() != out.size() + 1 || !std::equal(out.begin(), out.end(), images.shape().begin() + 1)) {
    throw ShapeError("inversion expects images [N," + to_string(out).substr(1) + ", got " +
                     to_string(images.shape()));
  }
  if (images.dim(0) < 1) throw ShapeError("inversion needs at least one image");
}

class ImageLoss {
 public:
  ImageLoss(const Tensor& images, const LossSpec& spec)
      : images_(images), spec_(spec), net_(spec.feature_seed, Shape(images.shape().begin() + 1, images.shape().end())) {
    if (spec.feature_weight != 0.0) target_ = net_.features(images);
  }

  ad::Var operator()(ad::Tape& tape, ad::Var x) const {
    ad::Var pixel = ad::scale(ad::l1_per_sample(x, tape.constant_ref(images_)),
                              static_cast<float>(spec_.pixel_weight));
    if (spec_.feature_weight == 0.0) return pixel;
    return ad::add(pixel, ad::scale(net_.distance(tape, x, target_), static_cast<float>(spec_.feature_weight)));
  }

 private:
  const Tensor& images_;
  LossSpec spec_;
  FeatureNet net_;
  std::vector<Tensor> target_;
};

// Adam over per-sample parameter rows with best-so-far backtracking: a trial
// point that does not improve a sample's objective is rejected, the sample
// returns to its best point, and after `patience` rejections in a row its
// step size halves. Traces record the best objective, so they never rise.
void optimize(std::vector<Tensor>& params, int batch, const Objective& objective,
              const InversionConfig& cfg, int steps, std::vector<std::vector<double>>& traces) {
  const std::size_t np = params.size();
  std::vector<std::size_t> width(np);
  std::vector<Tensor> best = params;
  std::vector<std::vector<float>> best_grad(np), m(np), v(np);
  for (std::size_t p = 0; p < np; ++p) {
    width[p] = params[p].size() / static_cast<std::size_t>(batch);
    best_grad[p].assign(params[p].size(), 0.0f);
    m[p].assign(params[p].size(), 0.0f);
    v[p].assign(params[p].size(), 0.0f);
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best_val(batch, inf), initial(batch, 0.0), lr(batch, cfg.lr);
  std::vector<int> fails(batch, 0), over(batch, 0);
  traces.assign(batch, {});
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::int64_t t = 0;

  for (int k = 0; k <= steps; ++k) {
    for (Tensor& p : params) {
      p.ensure_grad();
      p.zero_grad();
    }
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (Tensor& p : params) vars.push_back(tape.param(p));
    ad::Var obj = objective(tape, vars);
    tape.backward(ad::sum(obj));
    const Tensor& values = obj.value();

    for (int b = 0; b < batch; ++b) {
      const double value = values[b];
      if (!std::isfinite(value)) {
        throw DivergenceError("inversion of image " + std::to_string(b) + " produced a non-finite objective at step " +
                              std::to_string(k));
      }
      if (k == 0) initial[b] = value;
      if (k == 0 || value < best_val[b]) {
        best_val[b] = value;
        fails[b] = 0;
        over[b] = 0;
        for (std::size_t p = 0; p < np; ++p) {
          const std::size_t lo = b * width[p], hi = lo + width[p];
          std::copy(params[p].data().begin() + lo, params[p].data().begin() + hi, best[p].data().begin() + lo);
          std::copy(params[p].grad().begin() + lo, params[p].grad().begin() + hi, best_grad[p].begin() + lo);
        }
      } else {
        if (value > cfg.divergence_factor * initial[b] && ++over[b] >= 4 * cfg.patience) {
          throw DivergenceError("inversion of image " + std::to_string(b) + " diverged: objective " +
                                std::to_string(value) + " stayed above " + std::to_string(cfg.divergence_factor) +
                                "x its initial value " + std::to_string(initial[b]) + " at step " + std::to_string(k));
        }
        for (std::size_t p = 0; p < np; ++p) {
          const std::size_t lo = b * width[p], hi = lo + width[p];
          std::copy(best[p].data().begin() + lo, best[p].data().begin() + hi, params[p].data().begin() + lo);
          std::copy(best_grad[p].begin() + lo, best_grad[p].begin() + hi, params[p].grad().begin() + lo);
        }
        if (++fails[b] >= cfg.patience) {
          lr[b] *= 0.5;
          fails[b] = 0;
        }
      }
      traces[b].push_back(best_val[b]);
    }
    if (k == steps) break;

    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t p = 0; p < np; ++p) {
      auto x = params[p].data();
      auto g = params[p].grad();
      for (int b = 0; b < batch; ++b) {
        const double step = lr[b] / c1;
        for (std::size_t i = b * width[p]; i < (b + 1) * width[p]; ++i) {
          m[p][i] = static_cast<float>(b1 * m[p][i] + (1.0 - b1) * g[i]);
          v[p][i] = static_cast<float>(b2 * v[p][i] + (1.0 - b2) * static_cast<double>(g[i]) * g[i]);
          x[i] -= static_cast<float>(step * m[p][i] / (std::sqrt(v[p][i] / c2) + eps));
        }
      }
    }
  }
  for (std::size_t p = 0; p < np; ++p) {
    params[p] = best[p];
    params[p].drop_grad();
  }
}

std::vector<InversionResult> finish_latent(const gen::Generator& g, const Tensor& z0, const Tensor& z,
                                           const Tensor& images, const InversionConfig& cfg, Method method,
                                           std::vector<std::vector<double>> traces) {
  const int batch = images.dim(0);
  const gen::LayerActivation r = g.forward_layers(z, g.split());
  const Tensor x = g.forward_from(r);
  const std::vector<double> loss = image_loss(images, x, cfg.loss);
  std::vector<InversionResult> out(batch);
  for (int b = 0; b < batch; ++b) {
    InversionResult& res = out[b];
    res.method = method;
    res.z0 = take_row(z0, b);
    res.z = take_row(z, b);
    res.r = {r.index, take_row(r.value, b)};
    res.reconstruction = take_row(x, b);
    res.image_loss = loss[b];
    res.objective = loss[b];
    res.trace = traces.empty() ? std::vector<double>{loss[b]} : std::move(traces[b]);
  }
  return out;
}

const nn::Sequential& need(const nn::Sequential* net, Method m, const char* what) {
  if (!net || net->empty()) {
    throw std::invalid_argument(std::string("method ") + tag(m) + " needs the " + what);
  }
  return *net;
}

}  // namespace

char tag(Method m) { return static_cast<char>('a' + static_cast<int>(m)); }

Method parse_method(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'f') return static_cast<Method>(s[0] - 'a');
  throw std::invalid_argument("unknown inversion method '" + s + "' (expected a..f)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::kA, Method::kB, Method::kC, Method::kD, Method::kE, Method::kF};
  return m;
}

FeatureNet::FeatureNet(std::uint64_t seed, const Shape& image_shape) {
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::conv(image_shape, 8, 3, 2, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv(s.back().out_shape, 16, 3, 2, 1, Activation::kLeakyRelu));
  s.push_back(LayerSpec::conv(s.back().out_shape, 16, 3, 2, 1, Activation::kLeakyRelu));
  net_ = nn::Sequential(std::move(s));
  Rng rng(seed);
  net_.init(rng);
}

std::vector<Tensor> FeatureNet::features(const Tensor& images) const {
  ad::Tape tape;
  ad::Var h = tape.constant_ref(images);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < net_.size(); ++i) {
    h = net_.forward_range(tape, h, i, i + 1);
    out.push_back(h.value());
  }
  return out;
}

ad::Var FeatureNet::distance(ad::Tape& tape, ad::Var images, const std::vector<Tensor>& target) const {
  if (target.size() != net_.size()) throw std::invalid_argument("feature target has the wrong number of layers");
  ad::Var h = images;
  ad::Var total{};
  for (std::size_t i = 0; i < net_.size(); ++i) {
    h = net_.forward_range(tape, h, i, i + 1);
    ad::Var d = ad::sq_dist_per_sample(h, tape.constant_ref(target[i]));
    total = i == 0 ? d : ad::add(total, d);
  }
  return total;
}

void InversionConfig::validate() const {
  if (lambda_reg < 0.0) throw std::invalid_argument("lambda_reg must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (steps < 1) throw std::invalid_argument("inversion step budget must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (!(divergence_factor > 1.0)) throw std::invalid_argument("divergence factor must exceed 1");
  if (loss.pixel_weight < 0.0 || loss.feature_weight < 0.0) throw std::invalid_argument("loss weights must be non-negative");
}

std::vector<double> image_loss(const Tensor& images, const Tensor& reconstructions, const LossSpec& spec) {
  if (images.shape() != reconstructions.shape()) throw ShapeError("image_loss: shape mismatch");
  ImageLoss loss(images, spec);
  ad::Tape tape;
  const Tensor& v = loss(tape, tape.constant_ref(reconstructions)).value();
  return std::vector<double>(v.data().begin(), v.data().end());
}

std::vector<InversionResult> invert_latent(const gen::Generator& g, const Tensor& z0, const Tensor& images,
                                           const InversionConfig& cfg, Method method) {
  cfg.validate();
  check_images(g, images);
  const int batch = images.dim(0);
  if (z0.shape() != Shape{batch, g.latent_dim()}) throw ShapeError("starting latents must be [N,latent]");
  const ImageLoss loss(images, cfg.loss);
  std::vector<Tensor> params{z0};
  std::vector<std::vector<double>> traces;
  optimize(
      params, batch,
      [&](ad::Tape& tape, const std::vector<ad::Var>& v) { return loss(tape, g.forward(tape, v[0])); }, cfg,
      cfg.steps, traces);
  return finish_latent(g, z0, params[0], images, cfg, method, std::move(traces));
}

std::vector<InversionResult> invert_layerwise(const gen::Generator& g, const Tensor& z0, const Tensor& images,
                                              const InversionConfig& cfg) {
  cfg.validate();
  check_images(g, images);
  const int batch = images.dim(0);
  if (z0.shape() != Shape{batch, g.latent_dim()}) throw ShapeError("starting latents must be [N,latent]");
  const std::size_t n = g.split();
  std::vector<Tensor> deltas;
  for (std::size_t i = 1; i <= n; ++i) deltas.emplace_back(nn::batched(batch, g.shape_of(i)));
  const ImageLoss loss(images, cfg.loss);
  const auto lambda = static_cast<float>(cfg.lambda_reg);

  auto representation = [&](ad::Tape& tape, const std::vector<ad::Var>& d) {
    ad::Var h = tape.constant_ref(z0);
    for (std::size_t i = 0; i < n; ++i) h = ad::add(g.forward_range(tape, h, i, i + 1), d[i]);
    return h;
  };
  auto objective = [&](ad::Tape& tape, const std::vector<ad::Var>& d) {
    ad::Var x = g.forward_range(tape, representation(tape, d), n, g.depth());
    ad::Var obj = loss(tape, x);
    if (lambda > 0.0f) {
      ad::Var reg = ad::l2_per_sample(d[0]);
      for (std::size_t i = 1; i < n; ++i) reg = ad::add(reg, ad::l2_per_sample(d[i]));
      obj = ad::add(obj, ad::scale(reg, lambda));
    }
    return obj;
  };
  std::vector<std::vector<double>> traces;
  optimize(deltas, batch, objective, cfg, cfg.zero_delta ? 0 : cfg.steps, traces);

  ad::Tape tape;
  std::vector<ad::Var> dv;
  for (const Tensor& d : deltas) dv.push_back(tape.constant_ref(d));
  const Tensor r = representation(tape, dv).value();
  const Tensor x = g.run(r, n, g.depth());
  const std::vector<double> loss_now = image_loss(images, x, cfg.loss);

  std::vector<InversionResult> out(batch);
  for (int b = 0; b < batch; ++b) {
    InversionResult& res = out[b];
    res.method = Method::kF;
    res.z0 = take_row(z0, b);
    res.z = res.z0;
    double reg = 0.0;
    for (const Tensor& d : deltas) {
      res.deltas.push_back(take_row(d, b));
      for (float v : row(d, b)) reg += static_cast<double>(v) * v;
    }
    res.reg = reg;
    res.r = {n, take_row(r, b)};
    res.reconstruction = take_row(x, b);
    res.image_loss = loss_now[b];
    res.objective = loss_now[b] + cfg.lambda_reg * reg;
    res.trace = std::move(traces[b]);
  }
  return out;
}

std::vector<InversionResult> invert(Method method, const Tensor& images, const Models& models,
                                    const InversionConfig& cfg, std::size_t first_index) {
  if (!models.generator) throw std::invalid_argument("inversion needs a generator");
  const gen::Generator& g = *models.generator;
  cfg.validate();
  check_images(g, images);
  const int batch = images.dim(0);
  switch (method) {
    case Method::kA: {
      Tensor z0(Shape{batch, g.latent_dim()});
      for (int b = 0; b < batch; ++b) {
        Rng rng(derive_seed(cfg.seed, first_index + static_cast<std::uint64_t>(b)));
        for (int j = 0; j < g.latent_dim(); ++j) z0[b * g.latent_dim() + j] = static_cast<float>(rng.normal());
      }
      return invert_latent(g, z0, images, cfg, method);
    }
    case Method::kB: {
      const Tensor z = enc::run_encoder(need(models.direct, method, "direct encoder"), images);
      return finish_latent(g, z, z, images, cfg, method, {});
    }
    case Method::kC:
      return invert_latent(g, enc::run_encoder(need(models.direct, method, "direct encoder"), images), images,
                           cfg, method);
    case Method::kD: {
      const Tensor z = enc::run_encoder(need(models.encoder, method, "layer-wise encoder"), images);
      return finish_latent(g, z, z, images, cfg, method, {});
    }
    case Method::kE:
      return invert_latent(g, enc::run_encoder(need(models.encoder, method, "layer-wise encoder"), images),
                           images, cfg, method);
    case Method::kF:
      return invert_layerwise(g, enc::run_encoder(need(models.encoder, method, "layer-wise encoder"), images),
                              images, cfg);
  }
  throw std::logic_error("unhandled inversion method");
}

InversionResult invert_one(Method method, const Tensor& image, const Models& models, const InversionConfig& cfg) {
  Tensor batch = image;
  batch.drop_grad();
  batch.reshape(nn::batched(1, image.shape()));
  return std::move(invert(method, batch, models, cfg).front());
}

CorrelationSummary correlation_summary(const std::vector<InversionResult>& results, const Tensor& images,
                                       const Tensor* true_z, const Tensor* true_r) {
  if (results.empty()) throw std::invalid_argument("correlation summary of no results");
  if (images.rank() < 1 || images.dim(0) != static_cast<int>(results.size())) {
    throw ShapeError("one image per result expected");
  }
  corr::Pooled px, pz, pr;
  for (std::size_t b = 0; b < results.size(); ++b) {
    px.add(row(images, static_cast<int>(b)), results[b].reconstruction.data());
    if (true_z) pz.add(row(*true_z, static_cast<int>(b)), results[b].z.data());
    if (true_r) pr.add(row(*true_r, static_cast<int>(b)), results[b].r.value.data());
  }
  CorrelationSummary s;
  s.pixels = px.result();
  if (true_z) s.z = pz.result();
  if (true_r) s.r = pr.result();
  return s;
}

nlohmann::json to_json(const InversionResult& r) {
  return {{"method", std::string(1, tag(r.method))},
          {"objective", r.objective},
          {"image_loss", r.image_loss},
          {"delta_sq_sum", r.reg},
          {"steps", r.trace.empty() ? 0 : r.trace.size() - 1},
          {"trace", r.trace}};
}

nlohmann::json to_json(const CorrelationSummary& s) {
  auto one = [](const std::optional<corr::Correlation>& c) -> nlohmann::json {
    if (!c) return nullptr;
    return {{"value", c->value}, {"degenerate", c->degenerate}};
  };
  return {{"z", one(s.z)}, {"r", one(s.r)}, {"pixels", one(s.pixels)}};
}

}  // namespace ganscope::inv
