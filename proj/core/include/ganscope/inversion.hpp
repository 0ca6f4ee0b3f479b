#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/correlation.hpp"
#include "ganscope/generator.hpp"

namespace ganscope::inv {

/// a: optimize z from a random start; b: direct encoder; c: optimize z from
/// the direct encoder; d: layer-wise encoder; e: optimize z from the
/// layer-wise encoder; f: optimize per-layer perturbations from the
/// layer-wise encoder.
enum class Method { kA, kB, kC, kD, kE, kF };

char tag(Method m);
Method parse_method(const std::string& s);
const std::vector<Method>& all_methods();

struct LossSpec {
  double pixel_weight = 10.0;    // mean l1 over pixels
  double feature_weight = 10.0;  // summed squared feature differences
  std::uint64_t feature_seed = 7;
};

/// Frozen, seed-initialized three-layer conv net used as a perceptual proxy.
class FeatureNet {
 public:
  explicit FeatureNet(std::uint64_t seed, const Shape& image_shape = {3, 32, 32});

  /// Activations of every layer for a batch [N,3,H,W].
  std::vector<Tensor> features(const Tensor& images) const;
  /// Per-sample sum over layers of squared feature differences, shape [N].
  ad::Var distance(ad::Tape& tape, ad::Var images, const std::vector<Tensor>& target) const;

  const nn::Sequential& layers() const noexcept { return net_; }

 private:
  nn::Sequential net_;
};

struct InversionConfig {
  double lambda_reg = 1.0;
  double lr = 0.05;
  int steps = 500;
  int patience = 3;  // consecutive rejected steps before the step size halves
  double divergence_factor = 10.0;
  LossSpec loss;
  std::uint64_t seed = 3;  // random starting points for method a
  bool zero_delta = false;  // method f only: keep every perturbation at 0

  void validate() const;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InversionResult {
  Method method = Method::kF;
  Tensor z0;                  // starting latent
  Tensor z;                   // final latent (z0 for method f)
  std::vector<Tensor> deltas;  // delta_1..delta_n, method f only
  gen::LayerActivation r;     // r at the split layer
  Tensor reconstruction;      // x' = G_f(r)
  std::vector<double> trace;  // best objective after each evaluation
  double objective = 0.0;
  double image_loss = 0.0;
  double reg = 0.0;  // sum of squared perturbations
};

/// Networks the methods draw on. `encoder` (E) is needed by d, e, f and
/// `direct` (E_direct) by b, c.
struct Models {
  const gen::Generator* generator = nullptr;
  const nn::Sequential* encoder = nullptr;
  const nn::Sequential* direct = nullptr;
};

/// Inverts every image of a batch [N,3,H,W]. Each image is optimized
/// independently with its own step size and backtracking state. Method a
/// seeds image b's random start from first_index + b, so a set split into
/// chunks gets the same starts as the whole set.
std::vector<InversionResult> invert(Method method, const Tensor& images, const Models& models,
                                    const InversionConfig& cfg, std::size_t first_index = 0);
InversionResult invert_one(Method method, const Tensor& image, const Models& models,
                           const InversionConfig& cfg);

/// Method f from explicit starting latents z0 [N,latent].
std::vector<InversionResult> invert_layerwise(const gen::Generator& g, const Tensor& z0,
                                              const Tensor& images, const InversionConfig& cfg);
/// Optimizes z from explicit starting latents; `method` only tags the results.
std::vector<InversionResult> invert_latent(const gen::Generator& g, const Tensor& z0,
                                           const Tensor& images, const InversionConfig& cfg,
                                           Method method);

/// The inversion objective's image term for one batch, per sample.
std::vector<double> image_loss(const Tensor& images, const Tensor& reconstructions,
                               const LossSpec& spec);

struct CorrelationSummary {
  std::optional<corr::Correlation> z;
  std::optional<corr::Correlation> r;
  corr::Correlation pixels;
};

/// Pooled Pearson correlations over all results. Ground-truth latents and
/// split activations are optional ([N,latent] and [N,...]).
CorrelationSummary correlation_summary(const std::vector<InversionResult>& results,
                                       const Tensor& images, const Tensor* true_z,
                                       const Tensor* true_r);

nlohmann::json to_json(const InversionResult& r);
nlohmann::json to_json(const CorrelationSummary& s);

}  // namespace ganscope::inv
