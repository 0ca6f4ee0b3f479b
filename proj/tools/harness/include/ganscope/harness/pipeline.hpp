#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/encoders.hpp"
#include "ganscope/generator.hpp"
#include "ganscope/harness/config.hpp"
#include "ganscope/harness/dataset.hpp"
#include "ganscope/inversion.hpp"
#include "ganscope/seg_stats.hpp"

namespace ganscope::harness {

namespace fs = std::filesystem;

// Seed streams fanned out from the master seed.
inline constexpr std::uint64_t kStreamData = 0x64617461;       // truth dataset
inline constexpr std::uint64_t kStreamStats = 0x73746174;      // generated statistics
inline constexpr std::uint64_t kStreamSplit = 0x73706c74;      // sensitivity splits
inline constexpr std::uint64_t kStreamInvertZ = 0x696e767a;    // generated inversion targets

/// Images inverted per work item; fixed so results do not depend on the
/// worker count.
inline constexpr int kInvertChunk = 10;
inline constexpr int kStatsChunk = 100;

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

gen::Generator load_generator(const fs::path& path);
enc::EncoderStack load_encoders(const fs::path& path);
nn::Sequential load_direct_encoder(const fs::path& path);

/// Generator training with weights written to `weights` and the loss log to
/// `weights` + ".json".
gen::TrainReport train_generator(const ExperimentConfig& cfg, const scene::Inventory& inv,
                                 gen::Generator& g, const fs::path& weights);

struct EncoderBundle {
  enc::EncoderStack stack;
  nn::Sequential direct;
  nlohmann::json log;
};

EncoderBundle train_encoders(const ExperimentConfig& cfg, const gen::Generator& g,
                             const fs::path& stack_path, const fs::path& direct_path);

/// Segments every image with the colour segmenter.
std::vector<std::vector<int>> image_counts(const std::vector<Tensor>& images,
                                           const scene::Inventory& inv);
/// Per-image class counts of n samples G(z), z drawn from `seed`.
std::vector<std::vector<int>> generated_counts(const gen::Generator& g, const scene::Inventory& inv,
                                               int n, std::uint64_t seed);
stats::SegStatsRecord record_from_counts(const std::vector<std::vector<int>>& counts,
                                         const std::vector<int>& class_ids);

/// Mean FSD between disjoint splits over `trials` repetitions.
struct SensitivitySummary {
  int n_per_split = 0;
  std::vector<double> trials;
  double mean = 0.0;
};
SensitivitySummary sensitivity(const std::vector<std::vector<int>>& counts,
                               const std::vector<int>& class_ids, int n_per_split, int trials,
                               std::uint64_t seed);
nlohmann::json to_json(const SensitivitySummary& s);

/// inv::invert over chunks of kInvertChunk images on the worker pool.
std::vector<inv::InversionResult> invert_all(inv::Method method, const Tensor& images,
                                             const inv::Models& models, const inv::InversionConfig& cfg);

struct MethodSummary {
  inv::Method method = inv::Method::kF;
  inv::CorrelationSummary correlation;
  double objective = 0.0;   // means over images
  double image_loss = 0.0;
  double reg = 0.0;
};
MethodSummary summarize(inv::Method m, const std::vector<inv::InversionResult>& results,
                        const Tensor& images, const Tensor* true_z, const Tensor* true_r);
nlohmann::json to_json(const MethodSummary& s);

/// Share of ground-truth pixels of the withheld class, and of all retained
/// foreground classes, that the reconstruction's segmentation labels with
/// the same class.
struct Coverage {
  double withheld = 0.0;
  double retained = 0.0;
  long withheld_pixels = 0;
  long retained_pixels = 0;
};
Coverage coverage(const std::vector<scene::SegMap>& truth, const std::vector<scene::SegMap>& recon,
                  int withheld);
nlohmann::json to_json(const Coverage& c);

/// Writes a grid of input / reconstruction / segmentation blocks for the
/// first `count` results.
void write_pairs(const fs::path& path, const Tensor& images,
                 const std::vector<inv::InversionResult>& results, const scene::Inventory& inv,
                 int count = 8);

/// Inversion bundle: result.json and pairs.png inside `dir`.
void write_inversion(const fs::path& dir, const MethodSummary& summary,
                     const std::vector<inv::InversionResult>& results, const Tensor& images,
                     const scene::Inventory& inv, const nlohmann::json& extra = nlohmann::json::object());

struct PipelineSummary {
  gen::TrainReport generator;
  stats::SegStatsRecord truth;
  stats::SegStatsRecord generated;
  stats::HistogramReport histogram;
  double fsd = 0.0;
  SensitivitySummary noise_floor;
  std::vector<MethodSummary> methods;
  Coverage coverage;
  int real_images = 0;
  std::vector<std::pair<std::string, double>> stage_seconds;
};

/// Runs every stage into `run_dir` and writes the report.
PipelineSummary run_pipeline(const ExperimentConfig& cfg, const fs::path& run_dir);

/// Regenerates run_dir/report from the artifacts of a pipeline run.
void write_report(const fs::path& run_dir);

}  // namespace ganscope::harness
