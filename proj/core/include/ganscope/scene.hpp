#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ganscope/tensor.hpp"

namespace ganscope::scene {

enum class ShapeFamily { kRectangle, kDisk, kTriangle, kHorizontalBars };

std::string to_string(ShapeFamily f);
ShapeFamily parse_shape_family(const std::string& s);

struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// One foreground object class. Id 0 is reserved for background.
struct ClassDef {
  int id = 0;
  std::string name;
  Rgb color;  // prototype, channels in [0,1]
  ShapeFamily family = ShapeFamily::kRectangle;
  double size_min = 0.2;  // extent as a fraction of the canvas
  double size_max = 0.4;
  double aspect = 1.0;  // height / width; disks ignore it
  double presence = 0.5;
  friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

inline constexpr float kMaxJitter = 0.07f;
inline constexpr double kMinColorSeparation = 0.25;
/// Pixels farther than this (L-infinity, [0,1] units) from every prototype
/// are labelled background.
inline constexpr float kSegmentThreshold = 0.3f;
/// Each class owns this many consecutive latent coordinates:
/// presence, centre x, centre y, size.
inline constexpr int kLatentPerClass = 4;

/// Ordered class list; order is also draw order (later classes occlude
/// earlier ones).
class Inventory {
 public:
  Inventory() = default;
  explicit Inventory(std::vector<ClassDef> classes);

  /// Eight foreground classes over a 32x32 canvas.
  static Inventory standard();

  const std::vector<ClassDef>& classes() const noexcept { return classes_; }
  /// Foreground classes plus background.
  int class_count() const noexcept { return static_cast<int>(classes_.size()) + 1; }
  int latent_dim() const noexcept { return static_cast<int>(classes_.size()) * kLatentPerClass; }
  bool contains(int class_id) const;
  const ClassDef& at(int class_id) const;
  /// Ids 0..K (background first).
  std::vector<int> class_ids() const;
  /// Class names indexed by id; "background" for 0.
  std::vector<std::string> class_names() const;

  /// Copy where `class_id` has presence probability 0.
  Inventory without(int class_id) const;

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  /// FNV-1a over a canonical text form; stable across runs and platforms.
  std::uint64_t hash() const;

  friend bool operator==(const Inventory&, const Inventory&) = default;

 private:
  std::vector<ClassDef> classes_;
};

struct Instance {
  int class_id = 0;
  double cx = 0.0;  // pixels
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;
  float jitter = 0.0f;  // in [0, kMaxJitter], applied towards mid-grey
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct SceneSpec {
  int canvas = 32;
  std::vector<Instance> instances;  // draw order
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// H x W class-id grid.
struct SegMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  SegMap() = default;
  SegMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  /// Pixel count per class id, indexed 0..class_count-1.
  std::vector<int> counts(int class_count) const;
  friend bool operator==(const SegMap&, const SegMap&) = default;
};

/// Maps a standard-normal latent to a scene. Coordinates are pushed through
/// the normal CDF; class k (0-based) reads z[4k..4k+3]. This map is the true
/// scene distribution: sample_scene is decode of a seeded normal draw.
SceneSpec decode(std::span<const float> z, const Inventory& inv, int canvas = 32);

/// Standard-normal latent drawn from `seed`.
std::vector<float> scene_latent(std::uint64_t seed, const Inventory& inv);
SceneSpec sample_scene(std::uint64_t seed, const Inventory& inv, int canvas = 32);

/// Rasterizes to a [3,H,W] image in [-1,1]; the background is a vertical
/// grey gradient.
Tensor render(const SceneSpec& scene, const Inventory& inv);

/// Analytic per-pixel labels from scene geometry and draw order.
SegMap segment_exact(const SceneSpec& scene, const Inventory& inv);

/// Nearest-prototype colour labelling with a background threshold, followed
/// by one 3x3 pass that relabels isolated pixels to their window majority.
SegMap segment_image(const Tensor& image, const Inventory& inv);

/// True when pixel centre (px, py) lies inside the instance's shape.
bool covers(const Instance& inst, ShapeFamily family, double px, double py);

struct Sample {
  Tensor image;
  SegMap seg;
  SceneSpec scene;
  std::uint64_t seed = 0;
};

/// Item k uses seed derive_seed(seed, k). When `withhold` is set the class
/// never appears.
std::vector<Sample> make_dataset(int n, std::uint64_t seed, const Inventory& inv,
                                 std::optional<int> withhold = std::nullopt, int canvas = 32);

/// Expected area (pixels) of one unoccluded instance over its size range.
double expected_instance_area(const ClassDef& c, int canvas);

/// Converts between [-1,1] image values and [0,1] colours.
inline float to_unit(float v) { return 0.5f * (v + 1.0f); }
inline float from_unit(float c) { return 2.0f * c - 1.0f; }

}  // namespace ganscope::scene
