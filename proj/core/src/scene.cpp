#include "ganscope/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ganscope/rng.hpp"

namespace ganscope::scene {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

float background_level(int y, int height) {
  return 0.42f + 0.16f * (static_cast<float>(y) + 0.5f) / static_cast<float>(height);
}

float jittered(float proto, float jitter) {
  return proto <= 0.5f ? proto + jitter : proto - jitter;
}

}  // namespace

std::string to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::kRectangle: return "rectangle";
    case ShapeFamily::kDisk: return "disk";
    case ShapeFamily::kTriangle: return "triangle";
    case ShapeFamily::kHorizontalBars: return "horizontal-bars";
  }
  return "?";
}

ShapeFamily parse_shape_family(const std::string& s) {
  if (s == "rectangle") return ShapeFamily::kRectangle;
  if (s == "disk") return ShapeFamily::kDisk;
  if (s == "triangle") return ShapeFamily::kTriangle;
  if (s == "horizontal-bars") return ShapeFamily::kHorizontalBars;
  throw std::invalid_argument("unknown shape family '" + s + "'");
}

Inventory::Inventory(std::vector<ClassDef> classes) : classes_(std::move(classes)) {}

Inventory Inventory::standard() {
  using SF = ShapeFamily;
  return Inventory({
      {1, "rug", {1, 0, 1}, SF::kRectangle, 0.45, 0.70, 0.45, 0.55},
      {2, "bed", {0, 0, 1}, SF::kRectangle, 0.35, 0.55, 0.70, 0.60},
      {3, "window", {0, 1, 1}, SF::kRectangle, 0.22, 0.36, 1.00, 0.40},
      {4, "fence", {1, 1, 0}, SF::kHorizontalBars, 0.35, 0.55, 0.80, 0.45},
      {5, "plant", {0, 1, 0}, SF::kTriangle, 0.25, 0.40, 1.20, 0.45},
      {6, "lamp", {1, 1, 1}, SF::kDisk, 0.20, 0.32, 1.00, 0.50},
      {7, "clock", {0, 0, 0}, SF::kDisk, 0.22, 0.32, 1.00, 0.40},
      {8, "person", {1, 0, 0}, SF::kTriangle, 0.28, 0.42, 1.50, 0.35},
  });
}

bool Inventory::contains(int class_id) const {
  return class_id == 0 ||
         std::any_of(classes_.begin(), classes_.end(), [&](const ClassDef& c) { return c.id == class_id; });
}

const ClassDef& Inventory::at(int class_id) const {
  for (const ClassDef& c : classes_)
    if (c.id == class_id) return c;
  throw std::out_of_range("class id " + std::to_string(class_id) + " not in inventory");
}

std::vector<int> Inventory::class_ids() const {
  std::vector<int> ids{0};
  for (const ClassDef& c : classes_) ids.push_back(c.id);
  return ids;
}

std::vector<std::string> Inventory::class_names() const {
  std::vector<std::string> names(static_cast<std::size_t>(class_count()));
  names[0] = "background";
  for (const ClassDef& c : classes_) names[static_cast<std::size_t>(c.id)] = c.name;
  return names;
}

Inventory Inventory::without(int class_id) const {
  if (class_id == 0 || !contains(class_id)) {
    throw std::invalid_argument("cannot withhold class " + std::to_string(class_id) +
                                ": not a foreground class of the inventory");
  }
  Inventory copy = *this;
  for (ClassDef& c : copy.classes_)
    if (c.id == class_id) c.presence = 0.0;
  return copy;
}

void Inventory::validate() const {
  if (classes_.empty()) throw std::invalid_argument("inventory has no classes");
  if (classes_.size() > 254) throw std::invalid_argument("inventory exceeds 254 classes");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassDef& c = classes_[i];
    const std::string who = "class " + std::to_string(c.id) + " (" + c.name + ")";
    if (c.id != static_cast<int>(i) + 1)
      throw std::invalid_argument(who + ": ids must be 1..K in inventory order");
    if (!(c.presence >= 0.0 && c.presence <= 1.0))
      throw std::invalid_argument(who + ": presence probability outside [0,1]");
    if (!(c.size_min > 0.0 && c.size_min <= c.size_max))
      throw std::invalid_argument(who + ": invalid size range");
    const double extent = c.family == ShapeFamily::kDisk ? c.size_max
                                                         : c.size_max * std::max(1.0, c.aspect);
    if (extent > 1.0) throw std::invalid_argument(who + ": shape does not fit the canvas");
    for (float ch : {c.color.r, c.color.g, c.color.b})
      if (!(ch >= 0.0f && ch <= 1.0f)) throw std::invalid_argument(who + ": colour outside [0,1]");
    // The background gradient spans grey levels [0.42, 0.58].
    const float grey = std::max({std::fabs(c.color.r - 0.5f), std::fabs(c.color.g - 0.5f),
                                 std::fabs(c.color.b - 0.5f)});
    if (grey - 0.08f < kSegmentThreshold)
      throw std::invalid_argument(who + ": prototype too close to the background greys");
    for (std::size_t j = 0; j < i; ++j) {
      const Rgb& o = classes_[j].color;
      const double d = std::max({std::fabs(c.color.r - o.r), std::fabs(c.color.g - o.g),
                                 std::fabs(c.color.b - o.b)});
      if (d < kMinColorSeparation)
        throw std::invalid_argument(who + ": prototype colour within 0.25 of class " +
                                    std::to_string(classes_[j].id));
    }
  }
}

std::uint64_t Inventory::hash() const {
  std::ostringstream os;
  os.precision(17);
  for (const ClassDef& c : classes_) {
    os << c.id << '|' << c.name << '|' << c.color.r << ',' << c.color.g << ',' << c.color.b << '|'
       << to_string(c.family) << '|' << c.size_min << ',' << c.size_max << ',' << c.aspect << '|'
       << c.presence << ';';
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> SegMap::counts(int class_count) const {
  std::vector<int> out(static_cast<std::size_t>(class_count), 0);
  for (std::uint8_t l : labels) {
    if (l >= class_count) throw std::out_of_range("segmentation label outside class inventory");
    ++out[l];
  }
  return out;
}

SceneSpec decode(std::span<const float> z, const Inventory& inv, int canvas) {
  if (static_cast<int>(z.size()) != inv.latent_dim()) {
    throw ShapeError("scene latent has " + std::to_string(z.size()) + " entries, inventory needs " +
                     std::to_string(inv.latent_dim()));
  }
  SceneSpec scene;
  scene.canvas = canvas;
  const double side = canvas;
  for (std::size_t k = 0; k < inv.classes().size(); ++k) {
    const ClassDef& c = inv.classes()[k];
    const float* zc = z.data() + k * kLatentPerClass;
    const double u_presence = normal_cdf(zc[0]);
    if (!(u_presence < c.presence)) continue;
    const double extent = side * (c.size_min + (c.size_max - c.size_min) * normal_cdf(zc[3]));
    Instance inst;
    inst.class_id = c.id;
    inst.width = extent;
    inst.height = c.family == ShapeFamily::kDisk ? extent : extent * c.aspect;
    inst.cx = inst.width / 2 + (side - inst.width) * normal_cdf(zc[1]);
    inst.cy = inst.height / 2 + (side - inst.height) * normal_cdf(zc[2]);
    // Conditional on presence, u_presence / p is uniform on [0,1).
    inst.jitter = static_cast<float>(kMaxJitter * (u_presence / c.presence));
    scene.instances.push_back(inst);
  }
  return scene;
}

std::vector<float> scene_latent(std::uint64_t seed, const Inventory& inv) {
  Rng rng(seed);
  std::vector<float> z(static_cast<std::size_t>(inv.latent_dim()));
  for (float& v : z) v = static_cast<float>(rng.normal());
  return z;
}

SceneSpec sample_scene(std::uint64_t seed, const Inventory& inv, int canvas) {
  if (inv.classes().empty()) throw std::invalid_argument("inventory has no classes");
  return decode(scene_latent(seed, inv), inv, canvas);
}

bool covers(const Instance& inst, ShapeFamily family, double px, double py) {
  const double left = inst.cx - inst.width / 2, right = inst.cx + inst.width / 2;
  const double top = inst.cy - inst.height / 2, bottom = inst.cy + inst.height / 2;
  switch (family) {
    case ShapeFamily::kRectangle:
      return px >= left && px < right && py >= top && py < bottom;
    case ShapeFamily::kDisk: {
      const double r = inst.width / 2, dx = px - inst.cx, dy = py - inst.cy;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeFamily::kTriangle: {
      if (py < top || py >= bottom) return false;
      const double half = 0.5 * inst.width * (py - top) / inst.height;
      return std::fabs(px - inst.cx) <= half;
    }
    case ShapeFamily::kHorizontalBars: {
      if (!(px >= left && px < right && py >= top && py < bottom)) return false;
      return std::fmod(py - top, 4.0) < 2.0;
    }
  }
  return false;
}

SegMap segment_exact(const SceneSpec& scene, const Inventory& inv) {
  SegMap seg(scene.canvas, scene.canvas, 0);
  for (const Instance& inst : scene.instances) {
    const ShapeFamily fam = inv.at(inst.class_id).family;
    for (int y = 0; y < scene.canvas; ++y)
      for (int x = 0; x < scene.canvas; ++x)
        if (covers(inst, fam, x + 0.5, y + 0.5)) seg.at(y, x) = static_cast<std::uint8_t>(inst.class_id);
  }
  return seg;
}

Tensor render(const SceneSpec& scene, const Inventory& inv) {
  const int n = scene.canvas;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  Tensor img(Shape{3, n, n});
  auto px = img.data();
  for (int y = 0; y < n; ++y) {
    const float v = from_unit(background_level(y, n));
    for (int x = 0; x < n; ++x)
      for (int ch = 0; ch < 3; ++ch) px[ch * plane + static_cast<std::size_t>(y) * n + x] = v;
  }
  for (const Instance& inst : scene.instances) {
    const ClassDef& c = inv.at(inst.class_id);
    const std::array<float, 3> col{from_unit(jittered(c.color.r, inst.jitter)),
                                   from_unit(jittered(c.color.g, inst.jitter)),
                                   from_unit(jittered(c.color.b, inst.jitter))};
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (covers(inst, c.family, x + 0.5, y + 0.5))
          for (int ch = 0; ch < 3; ++ch) px[ch * plane + static_cast<std::size_t>(y) * n + x] = col[ch];
  }
  return img;
}

SegMap segment_image(const Tensor& image, const Inventory& inv) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("segment_image expects a [3,H,W] image, got " + ganscope::to_string(image.shape()));
  }
  const int h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  auto px = image.data();
  SegMap raw(h, w, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    const float r = to_unit(px[i]), g = to_unit(px[plane + i]), b = to_unit(px[2 * plane + i]);
    float best = kSegmentThreshold;
    int label = 0;
    for (const ClassDef& c : inv.classes()) {
      const float d = std::max({std::fabs(r - c.color.r), std::fabs(g - c.color.g),
                                std::fabs(b - c.color.b)});
      if (d < best) {
        best = d;
        label = c.id;
      }
    }
    raw.labels[i] = static_cast<std::uint8_t>(label);
  }
  SegMap out = raw;
  std::vector<int> tally(static_cast<std::size_t>(inv.class_count()));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(tally.begin(), tally.end(), 0);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) ++tally[raw.at(yy, xx)];
        }
      if (tally[raw.at(y, x)] > 1) continue;
      out.at(y, x) = static_cast<std::uint8_t>(
          std::max_element(tally.begin(), tally.end()) - tally.begin());
    }
  }
  return out;
}

std::vector<Sample> make_dataset(int n, std::uint64_t seed, const Inventory& inv,
                                 std::optional<int> withhold, int canvas) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  inv.validate();
  const Inventory effective = withhold ? inv.without(*withhold) : inv;
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Sample s;
    s.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    s.scene = sample_scene(s.seed, effective, canvas);
    s.image = render(s.scene, effective);
    s.seg = segment_exact(s.scene, effective);
    out.push_back(std::move(s));
  }
  return out;
}

double expected_instance_area(const ClassDef& c, int canvas) {
  const double a = c.size_min * canvas, b = c.size_max * canvas;
  const double e_s2 = (a * a + a * b + b * b) / 3.0;
  switch (c.family) {
    case ShapeFamily::kRectangle: return c.aspect * e_s2;
    case ShapeFamily::kDisk: return std::numbers::pi / 4.0 * e_s2;
    case ShapeFamily::kTriangle: return c.aspect * e_s2 / 2.0;
    case ShapeFamily::kHorizontalBars: {
      // Bars of height 2 repeat every 4 pixels from the top edge.
      const int steps = 4096;
      double acc = 0.0;
      for (int i = 0; i < steps; ++i) {
        const double s = a + (b - a) * (i + 0.5) / steps, h = s * c.aspect;
        acc += s * (2.0 * std::floor(h / 4.0) + std::min(2.0, std::fmod(h, 4.0)));
      }
      return acc / steps;
    }
  }
  return 0.0;
}

}  // namespace ganscope::scene
