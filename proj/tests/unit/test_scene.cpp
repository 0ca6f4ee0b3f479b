#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ganscope/rng.hpp"
#include "ganscope/scene.hpp"

namespace {

using namespace ganscope;
using namespace ganscope::scene;

Inventory single(ClassDef c) {
  c.id = 1;
  return Inventory({c});
}

TEST(Inventory, StandardIsValid) {
  const Inventory inv = Inventory::standard();
  EXPECT_NO_THROW(inv.validate());
  EXPECT_EQ(inv.class_count(), 9);
  EXPECT_EQ(inv.latent_dim(), 32);
  for (std::size_t i = 0; i < inv.classes().size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const Rgb& a = inv.classes()[i].color;
      const Rgb& b = inv.classes()[j].color;
      const double d = std::max({std::fabs(a.r - b.r), std::fabs(a.g - b.g), std::fabs(a.b - b.b)});
      EXPECT_GE(d, kMinColorSeparation);
    }
}

TEST(Inventory, RejectsBadDefinitions) {
  ClassDef c = Inventory::standard().classes()[0];
  c.presence = 1.5;
  EXPECT_THROW(single(c).validate(), std::invalid_argument);
  c = Inventory::standard().classes()[0];
  c.color = {0.5f, 0.5f, 0.5f};
  EXPECT_THROW(single(c).validate(), std::invalid_argument);
  std::vector<ClassDef> two = {Inventory::standard().classes()[0], Inventory::standard().classes()[0]};
  two[1].id = 2;
  EXPECT_THROW(Inventory(two).validate(), std::invalid_argument);
}

TEST(Inventory, WithoutZeroesPresence) {
  const Inventory inv = Inventory::standard().without(4);
  EXPECT_EQ(inv.at(4).presence, 0.0);
  EXPECT_EQ(inv.at(3).presence, Inventory::standard().at(3).presence);
  EXPECT_NE(inv.hash(), Inventory::standard().hash());
  EXPECT_THROW(Inventory::standard().without(0), std::invalid_argument);
  EXPECT_THROW(Inventory::standard().without(42), std::invalid_argument);
}

TEST(Scene, PresenceRateMatchesProbability) {
  ClassDef c = Inventory::standard().classes()[2];
  c.presence = 0.3;
  const Inventory inv = single(c);
  int hits = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) hits += static_cast<int>(sample_scene(derive_seed(11, k), inv).instances.size());
  EXPECT_NEAR(hits / static_cast<double>(n), 0.3, 0.02);
}

TEST(Scene, InstancesInsideCanvasAndUniquePerClass) {
  const Inventory inv = Inventory::standard();
  for (int k = 0; k < 2000; ++k) {
    const SceneSpec s = sample_scene(derive_seed(5, k), inv);
    std::vector<int> seen(9, 0);
    for (const Instance& in : s.instances) {
      EXPECT_EQ(++seen[in.class_id], 1);
      EXPECT_GE(in.cx - in.width / 2, -1e-9);
      EXPECT_LE(in.cx + in.width / 2, 32 + 1e-9);
      EXPECT_GE(in.cy - in.height / 2, -1e-9);
      EXPECT_LE(in.cy + in.height / 2, 32 + 1e-9);
      EXPECT_GE(in.jitter, 0.0f);
      EXPECT_LE(in.jitter, kMaxJitter);
    }
  }
}

TEST(Scene, DecodeIsDeterministic) {
  const Inventory inv = Inventory::standard();
  EXPECT_EQ(sample_scene(77, inv), sample_scene(77, inv));
  EXPECT_THROW(decode(std::vector<float>(3, 0.0f), inv), ShapeError);
}

TEST(Render, FullCanvasRectangleStaysInJitterBand) {
  ClassDef c = Inventory::standard().classes()[2];
  c.size_min = c.size_max = 1.0;
  c.aspect = 1.0;
  const Inventory inv = single(c);
  for (float jitter : {0.0f, kMaxJitter}) {
    SceneSpec s;
    s.instances.push_back({1, 16.0, 16.0, 32.0, 32.0, jitter});
    const Tensor img = render(s, inv);
    const float proto[3] = {c.color.r, c.color.g, c.color.b};
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < 32 * 32; ++i) EXPECT_NEAR(to_unit(img[ch * 1024 + i]), proto[ch], kMaxJitter + 1e-5);
    EXPECT_EQ(segment_image(img, inv).counts(2)[1], 32 * 32);
  }
}

TEST(Render, ValuesInRange) {
  const Inventory inv = Inventory::standard();
  for (int k = 0; k < 50; ++k) {
    const Tensor img = render(sample_scene(derive_seed(3, k), inv), inv);
    ASSERT_EQ(img.shape(), (Shape{3, 32, 32}));
    for (float v : img.data()) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Segment, DiskAreaWithinPerimeter) {
  ClassDef c = Inventory::standard().classes()[5];
  const Inventory inv = single(c);
  for (double r : {3.0, 5.5, 8.0, 11.0}) {
    SceneSpec s;
    s.instances.push_back({1, 16.0, 16.0, 2 * r, 2 * r, 0.0f});
    const double area = std::numbers::pi * r * r;
    const double perimeter = 2 * std::numbers::pi * r;
    EXPECT_NEAR(segment_exact(s, inv).counts(2)[1], area, perimeter);
    EXPECT_NEAR(segment_image(render(s, inv), inv).counts(2)[1], area, perimeter);
  }
}

TEST(Segment, ColourSegmenterAgreesWithGeometry) {
  const Inventory inv = Inventory::standard();
  long agree = 0, total = 0;
  for (const Sample& s : make_dataset(1000, 21, inv)) {
    const SegMap est = segment_image(s.image, inv);
    for (std::size_t i = 0; i < est.labels.size(); ++i) agree += est.labels[i] == s.seg.labels[i];
    total += static_cast<long>(est.labels.size());
  }
  EXPECT_GE(static_cast<double>(agree) / total, 0.995);
}

TEST(Segment, LabelsComeFromInventory) {
  const Inventory inv = Inventory::standard();
  for (const Sample& s : make_dataset(100, 8, inv))
    for (std::uint8_t l : segment_image(s.image, inv).labels) EXPECT_LT(l, inv.class_count());
}

// Area of one unoccluded instance, averaged over a uniform extent in [a, b].
double mean_area(const ClassDef& c, int canvas) {
  const double a = c.size_min * canvas, b = c.size_max * canvas;
  const int steps = 4000;
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double s = a + (b - a) * (i + 0.5) / steps;
    switch (c.family) {
      case ShapeFamily::kRectangle: acc += s * s * c.aspect; break;
      case ShapeFamily::kDisk: acc += std::numbers::pi * s * s / 4; break;
      case ShapeFamily::kTriangle: acc += 0.5 * s * s * c.aspect; break;
      case ShapeFamily::kHorizontalBars: {
        const double h = s * c.aspect;
        double covered = 0.0;
        for (double y = 0.0; y < h; y += 4.0) covered += std::min(2.0, h - y);
        acc += s * covered;
        break;
      }
    }
  }
  return acc / steps;
}

class ExpectedArea : public ::testing::TestWithParam<int> {};

TEST_P(ExpectedArea, DatasetMeanMatchesClosedForm) {
  const ClassDef c = Inventory::standard().at(GetParam());
  const Inventory inv = single(c);
  const double expected = c.presence * mean_area(c, 32);
  EXPECT_NEAR(expected_instance_area(c, 32), mean_area(c, 32), 1e-3 * mean_area(c, 32));
  double total = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) total += segment_exact(sample_scene(derive_seed(99, k), inv), inv).counts(2)[1];
  EXPECT_NEAR(total / n, expected, 0.03 * expected);
}

INSTANTIATE_TEST_SUITE_P(StandardClasses, ExpectedArea, ::testing::Range(1, 9));

TEST(Dataset, WithheldClassNeverAppears) {
  const Inventory inv = Inventory::standard();
  for (const Sample& s : make_dataset(500, 4, inv, 4)) {
    for (const Instance& in : s.scene.instances) EXPECT_NE(in.class_id, 4);
    EXPECT_EQ(s.seg.counts(9)[4], 0);
  }
}

TEST(Dataset, SeedsAreDerivedPerItem) {
  const Inventory inv = Inventory::standard();
  const auto a = make_dataset(5, 9, inv);
  const auto b = make_dataset(5, 9, inv);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(a[k].seed, derive_seed(9, k));
    EXPECT_EQ(a[k].scene, b[k].scene);
    EXPECT_EQ(a[k].seg, b[k].seg);
  }
}

}  // namespace
