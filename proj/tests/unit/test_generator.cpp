#include <algorithm>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "ganscope/generator.hpp"
#include "ganscope/weights_io.hpp"

namespace {

using namespace ganscope;

gen::Generator seeded(std::uint64_t seed = 4) {
  gen::Generator g = gen::Generator::standard();
  g.init(seed);
  return g;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ganscope_test_" + name);
}

TEST(Generator, ShapesTable) {
  const gen::Generator g = seeded();
  EXPECT_EQ(g.depth(), 6u);
  EXPECT_EQ(g.split(), 4u);
  const std::vector<Shape> want = {{32}, {64, 4, 4}, {32, 8, 8}, {32, 8, 8}, {16, 8, 8}, {16, 16, 16}, {3, 32, 32}};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(g.shape_of(i), want[i]) << i;
  const Tensor z = gen::sample_latents(3, 32, 1);
  for (std::size_t i = 1; i <= g.depth(); ++i) {
    const gen::LayerActivation r = g.forward_layers(z, i);
    EXPECT_EQ(r.index, i);
    Shape batched = {3};
    batched.insert(batched.end(), want[i].begin(), want[i].end());
    EXPECT_EQ(r.value.shape(), batched);
  }
}

TEST(Generator, CompositionIsBitExact) {
  const gen::Generator g = seeded();
  const Tensor z = gen::sample_latents(100, 32, 17);
  const Tensor direct = g.forward(z);
  for (std::size_t n = 1; n <= g.depth(); ++n) {
    const Tensor split = g.forward_from(g.forward_layers(z, n));
    ASSERT_EQ(split.shape(), direct.shape());
    EXPECT_TRUE(std::equal(split.data().begin(), split.data().end(), direct.data().begin())) << n;
  }
}

TEST(Generator, OutputRangeAndShape) {
  const gen::Generator g = seeded();
  const Tensor x = g.forward(gen::sample_latents(20, 32, 2));
  EXPECT_EQ(x.shape(), (Shape{20, 3, 32, 32}));
  for (float v : x.data()) {
    EXPECT_GT(v, -1.0f);
    EXPECT_LT(v, 1.0f);
  }
  const Tensor one = g.forward(Tensor(Shape{32}));
  EXPECT_EQ(one.shape(), (Shape{3, 32, 32}));
}

TEST(Generator, OffManifoldActivationStillInRange) {
  const gen::Generator g = seeded();
  Tensor r(Shape{2, 16, 8, 8});
  Rng rng(3);
  for (float& v : r.data()) v = static_cast<float>(50.0 * rng.normal());
  const Tensor x = g.forward_from({4, r});
  for (float v : x.data()) EXPECT_TRUE(v >= -1.0f && v <= 1.0f);
  const Tensor zero_a = g.forward_from({4, Tensor(Shape{1, 16, 8, 8})});
  const Tensor zero_b = g.forward_from({4, Tensor(Shape{1, 16, 8, 8})});
  EXPECT_TRUE(std::equal(zero_a.data().begin(), zero_a.data().end(), zero_b.data().begin()));
}

TEST(Generator, ZeroWeightsGiveZeroImage) {
  gen::Generator g = seeded();
  for (Tensor* p : g.layers().parameters()) std::fill(p->data().begin(), p->data().end(), 0.0f);
  const Tensor x = g.forward(gen::sample_latents(2, 32, 5));
  for (float v : x.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Generator, RejectsBadInputs) {
  const gen::Generator g = seeded();
  EXPECT_ANY_THROW(g.forward(Tensor(Shape{31})));
  EXPECT_ANY_THROW(g.forward_layers(Tensor(Shape{32}), 7));
  EXPECT_ANY_THROW(g.forward_from({4, Tensor(Shape{1, 32, 8, 8})}));
}

TEST(Generator, SmallLatentChangeGivesSmallActivationChange) {
  const gen::Generator g = seeded();
  Tensor z = gen::sample_latents(8, 32, 6);
  Tensor z2 = z;
  for (float& v : z2.data()) v = std::nextafter(v, 10.0f);
  for (std::size_t i = 1; i <= g.depth(); ++i) {
    const Tensor a = g.forward_layers(z, i).value;
    const Tensor b = g.forward_layers(z2, i).value;
    float worst = 0.0f;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::fabs(a[k] - b[k]));
    EXPECT_LT(worst, 1e-4f) << i;
  }
}

TEST(Train, OneStepIsFinite) {
  gen::Generator g = seeded();
  gen::TrainConfig cfg;
  cfg.steps = 1;
  const gen::TrainReport rep = gen::train(g, scene::Inventory::standard(), cfg);
  ASSERT_EQ(rep.losses.size(), 1u);
  EXPECT_TRUE(std::isfinite(rep.losses[0]));
  EXPECT_TRUE(std::isfinite(rep.final_loss));
  cfg.steps = 0;
  EXPECT_THROW(gen::train(g, scene::Inventory::standard(), cfg), std::invalid_argument);
}

TEST(Train, SeedDeterministic) {
  gen::TrainConfig cfg;
  cfg.steps = 20;
  gen::Generator a = seeded(), b = seeded();
  gen::train(a, scene::Inventory::standard(), cfg);
  gen::train(b, scene::Inventory::standard(), cfg);
  EXPECT_TRUE(a == b);
  gen::Generator c = seeded();
  cfg.seed = 2;
  gen::train(c, scene::Inventory::standard(), cfg);
  EXPECT_FALSE(a == c);
}

TEST(Train, ShortRunReducesError) {
  gen::Generator g = seeded();
  const scene::Inventory inv = scene::Inventory::standard();
  gen::TrainConfig cfg;
  cfg.steps = 150;
  const gen::TrainReport rep = gen::train(g, inv, cfg);
  EXPECT_LT(rep.final_loss, rep.initial_loss);
}

TEST(Train, AdversarialStepIsFinite) {
  gen::Generator g = seeded();
  gen::TrainConfig cfg;
  cfg.mode = gen::TrainMode::kAdversarial;
  cfg.steps = 3;
  const gen::TrainReport rep = gen::train(g, scene::Inventory::standard(), cfg);
  for (double l : rep.losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(Weights, RoundTrip) {
  gen::Generator g = seeded(9);
  g.set_inventory_hash(scene::Inventory::standard().hash());
  const auto path = temp_path("roundtrip.gscp");
  gen::save_weights(g, path);
  const gen::Generator back = gen::load_weights(path);
  EXPECT_TRUE(back == g);
  const Tensor z = gen::sample_latents(4, 32, 1);
  const Tensor a = g.forward(z), b = back.forward(z);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  std::filesystem::remove(path);
}

TEST(Weights, TruncatedFileIsRejected) {
  const gen::Generator g = seeded();
  const auto path = temp_path("truncated.gscp");
  gen::save_weights(g, path);
  std::vector<std::uint8_t> bytes = io::read_file_bytes(path);
  for (std::size_t keep : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    io::write_file_bytes(path, std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + keep));
    EXPECT_THROW(gen::load_weights(path), io::FormatError) << keep;
  }
  bytes[0] = 'X';
  io::write_file_bytes(path, bytes);
  EXPECT_THROW(gen::load_weights(path), io::FormatError);
  std::filesystem::remove(path);
}

TEST(Weights, MissingFileNamesPath) {
  const auto path = temp_path("does_not_exist.gscp");
  try {
    gen::load_weights(path);
    FAIL() << "expected an exception";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos) << e.what();
  }
}

TEST(Weights, BundleEncodingIsStable) {
  io::NetworkBundle b;
  b.kind = "test";
  b.meta = {{"k", 1}};
  gen::Generator g = seeded();
  b.networks.emplace_back("G", g.layers());
  const auto bytes = io::encode_bundle(b);
  EXPECT_EQ(bytes, io::encode_bundle(io::decode_bundle(bytes)));
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_TRUE(std::equal(bytes.begin(), bytes.begin() + 4, io::kWeightsMagic));
}

}  // namespace
