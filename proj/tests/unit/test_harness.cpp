#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "ganscope/harness/config.hpp"
#include "ganscope/harness/dataset.hpp"
#include "ganscope/harness/pipeline.hpp"
#include "ganscope/harness/pool.hpp"
#include "ganscope/weights_io.hpp"

namespace {

using namespace ganscope;
using namespace ganscope::harness;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ganscope_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.dataset_size = 60;
  c.generated_size = 50;
  c.generator.steps = 30;
  c.encoder.inverter_steps = 5;
  c.encoder.finetune_steps = 5;
  c.encoder.direct_steps = 5;
  c.inversion.steps = 5;
  c.invert_images = 6;
  return c;
}

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(GANSCOPE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = read_text(log);
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
  return files;
}

TEST(Config, RoundTripsThroughText) {
  ExperimentConfig c = tiny_config();
  c.seed = 123456789012345ULL;
  c.inversion.lambda_reg = 0.1 + 0.2;
  c.encoder.lr = 1.0 / 3.0;
  c.methods = "bdf";
  c.inventory = "some dir/inv.json";
  c.derive_seeds();
  const ExperimentConfig back = parse(dump(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(dump(back), dump(c));
  EXPECT_EQ(back.generator.seed, c.generator.seed);
}

TEST(Config, StageSeedsFollowMasterSeed) {
  ExperimentConfig a, b;
  b.seed = 2;
  b.derive_seeds();
  EXPECT_NE(a.generator.seed, b.generator.seed);
  EXPECT_NE(a.encoder.seed, b.encoder.seed);
  EXPECT_NE(a.inversion.seed, b.inversion.seed);
  EXPECT_NE(a.generator.seed, a.encoder.seed);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_ANY_THROW(parse("nonsense = 3\n"));
  EXPECT_ANY_THROW(parse("seed = banana\n"));
  EXPECT_ANY_THROW(parse("[generator]\nsteps = 0\n").validate());
  ExperimentConfig c;
  c.methods = "xyz";
  EXPECT_ANY_THROW(c.validate());
}

TEST(Pool, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(97, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Dataset, ExportIsDeterministicAndLoadable) {
  const fs::path a = scratch("data_a"), b = scratch("data_b");
  const scene::Inventory inv = scene::Inventory::standard();
  export_dataset(a, 12, 5, inv, 4);
  export_dataset(b, 12, 5, inv, 4);
  EXPECT_EQ(snapshot(a), snapshot(b));
  const Dataset d = load_dataset(a);
  ASSERT_EQ(d.images.size(), 12u);
  const auto samples = scene::make_dataset(12, 5, inv, 4);
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_EQ(d.segs[k], samples[k].seg);
    for (std::size_t i = 0; i < d.images[k].size(); ++i)
      EXPECT_NEAR(d.images[k][i], samples[k].image[i], 1.0 / 255 + 1e-6);
  }
  EXPECT_EQ(d.manifest.at("withheld").at(0), 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, SmokeRunIsFastAndReproducible) {
  const fs::path root = scratch("pipeline");
  const ExperimentConfig cfg = tiny_config();
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineSummary s = run_pipeline(cfg, root / "one");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(seconds, 60.0);
  EXPECT_EQ(s.methods.size(), 6u);
  EXPECT_GE(s.fsd, 0.0);

  run_pipeline(cfg, root / "two");
  EXPECT_EQ(snapshot(root / "one"), snapshot(root / "two"));

  const auto before = snapshot(root / "one" / "report");
  write_report(root / "one");
  EXPECT_EQ(snapshot(root / "one" / "report"), before);
  fs::remove_all(root);
}

TEST(Cli, ExitCodesAndDiagnostics) {
  const fs::path dir = scratch("cli");
  EXPECT_EQ(run_cli("--bogus-flag", dir).code, 2);
  EXPECT_EQ(run_cli("invert --out " + (dir / "x").string(), dir).code, 2);

  const fs::path missing = dir / "no_such_generator.gscp";
  const Outcome o = run_cli("invert --generator " + missing.string() + " --dataset " + dir.string() +
                                " --method a --out " + (dir / "inv").string(),
                            dir);
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.output.find(missing.string()), std::string::npos) << o.output;

  write_text(dir / "bad.toml", "seed = \n");
  EXPECT_NE(run_cli("--config " + (dir / "bad.toml").string() + " --print-config", dir).code, 0);

  const Outcome ok = run_cli("--seed 7 --print-config", dir);
  EXPECT_EQ(ok.code, 0);
  ExperimentConfig seven;
  seven.seed = 7;
  seven.derive_seeds();
  EXPECT_TRUE(parse(ok.output) == seven) << ok.output;
  fs::remove_all(dir);
}

TEST(Cli, SubcommandsComposeIntoRunArtifacts) {
  const fs::path dir = scratch("cli_steps");
  write_text(dir / "tiny.toml", dump(tiny_config()));
  const std::string cfg = " --config " + (dir / "tiny.toml").string();
  ASSERT_EQ(run_cli("gen-data" + cfg + " --n 30 --withhold 0 --out " + (dir / "truth").string(), dir).code, 0);
  ASSERT_EQ(run_cli("train-gen" + cfg + " --out " + (dir / "g.gscp").string(), dir).code, 0);
  ASSERT_EQ(run_cli("stats" + cfg + " --dataset " + (dir / "truth").string() + " --out " + (dir / "t.json").string(), dir).code, 0);
  ASSERT_EQ(run_cli("stats" + cfg + " --generator " + (dir / "g.gscp").string() + " --n 30 --out " +
                        (dir / "g.json").string() + " --reference " + (dir / "t.json").string() + " --svg " +
                        (dir / "h.svg").string(),
                    dir).code,
            0);
  const Outcome f = run_cli("fsd " + (dir / "t.json").string() + " " + (dir / "t.json").string(), dir);
  ASSERT_EQ(f.code, 0);
  EXPECT_NE(f.output.find("0"), std::string::npos);
  ASSERT_EQ(run_cli("sensitivity --dataset " + (dir / "truth").string() + " --n 10 --trials 2", dir).code, 0);
  ASSERT_EQ(run_cli("train-enc" + cfg + " --generator " + (dir / "g.gscp").string() + " --out " +
                        (dir / "e.gscp").string() + " --out-direct " + (dir / "d.gscp").string(),
                    dir).code,
            0);
  ASSERT_EQ(run_cli("invert" + cfg + " --generator " + (dir / "g.gscp").string() + " --encoders " +
                        (dir / "e.gscp").string() + " --dataset " + (dir / "truth").string() +
                        " --method f --n 3 --out " + (dir / "inv").string(),
                    dir).code,
            0);
  EXPECT_TRUE(fs::exists(dir / "inv" / "result.json"));
  EXPECT_TRUE(fs::exists(dir / "inv" / "reconstructions" / "00002.png"));
  EXPECT_TRUE(fs::exists(dir / "h.svg"));
  fs::remove_all(dir);
}

}  // namespace
