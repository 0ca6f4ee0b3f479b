#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ganscope/harness/config.hpp"
#include "ganscope/harness/dataset.hpp"
#include "ganscope/harness/pipeline.hpp"
#include "ganscope/image_io.hpp"
#include "ganscope/report.hpp"
#include "ganscope/rng.hpp"

namespace h = ganscope::harness;
namespace fs = std::filesystem;
using namespace ganscope;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  h::ExperimentConfig load() const {
    h::ExperimentConfig c = config.empty() ? h::ExperimentConfig{} : h::load(config);
    if (seed) {
      c.seed = *seed;
      c.derive_seeds();
    }
    c.validate();
    return c;
  }
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config, "Experiment config file (key = value)");
  app->add_option("--seed", common.seed, "Master seed, overriding the config");
}

void print(const std::string& line) { std::printf("%s\n", line.c_str()); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Tensor load_images(const std::string& dataset, const std::string& images_dir, int limit,
                   std::vector<scene::SegMap>* segs) {
  std::vector<Tensor> images;
  if (!dataset.empty()) {
    h::Dataset d = h::load_dataset(dataset, limit);
    images = std::move(d.images);
    if (segs) *segs = std::move(d.segs);
  } else {
    for (const fs::path& p : h::list_pngs(images_dir)) {
      if (limit >= 0 && static_cast<int>(images.size()) >= limit) break;
      try {
        images.push_back(io::read_png_rgb(p));
      } catch (const std::exception& e) {
        throw h::DataError(e.what());
      }
    }
  }
  if (images.empty()) throw h::DataError("no input images found");
  return batch_concat(images, true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ganscope: segmentation statistics and layer inversion on a toy scene world"};
  app.require_subcommand(1);
  bool print_config = false;
  Common root;
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
  add_common(&app, root);

  // gen-data
  Common c_data;
  std::string data_out;
  std::optional<int> data_n;
  int data_withhold = 0;
  auto* gen_data = app.add_subcommand("gen-data", "Render a dataset of scenes with exact segmentations");
  add_common(gen_data, c_data);
  gen_data->add_option("--out", data_out, "Output directory")->required();
  gen_data->add_option("--n", data_n, "Number of samples (default: dataset_size)");
  gen_data->add_option("--withhold", data_withhold, "Class id to withhold (0: none)");

  // train-gen
  Common c_gen;
  std::string gen_out;
  auto* train_gen = app.add_subcommand("train-gen", "Train the generator on the scene distribution");
  add_common(train_gen, c_gen);
  train_gen->add_option("--out", gen_out, "Weight file to write")->required();

  // train-enc
  Common c_enc;
  std::string enc_gen, enc_out, enc_direct;
  auto* train_enc = app.add_subcommand("train-enc", "Train the layer-wise and direct encoders");
  add_common(train_enc, c_enc);
  train_enc->add_option("--generator", enc_gen, "Generator weight file")->required();
  train_enc->add_option("--out", enc_out, "Layer-wise encoder weight file")->required();
  train_enc->add_option("--out-direct", enc_direct, "Direct encoder weight file")->required();

  // stats
  Common c_stats;
  std::string stats_gen, stats_data, stats_out, stats_ref, stats_csv, stats_svg;
  std::optional<int> stats_n;
  auto* stats_cmd = app.add_subcommand("stats", "Segmentation statistics of a generator or dataset");
  add_common(stats_cmd, c_stats);
  auto* opt_gen = stats_cmd->add_option("--generator", stats_gen, "Generator weight file");
  auto* opt_data = stats_cmd->add_option("--dataset", stats_data, "Dataset directory");
  opt_gen->excludes(opt_data);
  stats_cmd->add_option("--n", stats_n, "Number of samples");
  stats_cmd->add_option("--out", stats_out, "Statistics JSON to write")->required();
  stats_cmd->add_option("--reference", stats_ref, "Truth statistics JSON for the histogram");
  stats_cmd->add_option("--csv", stats_csv, "Histogram CSV to write (needs --reference)");
  stats_cmd->add_option("--svg", stats_svg, "Histogram SVG to write (needs --reference)");

  // fsd
  std::string fsd_a, fsd_b, fsd_out;
  auto* fsd_cmd = app.add_subcommand("fsd", "Frechet segmentation distance between two statistics files");
  fsd_cmd->add_option("a", fsd_a, "Statistics JSON")->required();
  fsd_cmd->add_option("b", fsd_b, "Statistics JSON")->required();
  fsd_cmd->add_option("--out", fsd_out, "JSON file to write");

  // sensitivity
  Common c_sens;
  std::string sens_data, sens_out;
  int sens_n = 0, sens_trials = 1;
  auto* sens_cmd = app.add_subcommand("sensitivity", "FSD between two disjoint random splits of a dataset");
  add_common(sens_cmd, c_sens);
  sens_cmd->add_option("--dataset", sens_data, "Dataset directory")->required();
  sens_cmd->add_option("--n", sens_n, "Samples per split")->required();
  sens_cmd->add_option("--trials", sens_trials, "Repetitions to average");
  sens_cmd->add_option("--out", sens_out, "JSON file to write");

  // invert
  Common c_inv;
  std::string inv_gen, inv_enc, inv_direct, inv_data, inv_images, inv_out, inv_method = "f";
  int inv_n = -1;
  auto* invert_cmd = app.add_subcommand("invert", "Reconstruct images with one inversion method");
  add_common(invert_cmd, c_inv);
  invert_cmd->add_option("--generator", inv_gen, "Generator weight file")->required();
  invert_cmd->add_option("--encoders", inv_enc, "Layer-wise encoder weight file (methods d, e, f)");
  invert_cmd->add_option("--direct", inv_direct, "Direct encoder weight file (methods b, c)");
  auto* opt_idata = invert_cmd->add_option("--dataset", inv_data, "Dataset directory");
  auto* opt_iimg = invert_cmd->add_option("--images", inv_images, "Directory of PNG images");
  opt_idata->excludes(opt_iimg);
  invert_cmd->add_option("--method", inv_method, "Method a..f")->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  invert_cmd->add_option("--n", inv_n, "Invert at most this many images");
  invert_cmd->add_option("--out", inv_out, "Output directory")->required();

  // report
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Regenerate the static report of a run directory");
  report_cmd->add_option("run", report_dir, "Run directory")->required();

  // run
  Common c_run;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline into one directory");
  add_common(run_cmd, c_run);
  run_cmd->add_option("--out", run_out, "Run directory (default: the config's output)");

  // --print-config is handled before subcommand requirements apply.
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--print-config") {
      app.require_subcommand(0, 1);
      break;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    const std::vector<std::pair<CLI::App*, Common*>> commons = {
        {gen_data, &c_data}, {train_gen, &c_gen}, {train_enc, &c_enc}, {stats_cmd, &c_stats},
        {sens_cmd, &c_sens}, {invert_cmd, &c_inv}, {run_cmd, &c_run}};
    Common active = root;
    for (const auto& [sub, common] : commons) {
      if (!*sub) continue;
      if (!common->config.empty()) active.config = common->config;
      if (common->seed) active.seed = common->seed;
    }
    if (print_config) {
      std::cout << h::dump(active.load());
      return 0;
    }

    if (*gen_data) {
      const h::ExperimentConfig cfg = active.load();
      const scene::Inventory inv = cfg.load_inventory();
      std::optional<int> withhold;
      if (data_withhold != 0) withhold = data_withhold;
      if (withhold && !inv.contains(*withhold)) throw h::DataError("class " + std::to_string(*withhold) + " is not in the inventory");
      const int n = data_n.value_or(cfg.dataset_size);
      h::export_dataset(data_out, n, derive_seed(cfg.seed, h::kStreamData), inv, withhold);
      print("wrote " + std::to_string(n) + " samples to " + data_out);
    } else if (*train_gen) {
      const h::ExperimentConfig cfg = active.load();
      gen::Generator g;
      const auto rep = h::train_generator(cfg, cfg.load_inventory(), g, gen_out);
      print("generator l1 " + num(rep.initial_loss) + " -> " + num(rep.final_loss) + ", wrote " + gen_out);
    } else if (*train_enc) {
      const h::ExperimentConfig cfg = active.load();
      const gen::Generator g = h::load_generator(enc_gen);
      const auto b = h::train_encoders(cfg, g, enc_out, enc_direct);
      print("encoder image l1 " + num(b.log["stack"]["finetuned"]["image_l1"].get<double>()) +
            ", direct " + num(b.log["direct"]["after"]["image_l1"].get<double>()));
    } else if (*stats_cmd) {
      const h::ExperimentConfig cfg = active.load();
      if (stats_gen.empty() == stats_data.empty()) throw h::UsageError("stats needs exactly one of --generator or --dataset");
      if ((!stats_csv.empty() || !stats_svg.empty()) && stats_ref.empty())
        throw h::UsageError("--csv and --svg need --reference");
      scene::Inventory inv = cfg.load_inventory();
      std::vector<std::vector<int>> counts;
      if (!stats_gen.empty()) {
        const gen::Generator g = h::load_generator(stats_gen);
        counts = h::generated_counts(g, inv, stats_n.value_or(cfg.generated_size), derive_seed(cfg.seed, h::kStreamStats));
      } else {
        h::Dataset d = h::load_dataset(stats_data, stats_n.value_or(-1));
        inv = d.inventory;
        counts = h::image_counts(d.images, inv);
      }
      if (counts.size() < 2) throw h::DataError("statistics need at least 2 samples");
      const auto rec = h::record_from_counts(counts, inv.class_ids());
      h::write_json(stats_out, stats::to_json(rec));
      print("wrote statistics of " + std::to_string(rec.n) + " images to " + stats_out);
      if (!stats_ref.empty()) {
        const auto ref = stats::record_from_json(h::read_json(stats_ref));
        const auto hist = stats::histogram_report(rec, ref, cfg.top_k, 0.0, inv.class_names());
        if (!stats_csv.empty()) h::write_text(stats_csv, report::histogram_csv(hist));
        if (!stats_svg.empty()) h::write_text(stats_svg, report::histogram_svg(hist, "Mean segmented pixels per image"));
        for (const auto& w : hist.warnings) print("warning: " + w);
        print("fsd " + num(stats::fsd(rec, ref)));
      }
    } else if (*fsd_cmd) {
      stats::SegStatsRecord a, b;
      try {
        a = stats::record_from_json(h::read_json(fsd_a));
        b = stats::record_from_json(h::read_json(fsd_b));
      } catch (const h::DataError&) {
        throw;
      } catch (const std::exception& e) {
        throw h::DataError(std::string("malformed statistics file: ") + e.what());
      }
      const double v = stats::fsd(a, b);
      print(num(v));
      if (!fsd_out.empty())
        h::write_json(fsd_out, {{"fsd", v}, {"a", fs::path(fsd_a).filename().string()},
                                {"b", fs::path(fsd_b).filename().string()}});
    } else if (*sens_cmd) {
      const h::ExperimentConfig cfg = active.load();
      h::Dataset d = h::load_dataset(sens_data);
      const auto counts = h::image_counts(d.images, d.inventory);
      const auto s = h::sensitivity(counts, d.inventory.class_ids(), sens_n, sens_trials,
                                    derive_seed(cfg.seed, h::kStreamSplit));
      print(num(s.mean));
      if (!sens_out.empty()) h::write_json(sens_out, h::to_json(s));
    } else if (*invert_cmd) {
      const h::ExperimentConfig cfg = active.load();
      if (inv_data.empty() == inv_images.empty()) throw h::UsageError("invert needs exactly one of --dataset or --images");
      const inv::Method method = inv::parse_method(inv_method);
      const bool layerwise = method == inv::Method::kD || method == inv::Method::kE || method == inv::Method::kF;
      const bool direct = method == inv::Method::kB || method == inv::Method::kC;
      if (layerwise && inv_enc.empty()) throw h::UsageError("method " + inv_method + " needs --encoders");
      if (direct && inv_direct.empty()) throw h::UsageError("method " + inv_method + " needs --direct");
      const gen::Generator g = h::load_generator(inv_gen);
      std::optional<enc::EncoderStack> stack;
      std::optional<nn::Sequential> direct_net;
      if (layerwise) stack = h::load_encoders(inv_enc);
      if (direct) direct_net = h::load_direct_encoder(inv_direct);
      const inv::Models models{&g, stack ? &stack->finetuned : nullptr, direct_net ? &*direct_net : nullptr};
      std::vector<scene::SegMap> segs;
      const Tensor images = load_images(inv_data, inv_images, inv_n, &segs);
      if (images.dim(1) != 3 || images.dim(2) != g.output_shape()[1] || images.dim(3) != g.output_shape()[2])
        throw h::DataError("input images do not match the generator output " + to_string(g.output_shape()));
      const auto results = h::invert_all(method, images, models, cfg.inversion);
      const auto summary = h::summarize(method, results, images, nullptr, nullptr);
      nlohmann::json extra = nlohmann::json::object();
      const scene::Inventory inv = cfg.load_inventory();
      if (!segs.empty() && cfg.withhold != 0) {
        std::vector<scene::SegMap> recon;
        for (const auto& r : results) recon.push_back(scene::segment_image(r.reconstruction, inv));
        extra["withheld"] = cfg.withhold;
        extra["coverage"] = h::to_json(h::coverage(segs, recon, cfg.withhold));
      }
      h::write_inversion(inv_out, summary, results, images, inv, extra);
      fs::create_directories(fs::path(inv_out) / "reconstructions");
      for (std::size_t i = 0; i < results.size(); ++i)
        io::write_png_rgb(fs::path(inv_out) / "reconstructions" / h::sample_name(i), results[i].reconstruction);
      print("method " + inv_method + ": pixel correlation " + num(summary.correlation.pixels.value) + " over " +
            std::to_string(results.size()) + " images");
    } else if (*report_cmd) {
      h::write_report(report_dir);
      print("wrote " + (fs::path(report_dir) / "report" / "index.md").string());
    } else if (*run_cmd) {
      const h::ExperimentConfig cfg = active.load();
      const std::string dir = run_out.empty() ? cfg.output : run_out;
      const auto s = h::run_pipeline(cfg, dir);
      print("fsd " + num(s.fsd) + " (noise floor " + num(s.noise_floor.mean) + ")");
      for (const auto& m : s.methods)
        print(std::string("method ") + inv::tag(m.method) + ": pixel correlation " + num(m.correlation.pixels.value));
      print("report: " + (fs::path(dir) / "report" / "index.md").string());
    }
  } catch (const h::UsageError& e) {
    std::fprintf(stderr, "ganscope: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ganscope: %s\n", e.what());
    return 3;
  }
  return 0;
}
