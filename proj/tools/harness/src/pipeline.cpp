#include "ganscope/harness/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ganscope/harness/inventory_io.hpp"
#include "ganscope/harness/pool.hpp"
#include "ganscope/image_io.hpp"
#include "ganscope/report.hpp"
#include "ganscope/rng.hpp"

namespace ganscope::harness {
namespace {

template <typename F>
auto wrap_data(const fs::path& path, const std::string& what, F&& f) {
  if (!fs::exists(path)) throw DataError(what + " " + path.string() + " does not exist");
  try {
    return f();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(what + " " + path.string() + ": " + e.what());
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
}

std::string method_name(inv::Method m) { return std::string(1, inv::tag(m)); }

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void log_stage(const std::string& name, double seconds) {
  std::fprintf(stderr, "[ganscope] %s done in %.1f s\n", name.c_str(), seconds);
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  return wrap_data(path, "JSON file", [&] { return nlohmann::json::parse(read_text(path)); });
}

gen::Generator load_generator(const fs::path& path) {
  return wrap_data(path, "generator weight file", [&] { return gen::load_weights(path); });
}

enc::EncoderStack load_encoders(const fs::path& path) {
  return wrap_data(path, "encoder weight file", [&] { return enc::load_stack(path); });
}

nn::Sequential load_direct_encoder(const fs::path& path) {
  return wrap_data(path, "direct encoder weight file", [&] { return enc::load_direct(path); });
}

gen::TrainReport train_generator(const ExperimentConfig& cfg, const scene::Inventory& inv,
                                 gen::Generator& g, const fs::path& weights) {
  const scene::Inventory train_inv = cfg.withhold != 0 ? inv.without(cfg.withhold) : inv;
  g = gen::Generator::standard(train_inv.latent_dim());
  g.init(derive_seed(cfg.generator.seed, 0x696e6974));
  const gen::TrainReport rep = gen::train(g, train_inv, cfg.generator);
  ensure_parent(weights);
  gen::save_weights(g, weights);
  nlohmann::json trace = nlohmann::json::array();
  const std::size_t every = std::max<std::size_t>(1, rep.losses.size() / 200);
  for (std::size_t i = 0; i < rep.losses.size(); i += every) trace.push_back({i, rep.losses[i]});
  write_json(fs::path(weights.string() + ".json"),
             {{"mode", gen::to_string(cfg.generator.mode)},
              {"steps", cfg.generator.steps},
              {"seed", cfg.generator.seed},
              {"withheld", cfg.withhold},
              {"initial_l1", rep.initial_loss},
              {"final_l1", rep.final_loss},
              {"loss_trace", trace}});
  return rep;
}

EncoderBundle train_encoders(const ExperimentConfig& cfg, const gen::Generator& g,
                             const fs::path& stack_path, const fs::path& direct_path) {
  EncoderBundle b;
  b.stack = enc::train_encoder_stack(g, cfg.encoder);
  enc::FinetuneReport direct_rep;
  b.direct = enc::train_direct_encoder(g, cfg.encoder, &direct_rep);
  auto eval = [](const enc::EncoderEval& e) {
    return nlohmann::json{{"latent_l1", e.latent_l1}, {"image_l1", e.image_l1}};
  };
  b.log = {{"stack", b.stack.provenance},
           {"direct", {{"before", eval(direct_rep.before)}, {"after", eval(direct_rep.after)}}}};
  ensure_parent(stack_path);
  ensure_parent(direct_path);
  enc::save_stack(b.stack, stack_path);
  enc::save_direct(b.direct, b.log["direct"], direct_path);
  return b;
}

std::vector<std::vector<int>> image_counts(const std::vector<Tensor>& images, const scene::Inventory& inv) {
  const std::vector<int> ids = inv.class_ids();
  std::vector<std::vector<int>> counts(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    counts[i] = stats::class_counts(scene::segment_image(images[i], inv), ids);
  });
  return counts;
}

std::vector<std::vector<int>> generated_counts(const gen::Generator& g, const scene::Inventory& inv, int n,
                                               std::uint64_t seed) {
  const std::vector<int> ids = inv.class_ids();
  const Tensor z = gen::sample_latents(n, g.latent_dim(), seed);
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(n));
  const std::size_t chunks = (static_cast<std::size_t>(n) + kStatsChunk - 1) / kStatsChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const int begin = static_cast<int>(c) * kStatsChunk;
    const int end = std::min(n, begin + kStatsChunk);
    const Tensor images = g.forward(batch_slice(z, begin, end));
    for (int i = begin; i < end; ++i) {
      counts[static_cast<std::size_t>(i)] =
          stats::class_counts(scene::segment_image(batch_item(images, i - begin), inv), ids);
    }
  });
  return counts;
}

stats::SegStatsRecord record_from_counts(const std::vector<std::vector<int>>& counts,
                                         const std::vector<int>& class_ids) {
  stats::Accumulator acc(class_ids);
  for (const auto& c : counts) acc.add_counts(c);
  return acc.record();
}

SensitivitySummary sensitivity(const std::vector<std::vector<int>>& counts, const std::vector<int>& class_ids,
                               int n_per_split, int trials, std::uint64_t seed) {
  if (trials < 1) throw DataError("sensitivity needs at least one trial");
  if (n_per_split < 2 || 2 * static_cast<std::size_t>(n_per_split) > counts.size()) {
    throw DataError("sensitivity split of " + std::to_string(n_per_split) + " needs at least " +
                    std::to_string(2 * n_per_split) + " samples, have " + std::to_string(counts.size()));
  }
  SensitivitySummary s;
  s.n_per_split = n_per_split;
  s.trials.resize(static_cast<std::size_t>(trials));
  parallel_for(s.trials.size(), [&](std::size_t t) {
    s.trials[t] = stats::sensitivity_test(counts, class_ids, n_per_split, derive_seed(seed, t)).fsd_split;
  });
  for (double v : s.trials) s.mean += v;
  s.mean /= trials;
  return s;
}

nlohmann::json to_json(const SensitivitySummary& s) {
  return {{"n_per_split", s.n_per_split}, {"trials", s.trials}, {"fsd_split", s.mean}};
}

std::vector<inv::InversionResult> invert_all(inv::Method method, const Tensor& images, const inv::Models& models,
                                             const inv::InversionConfig& cfg) {
  const int n = images.dim(0);
  const std::size_t chunks = (static_cast<std::size_t>(n) + kInvertChunk - 1) / kInvertChunk;
  std::vector<std::vector<inv::InversionResult>> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const int begin = static_cast<int>(c) * kInvertChunk;
    const int end = std::min(n, begin + kInvertChunk);
    parts[c] = inv::invert(method, batch_slice(images, begin, end), models, cfg, static_cast<std::size_t>(begin));
  });
  std::vector<inv::InversionResult> out;
  for (auto& p : parts)
    for (auto& r : p) out.push_back(std::move(r));
  return out;
}

MethodSummary summarize(inv::Method m, const std::vector<inv::InversionResult>& results, const Tensor& images,
                        const Tensor* true_z, const Tensor* true_r) {
  MethodSummary s;
  s.method = m;
  s.correlation = inv::correlation_summary(results, images, true_z, true_r);
  for (const auto& r : results) {
    s.objective += r.objective;
    s.image_loss += r.image_loss;
    s.reg += r.reg;
  }
  const double n = static_cast<double>(results.size());
  s.objective /= n;
  s.image_loss /= n;
  s.reg /= n;
  return s;
}

nlohmann::json to_json(const MethodSummary& s) {
  return {{"method", method_name(s.method)},
          {"correlation", inv::to_json(s.correlation)},
          {"mean_objective", s.objective},
          {"mean_image_loss", s.image_loss},
          {"mean_delta_sq_sum", s.reg}};
}

Coverage coverage(const std::vector<scene::SegMap>& truth, const std::vector<scene::SegMap>& recon, int withheld) {
  if (truth.size() != recon.size()) throw DataError("coverage needs one reconstruction per image");
  Coverage c;
  long withheld_hit = 0, retained_hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].labels.size() != recon[i].labels.size()) throw DataError("segmentation sizes differ");
    for (std::size_t p = 0; p < truth[i].labels.size(); ++p) {
      const int t = truth[i].labels[p];
      if (t == 0) continue;
      const bool hit = recon[i].labels[p] == t;
      if (t == withheld) {
        ++c.withheld_pixels;
        withheld_hit += hit;
      } else {
        ++c.retained_pixels;
        retained_hit += hit;
      }
    }
  }
  c.withheld = c.withheld_pixels ? static_cast<double>(withheld_hit) / c.withheld_pixels : 0.0;
  c.retained = c.retained_pixels ? static_cast<double>(retained_hit) / c.retained_pixels : 0.0;
  return c;
}

nlohmann::json to_json(const Coverage& c) {
  return {{"withheld_coverage", c.withheld},
          {"retained_coverage", c.retained},
          {"withheld_pixels", c.withheld_pixels},
          {"retained_pixels", c.retained_pixels}};
}

void write_pairs(const fs::path& path, const Tensor& images, const std::vector<inv::InversionResult>& results,
                 const scene::Inventory& inv, int count) {
  std::vector<Tensor> blocks;
  const int n = std::min<int>(count, static_cast<int>(results.size()));
  for (int i = 0; i < n; ++i) {
    const Tensor input = batch_item(images, i);
    const Tensor& recon = results[static_cast<std::size_t>(i)].reconstruction;
    blocks.push_back(report::pair_block(input, recon, io::colorize(scene::segment_image(input, inv), inv),
                                        io::colorize(scene::segment_image(recon, inv), inv)));
  }
  if (blocks.empty()) return;
  ensure_parent(path);
  io::write_png_rgb(path, report::tile(blocks, 4, 4));
}

void write_inversion(const fs::path& dir, const MethodSummary& summary,
                     const std::vector<inv::InversionResult>& results, const Tensor& images,
                     const scene::Inventory& inv, const nlohmann::json& extra) {
  nlohmann::json j = to_json(summary);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : results) per.push_back(inv::to_json(r));
  j["images"] = per;
  write_json(dir / "result.json", j);
  write_pairs(dir / "pairs.png", images, results, inv);
}

PipelineSummary run_pipeline(const ExperimentConfig& cfg, const fs::path& run) {
  cfg.validate();
  const scene::Inventory inv = cfg.load_inventory();
  const std::vector<int> ids = inv.class_ids();
  PipelineSummary out;
  Stopwatch clock;
  auto stage = [&](const std::string& name) {
    const double s = clock.lap();
    out.stage_seconds.emplace_back(name, s);
    log_stage(name, s);
  };

  write_text(run / "config.toml", dump(cfg));
  write_json(run / "manifest.json",
             {{"kind", "ganscope-run"},
              {"master_seed", cfg.seed},
              {"seeds",
               {{"data", derive_seed(cfg.seed, kStreamData)},
                {"generator", cfg.generator.seed},
                {"encoder", cfg.encoder.seed},
                {"inversion", cfg.inversion.seed},
                {"stats", derive_seed(cfg.seed, kStreamStats)},
                {"sensitivity", derive_seed(cfg.seed, kStreamSplit)},
                {"inversion_targets", derive_seed(cfg.seed, kStreamInvertZ)}}},
              {"withheld", cfg.withhold},
              {"inventory", inventory_to_json(inv)}});

  export_dataset(run / "data" / "truth", cfg.dataset_size, derive_seed(cfg.seed, kStreamData), inv, std::nullopt);
  const Dataset truth = load_dataset(run / "data" / "truth");
  stage("dataset");

  gen::Generator g;
  out.generator = train_generator(cfg, inv, g, run / "generator.gscp");
  stage("generator");

  const auto truth_counts = image_counts(truth.images, inv);
  out.truth = record_from_counts(truth_counts, ids);
  out.generated = record_from_counts(generated_counts(g, inv, cfg.generated_size, derive_seed(cfg.seed, kStreamStats)), ids);
  out.fsd = stats::fsd(out.generated, out.truth);
  out.noise_floor = sensitivity(truth_counts, ids, cfg.dataset_size / 2, 5, derive_seed(cfg.seed, kStreamSplit));
  out.histogram = stats::histogram_report(out.generated, out.truth, cfg.top_k, 0.0, inv.class_names());
  write_json(run / "stats" / "truth.json", stats::to_json(out.truth));
  write_json(run / "stats" / "generated.json", stats::to_json(out.generated));
  write_json(run / "stats" / "fsd.json", {{"fsd", out.fsd}, {"a", "generated.json"}, {"b", "truth.json"}});
  write_json(run / "stats" / "sensitivity.json", to_json(out.noise_floor));
  write_text(run / "stats" / "histogram.csv", report::histogram_csv(out.histogram));
  stage("statistics");

  const EncoderBundle encoders = train_encoders(cfg, g, run / "encoders.gscp", run / "direct.gscp");
  write_json(run / "encoders.json", encoders.log);
  stage("encoders");

  const inv::Models models{&g, &encoders.stack.finetuned, &encoders.direct};
  const Tensor z = gen::sample_latents(cfg.invert_images, g.latent_dim(), derive_seed(cfg.seed, kStreamInvertZ));
  const Tensor images = g.forward(z);
  const Tensor r = g.forward_layers(z, g.split()).value;
  for (char m : cfg.methods) {
    const inv::Method method = inv::parse_method(std::string(1, m));
    const auto results = invert_all(method, images, models, cfg.inversion);
    out.methods.push_back(summarize(method, results, images, &z, &r));
    write_inversion(run / "inversion" / "generated" / method_name(method), out.methods.back(), results, images, inv);
  }
  stage("inversion (generated)");

  if (cfg.withhold != 0) {
    std::vector<Tensor> real;
    std::vector<scene::SegMap> real_segs;
    for (std::size_t i = 0; i < truth.images.size() && static_cast<int>(real.size()) < cfg.invert_images; ++i) {
      const auto counts = truth.segs[i].counts(inv.class_count());
      if (counts[static_cast<std::size_t>(cfg.withhold)] > 0) {
        real.push_back(truth.images[i]);
        real_segs.push_back(truth.segs[i]);
      }
    }
    if (!real.empty()) {
      const Tensor batch = batch_concat(real, true);
      const auto results = invert_all(inv::Method::kF, batch, models, cfg.inversion);
      std::vector<scene::SegMap> recon_segs;
      for (const auto& res : results) recon_segs.push_back(scene::segment_image(res.reconstruction, inv));
      out.coverage = coverage(real_segs, recon_segs, cfg.withhold);
      out.real_images = static_cast<int>(real.size());
      write_inversion(run / "inversion" / "real" / "f", summarize(inv::Method::kF, results, batch, nullptr, nullptr),
                      results, batch, inv, {{"withheld", cfg.withhold}, {"coverage", to_json(out.coverage)}});
    }
  }
  stage("inversion (real)");

  write_report(run);
  stage("report");
  return out;
}

void write_report(const fs::path& run) {
  const nlohmann::json manifest = read_json(run / "manifest.json");
  const scene::Inventory inv = inventory_from_json(manifest.at("inventory"));
  const int withheld = manifest.value("withheld", 0);
  const ExperimentConfig cfg = load(run / "config.toml");
  const stats::SegStatsRecord truth = stats::record_from_json(read_json(run / "stats" / "truth.json"));
  const stats::SegStatsRecord generated = stats::record_from_json(read_json(run / "stats" / "generated.json"));
  const double fsd = read_json(run / "stats" / "fsd.json").at("fsd").get<double>();
  const nlohmann::json sens = read_json(run / "stats" / "sensitivity.json");
  const fs::path out = run / "report";

  const auto hist = stats::histogram_report(generated, truth, cfg.top_k, 0.0, inv.class_names());
  write_text(out / "histogram.csv", report::histogram_csv(hist));
  write_text(out / "histogram.svg", report::histogram_svg(hist, "Mean segmented pixels per image"));

  const std::string label = withheld != 0 ? "generator without " + inv.at(withheld).name : "generator";
  const std::string table = report::fsd_table_markdown(
      {{label, fsd, sens.at("fsd_split").get<double>()}});
  write_text(out / "fsd_table.md", table);

  std::ostringstream md;
  md << "# ganscope report\n\n";
  md << "Master seed " << manifest.at("master_seed").get<std::uint64_t>() << ".";
  if (withheld != 0) md << " Generator trained without class " << withheld << " (" << inv.at(withheld).name << ").";
  md << "\n\n## Segmentation statistics\n\n![histogram](histogram.svg)\n\n";
  for (const auto& w : hist.warnings) md << "- " << w << "\n";
  if (!hist.warnings.empty()) md << "\n";
  md << "## Frechet segmentation distance\n\n" << table << "\n";
  md << "Noise floor: mean FSD between disjoint truth splits of "
     << sens.at("n_per_split").get<int>() << " images.\n\n";

  const fs::path gen_dir = run / "inversion" / "generated";
  if (fs::is_directory(gen_dir)) {
    md << "## Inversion of generated images\n\n| method | pixel corr | r corr | z corr | image loss |\n"
       << "|---|---:|---:|---:|---:|\n";
    auto cell = [](const nlohmann::json& c) {
      return c.is_null() ? std::string("n/a") : report::fixed(c.at("value").get<double>(), 4);
    };
    for (const inv::Method m : inv::all_methods()) {
      const fs::path p = gen_dir / method_name(m) / "result.json";
      if (!fs::exists(p)) continue;
      const nlohmann::json j = read_json(p);
      const auto& c = j.at("correlation");
      md << "| " << method_name(m) << " | " << cell(c.at("pixels")) << " | " << cell(c.at("r")) << " | "
         << cell(c.at("z")) << " | " << report::fixed(j.at("mean_image_loss").get<double>(), 4) << " |\n";
      const fs::path pairs = gen_dir / method_name(m) / "pairs.png";
      if (fs::exists(pairs)) fs::copy_file(pairs, out / ("pairs_generated_" + method_name(m) + ".png"),
                                           fs::copy_options::overwrite_existing);
    }
    md << "\n";
    for (const inv::Method m : inv::all_methods()) {
      if (fs::exists(out / ("pairs_generated_" + method_name(m) + ".png")))
        md << "![method " << method_name(m) << "](pairs_generated_" << method_name(m) << ".png)\n";
    }
    md << "\n";
  }

  const fs::path real = run / "inversion" / "real" / "f" / "result.json";
  if (fs::exists(real)) {
    const nlohmann::json j = read_json(real);
    const auto& c = j.at("coverage");
    md << "## Reconstruction of real images containing the withheld class\n\n"
       << "| pixels | share reconstructed |\n|---|---:|\n"
       << "| withheld class | " << report::fixed(c.at("withheld_coverage").get<double>(), 4) << " |\n"
       << "| retained classes | " << report::fixed(c.at("retained_coverage").get<double>(), 4) << " |\n\n"
       << "Each block: input top-left, reconstruction top-right, segmentations below.\n\n"
       << "![real pairs](pairs_real.png)\n";
    fs::copy_file(run / "inversion" / "real" / "f" / "pairs.png", out / "pairs_real.png",
                  fs::copy_options::overwrite_existing);
  }
  write_text(out / "index.md", md.str());
}

}  // namespace ganscope::harness
