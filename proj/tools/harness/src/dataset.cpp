#include "ganscope/harness/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "ganscope/harness/config.hpp"
#include "ganscope/harness/inventory_io.hpp"
#include "ganscope/harness/pool.hpp"
#include "ganscope/image_io.hpp"

namespace ganscope::harness {

namespace fs = std::filesystem;

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.png", index);
  return buf;
}

void export_dataset(const fs::path& dir, int n, std::uint64_t seed, const scene::Inventory& inv,
                    std::optional<int> withhold) {
  if (n < 1) throw DataError("dataset size must be >= 1");
  std::vector<scene::Sample> samples;
  try {
    samples = scene::make_dataset(n, seed, inv, withhold);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "segs", ec);
  if (ec) throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  parallel_for(samples.size(), [&](std::size_t i) {
    io::write_png_rgb(dir / "images" / sample_name(i), samples[i].image);
    io::write_png_labels(dir / "segs" / sample_name(i), samples[i].seg);
  });
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    list.push_back({{"file", sample_name(i)}, {"seed", samples[i].seed},
                    {"instances", samples[i].scene.instances.size()}});
  }
  nlohmann::json manifest = {
      {"kind", "ganscope-dataset"},
      {"count", n},
      {"seed", seed},
      {"canvas", samples.front().image.dim(1)},
      {"withheld", withhold ? nlohmann::json::array({*withhold}) : nlohmann::json::array()},
      {"inventory", inventory_to_json(inv)},
      {"samples", list},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << "\n";
}

Dataset load_dataset(const fs::path& dir, int limit) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw DataError("dataset manifest " + mpath.string() + " is missing");
  Dataset d;
  try {
    in >> d.manifest;
    d.inventory = inventory_from_json(d.manifest.at("inventory"));
    const auto& list = d.manifest.at("samples");
    std::size_t n = list.size();
    if (limit >= 0) n = std::min(n, static_cast<std::size_t>(limit));
    d.images.resize(n);
    d.segs.resize(n);
    parallel_for(n, [&](std::size_t i) {
      const std::string file = list[i].at("file").get<std::string>();
      d.images[i] = io::read_png_rgb(dir / "images" / file);
      d.segs[i] = io::read_png_labels(dir / "segs" / file);
    });
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest " + mpath.string() + ": " + e.what());
  } catch (const io::IoError& e) {
    throw DataError(e.what());
  }
  return d;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("image directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ganscope::harness
