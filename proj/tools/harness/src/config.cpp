#include "ganscope/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ganscope/harness/inventory_io.hpp"
#include "ganscope/rng.hpp"

namespace ganscope::harness {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw DataError("'" + v + "' is not a valid number");
  }
  return out;
}

std::string parse_string(const std::string& v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    throw DataError("expected a quoted string");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) ++i;
    out += v[i];
  }
  return out;
}

template <typename T, typename Member>
Field number_field(Member member) {
  return {[member](const ExperimentConfig& c) {
            const T v = member(const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) return fmt_double(v);
            else return std::to_string(v);
          },
          [member](ExperimentConfig& c, const std::string& v) { member(c) = parse_number<T>(v); }};
}

template <typename Member>
Field string_field(Member member) {
  return {[member](const ExperimentConfig& c) { return quote(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const std::string& v) { member(c) = parse_string(v); }};
}

// Ordered (section, key, field) table; the dump follows this order.
const std::vector<std::tuple<std::string, std::string, Field>>& fields() {
  using C = ExperimentConfig;
  static const std::vector<std::tuple<std::string, std::string, Field>> table = {
      {"", "seed", number_field<std::uint64_t>([](C& c) -> std::uint64_t& { return c.seed; })},
      {"", "inventory", string_field([](C& c) -> std::string& { return c.inventory; })},
      {"", "withhold", number_field<int>([](C& c) -> int& { return c.withhold; })},
      {"", "dataset_size", number_field<int>([](C& c) -> int& { return c.dataset_size; })},
      {"", "generated_size", number_field<int>([](C& c) -> int& { return c.generated_size; })},
      {"", "top_k", number_field<int>([](C& c) -> int& { return c.top_k; })},
      {"", "output", string_field([](C& c) -> std::string& { return c.output; })},
      {"generator", "mode",
       Field{[](const C& c) { return quote(gen::to_string(c.generator.mode)); },
             [](C& c, const std::string& v) {
               try {
                 c.generator.mode = gen::parse_train_mode(parse_string(v));
               } catch (const std::invalid_argument& e) {
                 throw DataError(e.what());
               }
             }}},
      {"generator", "steps", number_field<int>([](C& c) -> int& { return c.generator.steps; })},
      {"generator", "batch", number_field<int>([](C& c) -> int& { return c.generator.batch; })},
      {"generator", "lr", number_field<double>([](C& c) -> double& { return c.generator.lr; })},
      {"generator", "squared_fraction",
       number_field<double>([](C& c) -> double& { return c.generator.squared_fraction; })},
      {"generator", "critic_lr", number_field<double>([](C& c) -> double& { return c.generator.critic_lr; })},
      {"encoder", "inverter_steps", number_field<int>([](C& c) -> int& { return c.encoder.inverter_steps; })},
      {"encoder", "finetune_steps", number_field<int>([](C& c) -> int& { return c.encoder.finetune_steps; })},
      {"encoder", "direct_steps", number_field<int>([](C& c) -> int& { return c.encoder.direct_steps; })},
      {"encoder", "batch", number_field<int>([](C& c) -> int& { return c.encoder.batch; })},
      {"encoder", "lr", number_field<double>([](C& c) -> double& { return c.encoder.lr; })},
      {"encoder", "lambda_r", number_field<double>([](C& c) -> double& { return c.encoder.lambda_r; })},
      {"inversion", "lambda_reg", number_field<double>([](C& c) -> double& { return c.inversion.lambda_reg; })},
      {"inversion", "lr", number_field<double>([](C& c) -> double& { return c.inversion.lr; })},
      {"inversion", "steps", number_field<int>([](C& c) -> int& { return c.inversion.steps; })},
      {"inversion", "patience", number_field<int>([](C& c) -> int& { return c.inversion.patience; })},
      {"inversion", "divergence_factor",
       number_field<double>([](C& c) -> double& { return c.inversion.divergence_factor; })},
      {"inversion", "pixel_weight",
       number_field<double>([](C& c) -> double& { return c.inversion.loss.pixel_weight; })},
      {"inversion", "feature_weight",
       number_field<double>([](C& c) -> double& { return c.inversion.loss.feature_weight; })},
      {"inversion", "feature_seed",
       number_field<std::uint64_t>([](C& c) -> std::uint64_t& { return c.inversion.loss.feature_seed; })},
      {"inversion", "images", number_field<int>([](C& c) -> int& { return c.invert_images; })},
      {"inversion", "methods", string_field([](C& c) -> std::string& { return c.methods; })},
  };
  return table;
}

}  // namespace

void ExperimentConfig::derive_seeds() {
  generator.seed = derive_seed(seed, 0x67656e);  // "gen"
  encoder.seed = derive_seed(seed, 0x656e63);    // "enc"
  inversion.seed = derive_seed(seed, 0x696e76);  // "inv"
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw DataError("invalid config: " + what);
  };
  need(withhold >= 0, "withhold must be a class id or 0");
  need(dataset_size >= 2, "dataset_size must be >= 2");
  need(generated_size >= 2, "generated_size must be >= 2");
  need(top_k >= 1, "top_k must be >= 1");
  need(generator.steps >= 1 && generator.batch >= 1, "generator steps and batch must be >= 1");
  need(generator.lr > 0 && generator.critic_lr > 0, "generator learning rates must be positive");
  need(generator.squared_fraction >= 0 && generator.squared_fraction <= 1,
       "generator.squared_fraction must lie in [0,1]");
  need(encoder.inverter_steps >= 1 && encoder.finetune_steps >= 0 && encoder.batch >= 1,
       "encoder step counts must be positive");
  need(encoder.direct_steps >= 0, "encoder.direct_steps must be >= 0");
  need(encoder.lr > 0, "encoder.lr must be positive");
  need(encoder.lambda_r >= 0, "encoder.lambda_r must be >= 0");
  need(invert_images >= 1, "inversion.images must be >= 1");
  need(!methods.empty(), "inversion.methods must list at least one method");
  for (char m : methods) {
    try {
      inv::parse_method(std::string(1, m));
    } catch (const std::invalid_argument&) {
      throw DataError("invalid config: unknown inversion method '" + std::string(1, m) + "'");
    }
  }
  try {
    inversion.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid config: ") + e.what());
  }
}

scene::Inventory ExperimentConfig::load_inventory() const {
  scene::Inventory inv = inventory.empty() ? scene::Inventory::standard() : read_inventory(inventory);
  if (withhold != 0 && !inv.contains(withhold)) {
    throw DataError("withheld class " + std::to_string(withhold) + " is not in the inventory");
  }
  return inv;
}

std::string dump(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "# ganscope experiment configuration\n";
  std::string section;
  for (const auto& [sec, key, field] : fields()) {
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << field.get(c) << "\n";
  }
  return os.str();
}

ExperimentConfig parse(const std::string& text) {
  ExperimentConfig c;
  std::map<std::string, const Field*> index;
  for (const auto& [sec, key, field] : fields()) index[sec.empty() ? key : sec + "." + key] = &field;
  std::istringstream in(text);
  std::string line, section;
  std::map<std::string, int> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '\\' && quoted) ++i;
      else if (line[i] == '"') quoted = !quoted;
      else if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    auto it = index.find(full);
    if (it == index.end()) throw DataError(where + ": unknown key '" + full + "'");
    if (seen[full]++) throw DataError(where + ": duplicate key '" + full + "'");
    try {
      it->second->set(c, trim(line.substr(eq + 1)));
    } catch (const DataError& e) {
      throw DataError(where + " (" + full + "): " + e.what());
    }
  }
  c.derive_seeds();
  return c;
}

ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (const auto& [sec, key, field] : fields())
    if (field.get(a) != field.get(b)) return false;
  return a.generator.seed == b.generator.seed && a.encoder.seed == b.encoder.seed &&
         a.inversion.seed == b.inversion.seed;
}

}  // namespace ganscope::harness
