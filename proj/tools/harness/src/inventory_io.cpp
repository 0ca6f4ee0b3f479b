#include "ganscope/harness/inventory_io.hpp"

#include <fstream>

#include "ganscope/harness/config.hpp"

namespace ganscope::harness {

nlohmann::json inventory_to_json(const scene::Inventory& inv) {
  nlohmann::json classes = nlohmann::json::array();
  for (const scene::ClassDef& c : inv.classes()) {
    classes.push_back({{"id", c.id},
                       {"name", c.name},
                       {"color", {c.color.r, c.color.g, c.color.b}},
                       {"family", scene::to_string(c.family)},
                       {"size_min", c.size_min},
                       {"size_max", c.size_max},
                       {"aspect", c.aspect},
                       {"presence", c.presence}});
  }
  return {{"classes", classes}};
}

scene::Inventory inventory_from_json(const nlohmann::json& j) {
  try {
    std::vector<scene::ClassDef> classes;
    for (const nlohmann::json& e : j.at("classes")) {
      scene::ClassDef c;
      c.id = e.at("id").get<int>();
      c.name = e.at("name").get<std::string>();
      const auto& col = e.at("color");
      if (!col.is_array() || col.size() != 3) throw DataError("class colour must be [r, g, b]");
      c.color = {col[0].get<float>(), col[1].get<float>(), col[2].get<float>()};
      c.family = scene::parse_shape_family(e.at("family").get<std::string>());
      c.size_min = e.at("size_min").get<double>();
      c.size_max = e.at("size_max").get<double>();
      c.aspect = e.value("aspect", 1.0);
      c.presence = e.at("presence").get<double>();
      classes.push_back(std::move(c));
    }
    scene::Inventory inv(std::move(classes));
    inv.validate();
    return inv;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed inventory: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid inventory: ") + e.what());
  }
}

scene::Inventory read_inventory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read inventory file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("inventory file " + path.string() + " is not valid JSON: " + e.what());
  }
  return inventory_from_json(j);
}

}  // namespace ganscope::harness
