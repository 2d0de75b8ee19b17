#include "rcx/schema.hpp"

#include <nlohmann/json.hpp>

namespace rcx {

namespace {
constexpr std::array<const char*, 5> kGroupNames = {
    "semantic", "kinematic", "contextual", "complexity_infused",
    "complexity_index"};
}

const char* to_string(FeatureGroup g) {
  return kGroupNames[static_cast<std::size_t>(g)];
}

std::optional<FeatureGroup> feature_group_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i) {
    if (s == kGroupNames[i]) return static_cast<FeatureGroup>(i);
  }
  return std::nullopt;
}

void FeatureSchema::add(std::string name, FeatureGroup group) {
  if (index_of(name) >= 0) {
    throw Error("duplicate feature name '" + name + "' in schema");
  }
  names_.push_back(std::move(name));
  groups_.push_back(group);
}

int FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int FeatureSchema::count(FeatureGroup g) const {
  int n = 0;
  for (const FeatureGroup gi : groups_) n += (gi == g);
  return n;
}

std::vector<int> FeatureSchema::indices_of(
    const std::vector<FeatureGroup>& gs) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    for (const FeatureGroup g : gs) {
      if (groups_[i] == g) {
        out.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

std::string FeatureSchema::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) {
    arr.push_back({{"name", name(i)}, {"group", to_string(group(i))}});
  }
  return arr.dump();
}

FeatureSchema FeatureSchema::from_json(const std::string& text) {
  const nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw Error("schema json must be an array");
  FeatureSchema s;
  for (const auto& item : arr) {
    const auto g = feature_group_from_string(item.at("group"));
    if (!g) {
      throw Error("unknown feature group '" +
                  item.at("group").get<std::string>() + "'");
    }
    s.add(item.at("name").get<std::string>(), *g);
  }
  return s;
}

const std::vector<std::string>& paper_semantic_names() {
  static const std::vector<std::string> names = {
      // full frame (10)
      "car_count", "road", "vegetation", "sky", "terrain", "car", "sidewalk",
      "building", "traffic_light", "person",
      // lead-car region (7)
      "lead_car_traffic_sign", "lead_car_road", "lead_car_vegetation",
      "lead_car_sky", "lead_car_car", "lead_car_fence", "lead_car_car_count"};
  return names;
}

const std::vector<std::string>& kinematic_names() {
  static const std::vector<std::string> names = {
      "speed_now",  "speed_mean", "speed_std",
      "accel_mean", "accel_std",  "accel_min",
      "accel_max",  "speed_dev_raw", "speed_dev_norm"};
  return names;
}

}  // namespace rcx
