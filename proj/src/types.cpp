#include "rcx/types.hpp"

namespace rcx {

const char* to_string(Scenario s) {
  return kScenarioNames[static_cast<std::size_t>(s)];
}

std::optional<Scenario> scenario_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kScenarioNames.size(); ++i) {
    if (name == kScenarioNames[i]) return static_cast<Scenario>(i);
  }
  return std::nullopt;
}

const char* to_string(DensityLabel l) {
  return kLabelNames[static_cast<std::size_t>(l)];
}

std::optional<DensityLabel> label_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (name == kLabelNames[i]) return static_cast<DensityLabel>(i);
  }
  return std::nullopt;
}

const char* to_string(ComplexitySource s) {
  return s == ComplexitySource::machine ? "machine" : "crowd";
}

}  // namespace rcx
