#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rcx/errors.hpp"

namespace rcx {

enum class FeatureGroup : int {
  semantic = 0,
  kinematic,
  contextual,
  complexity_infused,
  complexity_index,
};

const char* to_string(FeatureGroup g);
std::optional<FeatureGroup> feature_group_from_string(const std::string& s);

// Ordered, named feature columns. The order here is the canonical column
// order of every matrix and CSV in the pipeline.
class FeatureSchema {
 public:
  FeatureSchema() = default;

  /// Appends a column; names must stay unique.
  void add(std::string name, FeatureGroup group);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int i) const {
    return names_[static_cast<std::size_t>(i)];
  }
  FeatureGroup group(int i) const {
    return groups_[static_cast<std::size_t>(i)];
  }

  /// Index of `name`, or -1 when absent.
  int index_of(const std::string& name) const;

  int count(FeatureGroup g) const;

  /// Column indices belonging to any of the given groups, in schema order.
  std::vector<int> indices_of(const std::vector<FeatureGroup>& gs) const;

  /// JSON serialization: array of {"name":..., "group":...}.
  std::string to_json() const;
  static FeatureSchema from_json(const std::string& text);

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<FeatureGroup> groups_;
};

/// The 17 semantic feature names kept after the low-variability filter
/// (10 full-frame, 7 lead-car region), in canonical order.
const std::vector<std::string>& paper_semantic_names();

/// The 9 kinematic feature names in canonical order.
const std::vector<std::string>& kinematic_names();

}  // namespace rcx
