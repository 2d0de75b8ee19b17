#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcx/dataset.hpp"
#include "rcx/types.hpp"

namespace rcx {

struct SamplingPlan {
  struct Anchor {
    int frame_index = 0;
    double odometer_m = 0.0;
    // Samples backing this frame's segment: [sample_begin, sample_end).
    std::size_t sample_begin = 0;
    std::size_t sample_end = 0;
  };
  double interval_m = 20.0;
  std::vector<Anchor> anchors;
};

/// Fixed-distance sampling: anchor 0 at the first sample, each next anchor
/// at the earliest sample whose cumulative great-circle distance from the
/// previous anchor is >= interval_m; stops when the remaining distance is
/// shorter. Throws DegenerateTrip for trips with fewer than 2 samples.
SamplingPlan sample_frames(const TripSeries& trip, double interval_m = 20.0);

/// Kinematics of one frame segment. Mean/std are population statistics;
/// speed_now is the anchor (first) sample's speed. Throws EmptySegment /
/// NonPositiveLimit.
KinematicFeatures kinematics(std::span<const TelemetrySample> segment,
                             double speed_limit_mps);

enum class SchemaMode { paper17, all50, auto_filter };

/// Value of one named semantic feature. Percentage features divide class
/// pixels by their region's total; `*_count` features are raw instance
/// counts. A class absent from the stats contributes 0.
double semantic_feature_value(const SemanticStats& stats,
                              std::string_view name);

/// Candidate semantic feature names observed across `frames`: full-frame
/// percentages, lead-car percentages (`lead_car_<class>`), and instance
/// counts (`<object>_count`, `lead_car_<object>_count`), in sorted-class
/// order within each block.
std::vector<std::string> candidate_semantic_names(
    const std::vector<FrameRecord>& frames);

/// Features whose value is exactly 0 in more than `zero_frac_threshold` of
/// the rows are dropped; order is preserved. Throws EmptyMatrix.
std::vector<std::string> filter_low_variability(
    const Eigen::MatrixXd& values, const std::vector<std::string>& names,
    double zero_frac_threshold = 0.90);

/// Semantic schema names for the requested mode. `paper17` is the fixed
/// 17-name set; `all50` emits every candidate; `auto_filter` applies the
/// low-variability filter to the candidates.
std::vector<std::string> semantic_schema_names(
    const std::vector<FrameRecord>& frames, SchemaMode mode,
    double zero_frac_threshold = 0.90);

// Contextual one-hot layout. Most questions emit one indicator column per
// level; single-column questions emit one binary indicator for a designated
// positive level.
struct ContextualEncoding {
  struct QuestionSpec {
    Question question;
    std::vector<std::string> levels;
    bool single_column = false;
    std::string positive_level;  // single-column questions only
  };
  std::vector<QuestionSpec> questions;

  int columns() const;
  std::vector<std::string> column_names() const;

  /// The default layout: weather 5, road_condition 2, traffic_condition 2,
  /// visibility 1 (positive = reduced), time_of_day 2, road_layout 2,
  /// road_type 3, lane_width 2 -> 19 columns.
  static ContextualEncoding paper_default();
};

/// One-hot encode a record; throws UnknownLevel for answers outside the
/// declared level sets.
Eigen::VectorXd one_hot(const ContextualRecord& rec,
                        const ContextualEncoding& enc);

/// Inverse of one_hot (answers only; agreements are not representable).
ContextualRecord decode_one_hot(const Eigen::VectorXd& v,
                                const ContextualEncoding& enc);

// Per-feature min-max scaling to [0,1], fitted on train rows only.
// Constant features map to 0; out-of-range values clamp.
class MinMaxScaler {
 public:
  void fit(const Eigen::MatrixXd& rows, const std::vector<int>& train_rows);
  bool fitted() const { return fitted_; }

  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;

  const Eigen::VectorXd& mins() const { return min_; }
  const Eigen::VectorXd& maxs() const { return max_; }

 private:
  Eigen::VectorXd min_, max_;
  bool fitted_ = false;
};

/// Feature function for assemble_dataset covering the semantic, kinematic,
/// contextual, and complexity-index groups of the paper schema.
FeatureFn make_frame_featurizer(const ContextualEncoding& enc);

/// Builds the full dataset schema: semantic (per mode) + kinematic (9) +
/// contextual (19) + complexity_machine/complexity_crowd index columns.
FeatureSchema build_schema(const std::vector<FrameRecord>& frames,
                           SchemaMode mode, const ContextualEncoding& enc,
                           double zero_frac_threshold = 0.90);

}  // namespace rcx
