#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcx/schema.hpp"
#include "rcx/types.hpp"

namespace rcx {

enum class Split : std::uint8_t { train = 0, test = 1 };

// Aligned rows of named features plus per-row label and train/test flag.
// Rows are ordered by (trip_id, frame_index); everything downstream relies
// on that order being stable.
struct FeatureMatrix {
  FeatureSchema schema;
  Eigen::MatrixXd rows;  // n x schema.size()
  std::vector<DensityLabel> labels;
  std::vector<Split> split;  // empty until split_dataset assigns flags
  std::uint64_t split_seed = 0;

  // Row identity, kept for audit and trip-wise splitting. Not part of the
  // canonical CSV format.
  std::vector<std::string> row_trip;
  std::vector<int> row_frame;

  int n_rows() const { return static_cast<int>(rows.rows()); }
  bool has_split() const {
    return static_cast<int>(split.size()) == n_rows() && n_rows() > 0;
  }
  std::vector<int> row_indices(Split s) const;

  /// Submatrix of the given columns over the given rows.
  Eigen::MatrixXd columns(const std::vector<int>& cols,
                          const std::vector<int>& row_idx) const;
  Eigen::MatrixXd columns(const std::vector<int>& cols) const;
};

/// Computes one named feature value from a frame; nullopt when the frame
/// cannot supply it.
using FeatureFn =
    std::function<std::optional<double>(const FrameRecord&, std::string_view)>;

/// Builds the matrix: rows ordered by (trip_id lexicographic, frame_index),
/// one column per schema name via `feature_fn`. Every frame must be labeled.
/// Throws MissingFeature / UnlabeledFrame.
FeatureMatrix assemble_dataset(const std::vector<FrameRecord>& frames,
                               const FeatureSchema& schema,
                               const FeatureFn& feature_fn);

/// Assigns train/test flags: Fisher-Yates shuffle of row indices seeded by
/// `seed` (splitmix64), first floor(train_frac * n) shuffled rows -> train.
/// With trip_wise = true whole trips are assigned in shuffled-trip order
/// until the train quota is reached. Throws TooFewRows for n < 2.
void split_dataset(FeatureMatrix& m, std::uint64_t seed,
                   double train_frac = 0.70, bool trip_wise = false);

/// Canonical CSV: header = schema names + `label` + `split`, floats with
/// 9 significant digits. `config_hash` is written as a leading comment.
void write_feature_matrix_csv(const FeatureMatrix& m,
                              const std::filesystem::path& path,
                              const std::string& config_hash = "");

FeatureMatrix read_feature_matrix_csv(const std::filesystem::path& path,
                                      const FeatureSchema& schema);

}  // namespace rcx
