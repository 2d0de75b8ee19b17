#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rcx/dataset.hpp"
#include "rcx/encoder.hpp"
#include "rcx/features.hpp"
#include "rcx/models/forest.hpp"
#include "rcx/models/gbdt.hpp"
#include "rcx/models/knn.hpp"
#include "rcx/synth.hpp"

namespace rcx {

enum class ModelKind { rf, gbdt, knn, nn };
const char* to_string(ModelKind m);
std::optional<ModelKind> model_kind_from_string(const std::string& s);

enum class Variant { baseline, plus_infused, infused_alone, plus_index };
const char* to_string(Variant v);
std::optional<Variant> variant_from_string(const std::string& s);

// The one config document driving every command. Defaults match the
// reference values (20 m sampling, 1000 m radius, 0.5/2.0 thresholds,
// momentum 0.9, encoder 1000 epochs, prediction net 2000 epochs).
struct PipelineConfig {
  std::uint64_t seed = 42;
  std::vector<std::uint64_t> grid_seeds = {1};
  std::filesystem::path out_dir = "out";

  WorldConfig world;
  std::filesystem::path world_dir;  // default: out_dir / "world"

  double sampling_interval_m = 20.0;
  double kde_radius_m = 1000.0;
  double bin_low = 0.5;
  double bin_high = 2.0;
  bool raster_enabled = false;
  double raster_cell_m = 250.0;

  SchemaMode schema_mode = SchemaMode::paper17;
  double zero_frac_threshold = 0.90;
  double train_frac = 0.70;
  bool trip_wise_split = false;

  // train-encoder / extract
  EncoderConfig encoder;  // train.seed <- seed; lr <= 0 uses the table
  int encoder_epochs = 1000;
  int encoder_batch = 64;

  // train-predictor / evaluate
  ModelKind predictor_model = ModelKind::rf;
  InputSet predictor_feature_set = InputSet::all;
  Variant predictor_variant = Variant::baseline;
  ForestConfig rf;
  GbdtConfig gbdt;
  KnnConfig knn;
  int nn_epochs = 2000;
  double nn_lr = 0.001;
  int nn_batch = 64;

  std::vector<ModelKind> grid_models = {ModelKind::rf, ModelKind::gbdt,
                                        ModelKind::knn, ModelKind::nn};
  bool assert_improvement = false;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  /// FNV-1a hash of the canonical JSON form, as 16 hex digits.
  std::string hash() const;
};

/// Reads the config document and applies `key=json_value` overrides with
/// dotted paths (e.g. "world.seed=7", "grid_seeds=[1,2,3]").
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});
PipelineConfig config_from_overrides(
    const std::vector<std::string>& overrides);

// Everything parsed back from a world directory.
struct WorldInputs {
  std::vector<TripSeries> trips;
  std::map<std::string, std::map<int, SemanticStats>> semantic;
  std::map<std::string, std::map<int, ContextualRecord>> contextual;
  std::map<std::string, std::map<int, ComplexityScore>> machine;
  std::map<std::string, std::map<int, ComplexityScore>> crowd;
  std::vector<CrashRecord> crashes;
  SpeedLimitMap speed_limits;
  std::vector<int> crowd_disagreement_frames;
};

WorldInputs load_world(const std::filesystem::path& world_dir);

/// Sampling + feature computation over every trip: returns frames with
/// semantic, contextual, kinematic, and complexity data attached (labels
/// still unset).
std::vector<FrameRecord> featurize_world(const WorldInputs& inputs,
                                         const PipelineConfig& cfg);

/// KDE labeling over the frame anchors (field origin = crash centroid).
void label_world_frames(std::vector<FrameRecord>& frames,
                        const std::vector<CrashRecord>& crashes,
                        const PipelineConfig& cfg);

/// Frames -> schema + assembled, labeled, split matrix.
FeatureMatrix build_dataset(const std::vector<FrameRecord>& frames,
                            const PipelineConfig& cfg, std::uint64_t seed);

// ---- encoder stage ----

struct TrainedEncoder {
  EncoderConfig config;
  Network net;
  MinMaxScaler scaler;         // fitted on the encoder's input columns
  std::vector<int> input_cols; // schema indices the encoder consumes
  EncoderMetrics metrics;
};

std::vector<int> feature_set_columns(const FeatureSchema& schema,
                                     InputSet set);

/// Trains one encoder on the matrix's train rows (targets from the
/// complexity_machine/complexity_crowd column per source).
TrainedEncoder train_encoder(const FeatureMatrix& m, EncoderConfig cfg,
                             int epochs, int batch_size);

/// Complexity-infused columns for every row, in eval mode.
Eigen::MatrixXd infused_features(const TrainedEncoder& enc,
                                 const FeatureMatrix& m);

/// Appends ci_00..ci_{h-1} columns (group complexity_infused).
FeatureMatrix append_infused(const FeatureMatrix& m,
                             const Eigen::MatrixXd& ci);

// ---- predictor stage ----

struct CellResult {
  InputSet feature_set;
  ModelKind model;
  Variant variant;
  double test_accuracy = 0.0;
  std::vector<int> test_preds;  // aligned with matrix test-row order
};

struct PredictorOptions {
  ForestConfig rf;
  GbdtConfig gbdt;
  KnnConfig knn;
  int nn_epochs = 2000;
  double nn_lr = 0.001;
  int nn_batch = 64;
};

/// Trains one predictor cell. `infused` supplies the ci columns when the
/// variant needs them. Tree inputs stay raw; KNN and the NN see min-max
/// scaled columns (fit on train rows).
CellResult run_cell(const FeatureMatrix& m, InputSet set, ModelKind model,
                    Variant variant, const Eigen::MatrixXd* infused,
                    const PredictorOptions& opts, std::uint64_t seed);

// ---- experiment grid ----

struct GridReport {
  nlohmann::json document;
  std::string text;
  std::string csv;
  bool improvement_held = true;  // RF, all features: +infused beats baseline
};

/// The full table set per seed: encoder metrics (machine and crowd),
/// prediction accuracy per feature set x model x variant with McNemar
/// comparisons, and the encoder-structure ablation.
GridReport run_experiment_grid(const FeatureMatrix& matrix,
                               const PipelineConfig& cfg);

/// Renders report.document into the text/csv forms (used by `report`).
void render_grid_report(GridReport& report);

// ---- command entry points (each writes its artifacts + run manifest) ----

int cmd_synth(const PipelineConfig& cfg);
int cmd_ingest(const PipelineConfig& cfg);
int cmd_featurize(const PipelineConfig& cfg);
int cmd_kde(const PipelineConfig& cfg);
int cmd_train_encoder(const PipelineConfig& cfg);
int cmd_extract(const PipelineConfig& cfg);
int cmd_train_predictor(const PipelineConfig& cfg);
int cmd_evaluate(const PipelineConfig& cfg);
int cmd_grid(const PipelineConfig& cfg);
int cmd_report(const PipelineConfig& cfg);

}  // namespace rcx
