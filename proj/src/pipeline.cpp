#include "rcx/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"
#include "rcx/eval.hpp"
#include "rcx/kde.hpp"
#include "rcx/models/attribution.hpp"
#include "rcx/models/prediction_nn.hpp"

namespace rcx {

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::rf: return "rf";
    case ModelKind::gbdt: return "gbdt";
    case ModelKind::knn: return "knn";
    case ModelKind::nn: return "nn";
  }
  return "?";
}

std::optional<ModelKind> model_kind_from_string(const std::string& s) {
  if (s == "rf") return ModelKind::rf;
  if (s == "gbdt") return ModelKind::gbdt;
  if (s == "knn") return ModelKind::knn;
  if (s == "nn") return ModelKind::nn;
  return std::nullopt;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::plus_infused: return "plus_infused";
    case Variant::infused_alone: return "infused_alone";
    case Variant::plus_index: return "plus_index";
  }
  return "?";
}

std::optional<Variant> variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "plus_infused") return Variant::plus_infused;
  if (s == "infused_alone") return Variant::infused_alone;
  if (s == "plus_index") return Variant::plus_index;
  return std::nullopt;
}

namespace {

InputSet input_set_from_string(const std::string& s) {
  if (s == "semantic") return InputSet::semantic;
  if (s == "semantic_kinematic") return InputSet::semantic_kinematic;
  if (s == "all") return InputSet::all;
  throw InvalidConfig("unknown input set '" + s + "'");
}

EncoderHead head_from_string(const std::string& s) {
  if (s == "continuous") return EncoderHead::continuous_1d;
  if (s == "categorical") return EncoderHead::categorical_10d;
  throw InvalidConfig("unknown encoder head '" + s + "'");
}

ComplexitySource source_from_string(const std::string& s) {
  if (s == "machine") return ComplexitySource::machine;
  if (s == "crowd") return ComplexitySource::crowd;
  throw InvalidConfig("unknown complexity source '" + s + "'");
}

SchemaMode schema_mode_from_string(const std::string& s) {
  if (s == "paper17") return SchemaMode::paper17;
  if (s == "all50") return SchemaMode::all50;
  if (s == "auto") return SchemaMode::auto_filter;
  throw InvalidConfig("unknown schema mode '" + s + "'");
}

const char* to_string(SchemaMode m) {
  switch (m) {
    case SchemaMode::paper17: return "paper17";
    case SchemaMode::all50: return "all50";
    case SchemaMode::auto_filter: return "auto";
  }
  return "?";
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["grid_seeds"] = grid_seeds;
  j["out_dir"] = out_dir.string();

  nlohmann::json w;
  w["seed"] = world.seed;
  w["n_trips"] = world.n_trips;
  w["frames_target"] = world.frames_target;
  w["scenario_mix"] = world.scenario_mix;
  w["hotspot_clusters"] = world.hotspot_clusters;
  w["complexity_noise"] = world.complexity_noise;
  w["kinematic_noise"] = world.kinematic_noise;
  w["semantic_weight"] = world.semantic_weight;
  w["kinematic_weight"] = world.kinematic_weight;
  w["contextual_weight"] = world.contextual_weight;
  w["n_dead_semantic"] = world.n_dead_semantic;
  w["crash_rate_scale"] = world.crash_rate_scale;
  w["region_lat"] = world.region_origin.lat;
  w["region_lon"] = world.region_origin.lon;
  w["crash_year_min"] = world.crash_year_min;
  w["crash_year_max"] = world.crash_year_max;
  w["clusters"] = nlohmann::json::array();
  for (const auto& c : world.clusters) {
    w["clusters"].push_back({{"lat", c.center.lat},
                             {"lon", c.center.lon},
                             {"count", c.count},
                             {"spread_m", c.spread_m}});
  }
  w["dir"] = world_dir.string();
  j["world"] = std::move(w);

  j["sampling"] = {{"interval_m", sampling_interval_m}};
  j["kde"] = {{"radius_m", kde_radius_m},
              {"bin_low", bin_low},
              {"bin_high", bin_high},
              {"raster_enabled", raster_enabled},
              {"raster_cell_m", raster_cell_m}};
  j["schema"] = {{"mode", to_string(schema_mode)},
                 {"zero_frac_threshold", zero_frac_threshold}};
  j["split"] = {{"train_frac", train_frac}, {"trip_wise", trip_wise_split}};
  j["encoder"] = {{"input_set", to_string(encoder.input_set)},
                  {"hidden", encoder.hidden},
                  {"head", to_string(encoder.head)},
                  {"source", to_string(encoder.source)},
                  {"lr", encoder.train.lr_max},
                  {"epochs", encoder_epochs},
                  {"batch_size", encoder_batch}};
  j["predictor"] = {{"model", to_string(predictor_model)},
                    {"feature_set", to_string(predictor_feature_set)},
                    {"variant", to_string(predictor_variant)}};
  j["models"] = {
      {"rf",
       {{"n_trees", rf.n_trees},
        {"max_depth", rf.max_depth},
        {"min_leaf", rf.min_leaf},
        {"features_per_split", rf.features_per_split},
        {"bootstrap", rf.bootstrap}}},
      {"gbdt",
       {{"n_rounds", gbdt.n_rounds},
        {"learning_rate", gbdt.learning_rate},
        {"max_depth", gbdt.max_depth}}},
      {"knn", {{"k", knn.k}}},
      {"nn", {{"epochs", nn_epochs}, {"lr", nn_lr}, {"batch_size", nn_batch}}}};
  nlohmann::json models = nlohmann::json::array();
  for (const ModelKind m : grid_models) models.push_back(to_string(m));
  j["grid"] = {{"models", std::move(models)}};
  j["evaluate"] = {{"assert_improvement", assert_improvement}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("grid_seeds")) {
    cfg.grid_seeds = j.at("grid_seeds").get<std::vector<std::uint64_t>>();
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir.string());

  if (j.contains("world")) {
    const auto& w = j.at("world");
    cfg.world.seed = w.value("seed", cfg.world.seed);
    cfg.world.n_trips = w.value("n_trips", cfg.world.n_trips);
    cfg.world.frames_target =
        w.value("frames_target", cfg.world.frames_target);
    if (w.contains("scenario_mix")) {
      const auto mix = w.at("scenario_mix").get<std::vector<double>>();
      if (mix.size() != 6) {
        throw InvalidConfig("scenario_mix needs 6 entries");
      }
      std::copy(mix.begin(), mix.end(), cfg.world.scenario_mix.begin());
    }
    cfg.world.hotspot_clusters =
        w.value("hotspot_clusters", cfg.world.hotspot_clusters);
    cfg.world.complexity_noise =
        w.value("complexity_noise", cfg.world.complexity_noise);
    cfg.world.kinematic_noise =
        w.value("kinematic_noise", cfg.world.kinematic_noise);
    cfg.world.semantic_weight =
        w.value("semantic_weight", cfg.world.semantic_weight);
    cfg.world.kinematic_weight =
        w.value("kinematic_weight", cfg.world.kinematic_weight);
    cfg.world.contextual_weight =
        w.value("contextual_weight", cfg.world.contextual_weight);
    cfg.world.n_dead_semantic =
        w.value("n_dead_semantic", cfg.world.n_dead_semantic);
    cfg.world.crash_rate_scale =
        w.value("crash_rate_scale", cfg.world.crash_rate_scale);
    cfg.world.region_origin.lat =
        w.value("region_lat", cfg.world.region_origin.lat);
    cfg.world.region_origin.lon =
        w.value("region_lon", cfg.world.region_origin.lon);
    cfg.world.crash_year_min =
        w.value("crash_year_min", cfg.world.crash_year_min);
    cfg.world.crash_year_max =
        w.value("crash_year_max", cfg.world.crash_year_max);
    for (const auto& c : w.value("clusters", nlohmann::json::array())) {
      CrashClusterSpec spec;
      spec.center.lat = c.at("lat").get<double>();
      spec.center.lon = c.at("lon").get<double>();
      spec.count = c.at("count").get<int>();
      spec.spread_m = c.value("spread_m", spec.spread_m);
      cfg.world.clusters.push_back(spec);
    }
    if (w.contains("dir") && !w.at("dir").get<std::string>().empty()) {
      cfg.world_dir = w.at("dir").get<std::string>();
    }
  }
  if (cfg.world_dir.empty()) cfg.world_dir = cfg.out_dir / "world";

  if (j.contains("sampling")) {
    cfg.sampling_interval_m =
        j.at("sampling").value("interval_m", cfg.sampling_interval_m);
  }
  if (j.contains("kde")) {
    const auto& k = j.at("kde");
    cfg.kde_radius_m = k.value("radius_m", cfg.kde_radius_m);
    cfg.bin_low = k.value("bin_low", cfg.bin_low);
    cfg.bin_high = k.value("bin_high", cfg.bin_high);
    cfg.raster_enabled = k.value("raster_enabled", cfg.raster_enabled);
    cfg.raster_cell_m = k.value("raster_cell_m", cfg.raster_cell_m);
  }
  if (j.contains("schema")) {
    const auto& s = j.at("schema");
    if (s.contains("mode")) {
      cfg.schema_mode = schema_mode_from_string(s.at("mode"));
    }
    cfg.zero_frac_threshold =
        s.value("zero_frac_threshold", cfg.zero_frac_threshold);
  }
  if (j.contains("split")) {
    cfg.train_frac = j.at("split").value("train_frac", cfg.train_frac);
    cfg.trip_wise_split =
        j.at("split").value("trip_wise", cfg.trip_wise_split);
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    if (e.contains("input_set")) {
      cfg.encoder.input_set = input_set_from_string(e.at("input_set"));
    }
    cfg.encoder.hidden = e.value("hidden", cfg.encoder.hidden);
    if (e.contains("head")) cfg.encoder.head = head_from_string(e.at("head"));
    if (e.contains("source")) {
      cfg.encoder.source = source_from_string(e.at("source"));
    }
    cfg.encoder.train.lr_max = e.value("lr", 0.0);
    cfg.encoder_epochs = e.value("epochs", cfg.encoder_epochs);
    cfg.encoder_batch = e.value("batch_size", cfg.encoder_batch);
  }
  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    if (p.contains("model")) {
      const auto m = model_kind_from_string(p.at("model"));
      if (!m) throw InvalidConfig("unknown predictor model");
      cfg.predictor_model = *m;
    }
    if (p.contains("feature_set")) {
      cfg.predictor_feature_set = input_set_from_string(p.at("feature_set"));
    }
    if (p.contains("variant")) {
      const auto v = variant_from_string(p.at("variant"));
      if (!v) throw InvalidConfig("unknown predictor variant");
      cfg.predictor_variant = *v;
    }
  }
  if (j.contains("models")) {
    const auto& m = j.at("models");
    if (m.contains("rf")) {
      const auto& rf = m.at("rf");
      cfg.rf.n_trees = rf.value("n_trees", cfg.rf.n_trees);
      cfg.rf.max_depth = rf.value("max_depth", cfg.rf.max_depth);
      cfg.rf.min_leaf = rf.value("min_leaf", cfg.rf.min_leaf);
      cfg.rf.features_per_split =
          rf.value("features_per_split", cfg.rf.features_per_split);
      cfg.rf.bootstrap = rf.value("bootstrap", cfg.rf.bootstrap);
    }
    if (m.contains("gbdt")) {
      const auto& g = m.at("gbdt");
      cfg.gbdt.n_rounds = g.value("n_rounds", cfg.gbdt.n_rounds);
      cfg.gbdt.learning_rate =
          g.value("learning_rate", cfg.gbdt.learning_rate);
      cfg.gbdt.max_depth = g.value("max_depth", cfg.gbdt.max_depth);
    }
    if (m.contains("knn")) cfg.knn.k = m.at("knn").value("k", cfg.knn.k);
    if (m.contains("nn")) {
      const auto& n = m.at("nn");
      cfg.nn_epochs = n.value("epochs", cfg.nn_epochs);
      cfg.nn_lr = n.value("lr", cfg.nn_lr);
      cfg.nn_batch = n.value("batch_size", cfg.nn_batch);
    }
  }
  if (j.contains("grid") && j.at("grid").contains("models")) {
    cfg.grid_models.clear();
    for (const auto& m : j.at("grid").at("models")) {
      const auto kind = model_kind_from_string(m.get<std::string>());
      if (!kind) throw InvalidConfig("unknown grid model");
      cfg.grid_models.push_back(*kind);
    }
  }
  if (j.contains("evaluate")) {
    cfg.assert_improvement =
        j.at("evaluate").value("assert_improvement", cfg.assert_improvement);
  }
  return cfg;
}

std::string PipelineConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void apply_override(nlohmann::json& doc, const std::string& setting) {
  const auto eq = setting.find('=');
  if (eq == std::string::npos) {
    throw InvalidConfig("override '" + setting + "' is not key=value");
  }
  const std::string key = setting.substr(0, eq);
  const std::string value = setting.substr(eq + 1);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;  // plain string
  }
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part =
        key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw InvalidConfig("bad override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return PipelineConfig::from_json(doc);
}

PipelineConfig config_from_overrides(
    const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& o : overrides) apply_override(doc, o);
  return PipelineConfig::from_json(doc);
}

WorldInputs load_world(const std::filesystem::path& world_dir) {
  WorldInputs inputs;
  const auto trips_dir = world_dir / "trips";
  if (!std::filesystem::is_directory(trips_dir)) {
    throw Error("missing trips directory " + trips_dir.string());
  }
  std::vector<std::filesystem::path> trip_files;
  for (const auto& entry : std::filesystem::directory_iterator(trips_dir)) {
    if (entry.path().extension() == ".csv") {
      trip_files.push_back(entry.path());
    }
  }
  std::sort(trip_files.begin(), trip_files.end());
  for (const auto& path : trip_files) {
    TripSeries trip = parse_trip_log(path);
    const std::string id = trip.trip_id;
    inputs.semantic[id] =
        parse_semantic_summary(world_dir / "semantic" / (id + ".json"));
    inputs.contextual[id] =
        parse_contextual_runs(world_dir / "contextual" / (id + ".json"));
    inputs.machine[id] =
        parse_complexity(world_dir / "complexity_machine" / (id + ".csv"),
                         ComplexitySource::machine)
            .scores;
    auto crowd =
        parse_complexity(world_dir / "complexity_crowd" / (id + ".csv"),
                         ComplexitySource::crowd);
    inputs.crowd[id] = std::move(crowd.scores);
    for (const int f : crowd.high_disagreement_frames) {
      inputs.crowd_disagreement_frames.push_back(f);
    }
    inputs.trips.push_back(std::move(trip));
  }
  if (inputs.trips.empty()) {
    throw Error("no trip logs under " + trips_dir.string());
  }
  inputs.crashes = parse_crash_records(world_dir / "crashes.csv");
  inputs.speed_limits = parse_speed_limits(world_dir / "speed_limits.json");
  return inputs;
}

std::vector<FrameRecord> featurize_world(const WorldInputs& inputs,
                                         const PipelineConfig& cfg) {
  const SpeedLimitIndex limits(inputs.speed_limits);
  std::vector<FrameRecord> frames;
  for (const auto& trip : inputs.trips) {
    const SamplingPlan plan = sample_frames(trip, cfg.sampling_interval_m);
    const auto& semantic = inputs.semantic.at(trip.trip_id);
    const auto& contextual = inputs.contextual.at(trip.trip_id);
    const auto& machine = inputs.machine.at(trip.trip_id);
    const auto& crowd = inputs.crowd.at(trip.trip_id);
    for (const auto& anchor : plan.anchors) {
      FrameRecord f;
      f.trip_id = trip.trip_id;
      f.frame_index = anchor.frame_index;
      f.anchor = trip.samples[anchor.sample_begin].pos;
      f.odometer_m = anchor.odometer_m;
      const auto sem = semantic.find(anchor.frame_index);
      if (sem == semantic.end()) {
        throw MissingFeature("trip " + trip.trip_id + " frame " +
                             std::to_string(anchor.frame_index) +
                             " has no semantic entry");
      }
      f.semantic = sem->second;
      const auto ctx = contextual.find(anchor.frame_index);
      if (ctx != contextual.end()) f.contextual = ctx->second;
      const auto mach = machine.find(anchor.frame_index);
      if (mach != machine.end()) f.complexity_machine = mach->second.value;
      const auto crw = crowd.find(anchor.frame_index);
      if (crw != crowd.end()) f.complexity_crowd = crw->second.value;
      const std::span<const TelemetrySample> segment(
          trip.samples.data() + anchor.sample_begin,
          anchor.sample_end - anchor.sample_begin);
      f.kinematics = kinematics(segment, limits.lookup(f.anchor));
      frames.push_back(std::move(f));
    }
  }
  std::sort(frames.begin(), frames.end(),
            [](const FrameRecord& a, const FrameRecord& b) {
              if (a.trip_id != b.trip_id) return a.trip_id < b.trip_id;
              return a.frame_index < b.frame_index;
            });
  return frames;
}

void label_world_frames(std::vector<FrameRecord>& frames,
                        const std::vector<CrashRecord>& crashes,
                        const PipelineConfig& cfg) {
  if (crashes.empty()) {
    throw DegenerateRange("no crash records; density is zero everywhere");
  }
  GeoPoint origin{0.0, 0.0};
  for (const auto& c : crashes) {
    origin.lat += c.pos.lat;
    origin.lon += c.pos.lon;
  }
  origin.lat /= static_cast<double>(crashes.size());
  origin.lon /= static_cast<double>(crashes.size());
  std::vector<GeoPoint> points;
  points.reserve(crashes.size());
  for (const auto& c : crashes) points.push_back(c.pos);
  const DensityField field(std::move(points), cfg.kde_radius_m, origin);
  label_frames(frames, field, cfg.bin_low, cfg.bin_high);
}

FeatureMatrix build_dataset(const std::vector<FrameRecord>& frames,
                            const PipelineConfig& cfg, std::uint64_t seed) {
  const ContextualEncoding enc = ContextualEncoding::paper_default();
  const FeatureSchema schema =
      build_schema(frames, cfg.schema_mode, enc, cfg.zero_frac_threshold);
  FeatureMatrix m =
      assemble_dataset(frames, schema, make_frame_featurizer(enc));
  split_dataset(m, seed, cfg.train_frac, cfg.trip_wise_split);
  return m;
}

std::vector<int> feature_set_columns(const FeatureSchema& schema,
                                     InputSet set) {
  std::vector<FeatureGroup> groups = {FeatureGroup::semantic};
  if (set != InputSet::semantic) groups.push_back(FeatureGroup::kinematic);
  if (set == InputSet::all) groups.push_back(FeatureGroup::contextual);
  return schema.indices_of(groups);
}

TrainedEncoder train_encoder(const FeatureMatrix& m, EncoderConfig cfg,
                             int epochs, int batch_size) {
  if (!m.has_split()) throw Error("matrix has no split flags");
  TrainedEncoder enc;
  enc.input_cols = feature_set_columns(m.schema, cfg.input_set);

  const char* target_name = cfg.source == ComplexitySource::machine
                                ? "complexity_machine"
                                : "complexity_crowd";
  const int target_col = m.schema.index_of(target_name);
  if (target_col < 0) {
    throw MissingFeature(std::string("schema has no '") + target_name +
                         "' column");
  }

  const std::vector<int> train_rows = m.row_indices(Split::train);
  const std::vector<int> test_rows = m.row_indices(Split::test);

  const Eigen::MatrixXd X_all = m.columns(enc.input_cols);
  enc.scaler.fit(X_all, train_rows);
  const Eigen::MatrixXd X_scaled = enc.scaler.apply(X_all);

  const auto gather = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), X_scaled.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = X_scaled.row(rows[i]);
      y(static_cast<Eigen::Index>(i)) = m.rows(rows[i], target_col);
    }
    return std::make_pair(std::move(X), std::move(y));
  };
  const auto [X_train, y_train] = gather(train_rows);
  const auto [X_test, y_test] = gather(test_rows);

  TrainConfig tc = default_encoder_train_config(cfg);
  tc.epochs = epochs > 0 ? epochs : tc.epochs;
  tc.batch_size = batch_size > 0 ? batch_size : tc.batch_size;
  cfg.train = tc;

  enc.config = cfg;
  enc.net = build_encoder(cfg, static_cast<int>(enc.input_cols.size()));

  Targets t_train, t_test;
  if (cfg.head == EncoderHead::continuous_1d) {
    t_train.real = y_train;
    t_test.real = y_test;
  } else {
    for (Eigen::Index i = 0; i < y_train.size(); ++i) {
      t_train.classes.push_back(complexity_to_class(y_train(i)));
    }
    for (Eigen::Index i = 0; i < y_test.size(); ++i) {
      t_test.classes.push_back(complexity_to_class(y_test(i)));
    }
  }
  train_network(enc.net, X_train, t_train, X_test, t_test, tc);
  enc.metrics =
      evaluate_encoder(enc.net, X_train, y_train, X_test, y_test, cfg.head);
  return enc;
}

Eigen::MatrixXd infused_features(const TrainedEncoder& enc,
                                 const FeatureMatrix& m) {
  const Eigen::MatrixXd X = m.columns(enc.input_cols);
  return extract(enc.net, enc.scaler.apply(X));
}

FeatureMatrix append_infused(const FeatureMatrix& m,
                             const Eigen::MatrixXd& ci) {
  if (ci.rows() != m.rows.rows()) {
    throw ShapeError("infused feature rows do not match the matrix");
  }
  FeatureMatrix out = m;
  char name[16];
  for (Eigen::Index c = 0; c < ci.cols(); ++c) {
    std::snprintf(name, sizeof(name), "ci_%02d", static_cast<int>(c));
    out.schema.add(name, FeatureGroup::complexity_infused);
  }
  out.rows.conservativeResize(m.rows.rows(), m.rows.cols() + ci.cols());
  out.rows.rightCols(ci.cols()) = ci;
  return out;
}

namespace {

std::vector<int> labels_as_int(const FeatureMatrix& m) {
  std::vector<int> out;
  out.reserve(m.labels.size());
  for (const DensityLabel l : m.labels) out.push_back(static_cast<int>(l));
  return out;
}

Eigen::MatrixXd cell_matrix(const FeatureMatrix& m, InputSet set,
                            Variant variant,
                            const Eigen::MatrixXd* infused) {
  std::vector<int> cols;
  if (variant != Variant::infused_alone) {
    cols = feature_set_columns(m.schema, set);
  }
  if (variant == Variant::plus_index) {
    const int idx = m.schema.index_of("complexity_machine");
    if (idx < 0) throw MissingFeature("schema has no complexity_machine");
    cols.push_back(idx);
  }
  Eigen::MatrixXd base = m.columns(cols);
  if (variant == Variant::plus_infused || variant == Variant::infused_alone) {
    if (!infused) throw Error("variant needs infused features");
    Eigen::MatrixXd joined(base.rows(), base.cols() + infused->cols());
    joined << base, *infused;
    return joined;
  }
  return base;
}

}  // namespace

CellResult run_cell(const FeatureMatrix& m, InputSet set, ModelKind model,
                    Variant variant, const Eigen::MatrixXd* infused,
                    const PredictorOptions& opts, std::uint64_t seed) {
  CellResult result;
  result.feature_set = set;
  result.model = model;
  result.variant = variant;

  const Eigen::MatrixXd X = cell_matrix(m, set, variant, infused);
  const std::vector<int> classes = labels_as_int(m);
  const std::vector<int> train_rows = m.row_indices(Split::train);
  const std::vector<int> test_rows = m.row_indices(Split::test);
  std::vector<int> test_labels;
  test_labels.reserve(test_rows.size());
  for (const int r : test_rows) {
    test_labels.push_back(classes[static_cast<std::size_t>(r)]);
  }

  if (model == ModelKind::rf || model == ModelKind::gbdt) {
    if (model == ModelKind::rf) {
      ForestConfig fc = opts.rf;
      fc.seed = seed;
      const RandomForest forest = train_rf(X, classes, train_rows, fc);
      for (const int r : test_rows) {
        result.test_preds.push_back(forest.predict(X.row(r)));
      }
    } else {
      GbdtConfig gc = opts.gbdt;
      gc.seed = seed;
      const GbdtModel gb = train_gbdt(X, classes, train_rows, gc);
      for (const int r : test_rows) {
        result.test_preds.push_back(gb.predict(X.row(r)));
      }
    }
  } else {
    // Distance- and gradient-based models consume the scaled matrix.
    MinMaxScaler scaler;
    scaler.fit(X, train_rows);
    const Eigen::MatrixXd Xs = scaler.apply(X);
    if (model == ModelKind::knn) {
      Eigen::MatrixXd train_X(static_cast<Eigen::Index>(train_rows.size()),
                              Xs.cols());
      std::vector<int> train_classes;
      train_classes.reserve(train_rows.size());
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        train_X.row(static_cast<Eigen::Index>(i)) = Xs.row(train_rows[i]);
        train_classes.push_back(
            classes[static_cast<std::size_t>(train_rows[i])]);
      }
      for (const int r : test_rows) {
        result.test_preds.push_back(
            knn_predict(train_X, train_classes, Xs.row(r), opts.knn));
      }
    } else {
      Eigen::MatrixXd X_train(static_cast<Eigen::Index>(train_rows.size()),
                              Xs.cols());
      Eigen::MatrixXd X_test(static_cast<Eigen::Index>(test_rows.size()),
                             Xs.cols());
      Targets y_train, y_test;
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        X_train.row(static_cast<Eigen::Index>(i)) = Xs.row(train_rows[i]);
        y_train.classes.push_back(
            classes[static_cast<std::size_t>(train_rows[i])]);
      }
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        X_test.row(static_cast<Eigen::Index>(i)) = Xs.row(test_rows[i]);
        y_test.classes.push_back(
            classes[static_cast<std::size_t>(test_rows[i])]);
      }
      Network net =
          build_prediction_nn(static_cast<int>(Xs.cols()), seed);
      TrainConfig tc = prediction_nn_train_config(seed);
      tc.epochs = opts.nn_epochs;
      tc.lr_max = opts.nn_lr;
      tc.batch_size = opts.nn_batch;
      train_network(net, X_train, y_train, X_test, y_test, tc);
      const Eigen::MatrixXd out = forward_batch(net, X_test);
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        Eigen::Index best = 0;
        out.row(r).maxCoeff(&best);
        result.test_preds.push_back(static_cast<int>(best));
      }
    }
  }
  result.test_accuracy = accuracy(result.test_preds, test_labels);
  return result;
}

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

namespace {

struct EncoderSetting {
  int hidden;
  EncoderHead head;
  const char* label;
};

constexpr std::array<EncoderSetting, 3> kEncoderSettings = {{
    {32, EncoderHead::continuous_1d, "32 neurons, continuous"},
    {16, EncoderHead::continuous_1d, "16 neurons, continuous"},
    {32, EncoderHead::categorical_10d, "32 neurons, categorical"},
}};

constexpr std::array<InputSet, 3> kInputSets = {
    InputSet::semantic, InputSet::semantic_kinematic, InputSet::all};

std::string fmt_fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

GridReport run_experiment_grid(const FeatureMatrix& matrix,
                               const PipelineConfig& cfg) {
  GridReport report;
  report.document["config_hash"] = cfg.hash();
  report.document["seeds"] = cfg.grid_seeds;
  report.document["model_configs"] = cfg.to_json()["models"];
  report.document["per_seed"] = nlohmann::json::array();

  PredictorOptions opts;
  opts.rf = cfg.rf;
  opts.gbdt = cfg.gbdt;
  opts.knn = cfg.knn;
  opts.nn_epochs = cfg.nn_epochs;
  opts.nn_lr = cfg.nn_lr;
  opts.nn_batch = cfg.nn_batch;

  int improvement_votes = 0;

  for (const std::uint64_t seed : cfg.grid_seeds) {
    FeatureMatrix m = matrix;
    split_dataset(m, seed, cfg.train_frac, cfg.trip_wise_split);

    nlohmann::json seed_doc;
    seed_doc["seed"] = seed;

    // Encoders. Machine: all three settings x three input sets (the
    // encoder-performance and ablation tables). Crowd: the continuous
    // 32-hidden setting per input set (the annotation-source tables).
    std::map<std::string, TrainedEncoder> encoders;
    const auto encoder_key = [](ComplexitySource src, int hidden,
                                EncoderHead head, InputSet set) {
      return std::string(to_string(src)) + "_h" + std::to_string(hidden) +
             "_" + to_string(head) + "_" + to_string(set);
    };
    nlohmann::json encoder_table = nlohmann::json::array();
    for (const auto& setting : kEncoderSettings) {
      for (const InputSet set : kInputSets) {
        EncoderConfig ec;
        ec.input_set = set;
        ec.hidden = setting.hidden;
        ec.head = setting.head;
        ec.source = ComplexitySource::machine;
        ec.train.seed = seed;
        TrainedEncoder enc =
            train_encoder(m, ec, cfg.encoder_epochs, cfg.encoder_batch);
        encoder_table.push_back(
            {{"setting", setting.label},
             {"hidden", setting.hidden},
             {"head", to_string(setting.head)},
             {"input_set", to_string(set)},
             {"train_metric", enc.metrics.train_metric},
             {"test_metric", enc.metrics.test_metric}});
        encoders.emplace(
            encoder_key(ComplexitySource::machine, setting.hidden,
                        setting.head, set),
            std::move(enc));
      }
    }
    nlohmann::json source_table = nlohmann::json::array();
    for (const ComplexitySource src :
         {ComplexitySource::machine, ComplexitySource::crowd}) {
      for (const InputSet set : kInputSets) {
        if (src == ComplexitySource::crowd) {
          EncoderConfig ec;
          ec.input_set = set;
          ec.hidden = 32;
          ec.head = EncoderHead::continuous_1d;
          ec.source = ComplexitySource::crowd;
          ec.train.seed = seed;
          TrainedEncoder enc =
              train_encoder(m, ec, cfg.encoder_epochs, cfg.encoder_batch);
          encoders.emplace(encoder_key(src, 32, EncoderHead::continuous_1d,
                                       set),
                           std::move(enc));
        }
        const TrainedEncoder& enc = encoders.at(
            encoder_key(src, 32, EncoderHead::continuous_1d, set));
        source_table.push_back(
            {{"source", to_string(src)},
             {"input_set", to_string(set)},
             {"train_metric", enc.metrics.train_metric},
             {"test_metric", enc.metrics.test_metric}});
      }
    }
    seed_doc["encoder_table"] = std::move(encoder_table);
    seed_doc["encoder_source_table"] = std::move(source_table);

    // Per-encoder infused features over all rows.
    std::map<std::string, Eigen::MatrixXd> infused;
    for (const auto& [key, enc] : encoders) {
      infused.emplace(key, infused_features(enc, m));
    }

    // Prediction cells (cached across tables).
    std::vector<int> test_labels;
    for (const int r : m.row_indices(Split::test)) {
      test_labels.push_back(static_cast<int>(
          m.labels[static_cast<std::size_t>(r)]));
    }
    std::map<std::string, CellResult> cells;
    const auto cell = [&](InputSet set, ModelKind model, Variant variant,
                          const std::string& enc_key) -> const CellResult& {
      const std::string key = std::string(to_string(set)) + "|" +
                              to_string(model) + "|" + to_string(variant) +
                              "|" + enc_key;
      const auto it = cells.find(key);
      if (it != cells.end()) return it->second;
      const Eigen::MatrixXd* ci =
          enc_key.empty() ? nullptr : &infused.at(enc_key);
      CellResult r = run_cell(m, set, model, variant, ci, opts, seed);
      return cells.emplace(key, std::move(r)).first->second;
    };

    nlohmann::json main_table = nlohmann::json::array();
    double rf_all_baseline = 0.0, rf_all_infused = 0.0, rf_all_p = 1.0;
    for (const InputSet set : kInputSets) {
      const std::string mkey =
          encoder_key(ComplexitySource::machine, 32,
                      EncoderHead::continuous_1d, set);
      for (const ModelKind model : cfg.grid_models) {
        const CellResult& base = cell(set, model, Variant::baseline, "");
        const CellResult& plus =
            cell(set, model, Variant::plus_infused, mkey);
        const CellResult& alone =
            cell(set, model, Variant::infused_alone, mkey);
        const CellResult& index = cell(set, model, Variant::plus_index, "");
        ComparisonResult cmp;
        try {
          cmp = mcnemar(base.test_preds, plus.test_preds, test_labels);
        } catch (const NoDiscordantPairs&) {
          // Identical predictions: no evidence of any difference.
          cmp.accuracy_a = base.test_accuracy;
          cmp.accuracy_b = plus.test_accuracy;
          cmp.chi2 = 0.0;
          cmp.p_value = 1.0;
        }
        main_table.push_back({{"feature_set", to_string(set)},
                              {"model", to_string(model)},
                              {"baseline", base.test_accuracy},
                              {"plus_infused", plus.test_accuracy},
                              {"difference",
                               plus.test_accuracy - base.test_accuracy},
                              {"infused_alone", alone.test_accuracy},
                              {"plus_index", index.test_accuracy},
                              {"mcnemar_chi2", cmp.chi2},
                              {"mcnemar_p", cmp.p_value},
                              {"discordant_b", cmp.b},
                              {"discordant_c", cmp.c}});
        if (set == InputSet::all && model == ModelKind::rf) {
          rf_all_baseline = base.test_accuracy;
          rf_all_infused = plus.test_accuracy;
          rf_all_p = cmp.p_value;
        }
      }
    }
    seed_doc["main_table"] = std::move(main_table);

    // Annotation-source comparison for the crash model (reference model RF).
    nlohmann::json source_crash = nlohmann::json::array();
    for (const ComplexitySource src :
         {ComplexitySource::machine, ComplexitySource::crowd}) {
      for (const InputSet set : kInputSets) {
        const std::string key =
            encoder_key(src, 32, EncoderHead::continuous_1d, set);
        const CellResult& plus =
            cell(set, ModelKind::rf, Variant::plus_infused, key);
        const CellResult& alone =
            cell(set, ModelKind::rf, Variant::infused_alone, key);
        source_crash.push_back({{"source", to_string(src)},
                                {"input_set", to_string(set)},
                                {"plus_infused", plus.test_accuracy},
                                {"infused_alone", alone.test_accuracy}});
      }
    }
    seed_doc["source_crash_table"] = std::move(source_crash);

    // Encoder-structure ablation (reference model RF, machine source).
    nlohmann::json ablation = nlohmann::json::array();
    for (const auto& setting : kEncoderSettings) {
      for (const InputSet set : kInputSets) {
        const std::string key = encoder_key(
            ComplexitySource::machine, setting.hidden, setting.head, set);
        const CellResult& plus =
            cell(set, ModelKind::rf, Variant::plus_infused, key);
        ablation.push_back({{"setting", setting.label},
                            {"input_set", to_string(set)},
                            {"plus_infused", plus.test_accuracy}});
      }
    }
    seed_doc["encoder_ablation_table"] = std::move(ablation);

    const bool held = rf_all_infused > rf_all_baseline && rf_all_p < 0.05;
    seed_doc["improvement"] = {{"baseline", rf_all_baseline},
                               {"plus_infused", rf_all_infused},
                               {"mcnemar_p", rf_all_p},
                               {"held", held}};
    improvement_votes += held ? 1 : 0;
    report.document["per_seed"].push_back(std::move(seed_doc));
  }

  report.improvement_held =
      improvement_votes * 2 > static_cast<int>(cfg.grid_seeds.size());
  report.document["improvement_held"] = report.improvement_held;
  render_grid_report(report);
  return report;
}

void render_grid_report(GridReport& report) {
  std::ostringstream text;
  std::ostringstream csv;
  csv << "# config_hash=" << report.document["config_hash"].get<std::string>()
      << "\n";
  csv << "table,seed,setting,source,feature_set,model,baseline,plus_infused,"
         "difference,infused_alone,plus_index,train_metric,test_metric,"
         "mcnemar_chi2,mcnemar_p\n";

  text << "config_hash: "
       << report.document["config_hash"].get<std::string>() << "\n";
  for (const auto& seed_doc : report.document["per_seed"]) {
    const auto seed = seed_doc["seed"].get<std::uint64_t>();
    text << "\n===== seed " << seed << " =====\n";

    text << "\nEncoder performance (machine annotations)\n";
    text << pad("Setting", 28) << pad("Input features", 22)
         << pad("Train", 9) << "Test\n";
    for (const auto& row : seed_doc["encoder_table"]) {
      text << pad(row["setting"].get<std::string>(), 28)
           << pad(row["input_set"].get<std::string>(), 22)
           << pad(fmt_fixed(row["train_metric"].get<double>(), 4), 9)
           << fmt_fixed(row["test_metric"].get<double>(), 4) << "\n";
      csv << "encoder," << seed << ","
          << row["setting"].get<std::string>() << ",machine,"
          << row["input_set"].get<std::string>() << ",,,,,,,"
          << fmt_g9(row["train_metric"].get<double>()) << ","
          << fmt_g9(row["test_metric"].get<double>()) << ",,\n";
    }

    text << "\nEncoder performance by annotation source (32 neurons, "
            "continuous)\n";
    text << pad("Source", 12) << pad("Input features", 22) << pad("Train", 9)
         << "Test\n";
    for (const auto& row : seed_doc["encoder_source_table"]) {
      text << pad(row["source"].get<std::string>(), 12)
           << pad(row["input_set"].get<std::string>(), 22)
           << pad(fmt_fixed(row["train_metric"].get<double>(), 4), 9)
           << fmt_fixed(row["test_metric"].get<double>(), 4) << "\n";
      csv << "encoder_source," << seed << ",,"
          << row["source"].get<std::string>() << ","
          << row["input_set"].get<std::string>() << ",,,,,,,"
          << fmt_g9(row["train_metric"].get<double>()) << ","
          << fmt_g9(row["test_metric"].get<double>()) << ",,\n";
    }

    text << "\nCrash-density prediction accuracy (%)\n";
    text << pad("Input features", 22) << pad("Model", 7)
         << pad("Baseline", 10) << pad("+Infused", 10) << pad("Diff", 7)
         << pad("Alone", 8) << pad("+Index", 8) << "McNemar p\n";
    for (const auto& row : seed_doc["main_table"]) {
      text << pad(row["feature_set"].get<std::string>(), 22)
           << pad(row["model"].get<std::string>(), 7)
           << pad(fmt_fixed(row["baseline"].get<double>(), 2), 10)
           << pad(fmt_fixed(row["plus_infused"].get<double>(), 2), 10)
           << pad(fmt_fixed(row["difference"].get<double>(), 2), 7)
           << pad(fmt_fixed(row["infused_alone"].get<double>(), 2), 8)
           << pad(fmt_fixed(row["plus_index"].get<double>(), 2), 8)
           << fmt_fixed(row["mcnemar_p"].get<double>(), 4) << "\n";
      csv << "main," << seed << ",,,"
          << row["feature_set"].get<std::string>() << ","
          << row["model"].get<std::string>() << ","
          << fmt_g9(row["baseline"].get<double>()) << ","
          << fmt_g9(row["plus_infused"].get<double>()) << ","
          << fmt_g9(row["difference"].get<double>()) << ","
          << fmt_g9(row["infused_alone"].get<double>()) << ","
          << fmt_g9(row["plus_index"].get<double>()) << ",,,"
          << fmt_g9(row["mcnemar_chi2"].get<double>()) << ","
          << fmt_g9(row["mcnemar_p"].get<double>()) << "\n";
    }

    text << "\nRF accuracy by annotation source (%)\n";
    text << pad("Source", 12) << pad("Input features", 22)
         << pad("+Infused", 10) << "Infused alone\n";
    for (const auto& row : seed_doc["source_crash_table"]) {
      text << pad(row["source"].get<std::string>(), 12)
           << pad(row["input_set"].get<std::string>(), 22)
           << pad(fmt_fixed(row["plus_infused"].get<double>(), 2), 10)
           << fmt_fixed(row["infused_alone"].get<double>(), 2) << "\n";
      csv << "source_crash," << seed << ",,"
          << row["source"].get<std::string>() << ","
          << row["input_set"].get<std::string>() << ",rf,,"
          << fmt_g9(row["plus_infused"].get<double>()) << ",,"
          << fmt_g9(row["infused_alone"].get<double>()) << ",,,,," << "\n";
    }

    text << "\nRF accuracy by encoder structure (%)\n";
    text << pad("Encoder", 28) << pad("Input features", 22)
         << "Base + Infused\n";
    for (const auto& row : seed_doc["encoder_ablation_table"]) {
      text << pad(row["setting"].get<std::string>(), 28)
           << pad(row["input_set"].get<std::string>(), 22)
           << fmt_fixed(row["plus_infused"].get<double>(), 2) << "\n";
      csv << "encoder_ablation," << seed << ","
          << row["setting"].get<std::string>() << ",machine,"
          << row["input_set"].get<std::string>() << ",rf,,"
          << fmt_g9(row["plus_infused"].get<double>()) << ",,,,,,," << "\n";
    }

    const auto& imp = seed_doc["improvement"];
    text << "\nImprovement hypothesis (RF, all features): baseline "
         << fmt_fixed(imp["baseline"].get<double>(), 2) << " -> +infused "
         << fmt_fixed(imp["plus_infused"].get<double>(), 2)
         << ", McNemar p = " << fmt_fixed(imp["mcnemar_p"].get<double>(), 4)
         << (imp["held"].get<bool>() ? " [held]" : " [not held]") << "\n";
  }
  report.text = text.str();
  report.csv = csv.str();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

void write_run_manifest(const PipelineConfig& cfg, const std::string& command,
                        double elapsed_s,
                        const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["grid_seeds"] = cfg.grid_seeds;
  j["elapsed_s"] = elapsed_s;
  j["outputs"] = outputs;
  auto out =
      open_output(cfg.out_dir / "manifest" / (command + "_manifest.json"));
  out << j.dump(2) << "\n";
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::vector<FrameRecord> load_labeled_frames(const PipelineConfig& cfg) {
  WorldInputs inputs = load_world(cfg.world_dir);
  std::vector<FrameRecord> frames = featurize_world(inputs, cfg);
  label_world_frames(frames, inputs.crashes, cfg);
  return frames;
}

FeatureSchema load_schema(const PipelineConfig& cfg) {
  const auto path = cfg.out_dir / "schema.json";
  std::ifstream in(path);
  if (!in) throw Error("missing " + path.string() + "; run featurize first");
  std::stringstream buf;
  buf << in.rdbuf();
  return FeatureSchema::from_json(buf.str());
}

FeatureMatrix load_dataset(const PipelineConfig& cfg) {
  const FeatureSchema schema = load_schema(cfg);
  return read_feature_matrix_csv(cfg.out_dir / "dataset.csv", schema);
}

std::filesystem::path encoder_path(const PipelineConfig& cfg) {
  return cfg.out_dir / "encoders" /
         ("encoder_" + cfg.encoder.key() + ".json");
}

nlohmann::json encoder_to_json(const TrainedEncoder& enc,
                               const std::string& config_hash) {
  nlohmann::json j = network_to_json(enc.net, enc.config.train);
  j["config_hash"] = config_hash;
  j["encoder"] = {{"input_set", to_string(enc.config.input_set)},
                  {"hidden", enc.config.hidden},
                  {"head", to_string(enc.config.head)},
                  {"source", to_string(enc.config.source)},
                  {"input_columns", enc.input_cols},
                  {"train_metric", enc.metrics.train_metric},
                  {"test_metric", enc.metrics.test_metric}};
  nlohmann::json mins = nlohmann::json::array();
  nlohmann::json maxs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < enc.scaler.mins().size(); ++i) {
    mins.push_back(fmt_g9(enc.scaler.mins()(i)));
    maxs.push_back(fmt_g9(enc.scaler.maxs()(i)));
  }
  j["scaler"] = {{"min", std::move(mins)}, {"max", std::move(maxs)}};
  return j;
}

TrainedEncoder encoder_from_json(const nlohmann::json& j) {
  TrainedEncoder enc;
  enc.net = network_from_json(j, &enc.config.train);
  const auto& e = j.at("encoder");
  enc.config.input_set = input_set_from_string(e.at("input_set"));
  enc.config.hidden = e.at("hidden").get<int>();
  enc.config.head = head_from_string(e.at("head"));
  enc.config.source = source_from_string(e.at("source"));
  enc.input_cols = e.at("input_columns").get<std::vector<int>>();
  enc.metrics.train_metric = e.at("train_metric").get<double>();
  enc.metrics.test_metric = e.at("test_metric").get<double>();
  const auto& sc = j.at("scaler");
  const auto n = static_cast<Eigen::Index>(sc.at("min").size());
  Eigen::MatrixXd bounds(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bounds(0, i) = std::stod(
        sc.at("min").at(static_cast<std::size_t>(i)).get<std::string>());
    bounds(1, i) = std::stod(
        sc.at("max").at(static_cast<std::size_t>(i)).get<std::string>());
  }
  enc.scaler.fit(bounds, {0, 1});  // rows are the recorded mins and maxs
  return enc;
}

}  // namespace

int cmd_synth(const PipelineConfig& cfg) {
  Stopwatch timer;
  generate_world(cfg.world, cfg.world_dir, cfg.hash());
  write_run_manifest(cfg, "synth", timer.seconds(),
                     {cfg.world_dir.string()});
  return 0;
}

int cmd_ingest(const PipelineConfig& cfg) {
  Stopwatch timer;
  const WorldInputs inputs = load_world(cfg.world_dir);
  nlohmann::json j;
  j["config_hash"] = cfg.hash();
  j["n_trips"] = inputs.trips.size();
  std::size_t samples = 0, sem = 0, ctx = 0;
  for (const auto& t : inputs.trips) samples += t.samples.size();
  for (const auto& [id, m] : inputs.semantic) sem += m.size();
  for (const auto& [id, m] : inputs.contextual) ctx += m.size();
  j["n_samples"] = samples;
  j["n_semantic_frames"] = sem;
  j["n_contextual_frames"] = ctx;
  j["n_crashes"] = inputs.crashes.size();
  j["n_roads"] = inputs.speed_limits.roads.size();
  j["crowd_high_disagreement_frames"] = inputs.crowd_disagreement_frames;
  const auto path = cfg.out_dir / "ingest_report.json";
  auto out = open_output(path);
  out << j.dump(2) << "\n";
  write_run_manifest(cfg, "ingest", timer.seconds(), {path.string()});
  return 0;
}

int cmd_featurize(const PipelineConfig& cfg) {
  Stopwatch timer;
  WorldInputs inputs = load_world(cfg.world_dir);
  const std::vector<FrameRecord> frames = featurize_world(inputs, cfg);

  const ContextualEncoding enc = ContextualEncoding::paper_default();
  const FeatureSchema schema =
      build_schema(frames, cfg.schema_mode, enc, cfg.zero_frac_threshold);
  {
    auto out = open_output(cfg.out_dir / "schema.json");
    out << schema.to_json() << "\n";
  }
  {
    auto out = open_output(cfg.out_dir / "sampling.csv");
    out << "# config_hash=" << cfg.hash() << "\n";
    out << "trip_id,frame_index,odometer_m,lat,lon\n";
    for (const auto& f : frames) {
      out << f.trip_id << "," << f.frame_index << "," << fmt_g9(f.odometer_m)
          << "," << fmt_g9(f.anchor.lat) << "," << fmt_g9(f.anchor.lon)
          << "\n";
    }
  }
  {
    const FeatureFn fn = make_frame_featurizer(enc);
    auto out = open_output(cfg.out_dir / "features_raw.csv");
    out << "# config_hash=" << cfg.hash() << "\n";
    out << "trip_id,frame_index,lat,lon";
    for (int c = 0; c < schema.size(); ++c) out << "," << schema.name(c);
    out << "\n";
    for (const auto& f : frames) {
      out << f.trip_id << "," << f.frame_index << "," << fmt_g9(f.anchor.lat)
          << "," << fmt_g9(f.anchor.lon);
      for (int c = 0; c < schema.size(); ++c) {
        const auto v = fn(f, schema.name(c));
        if (!v) {
          throw MissingFeature("frame (" + f.trip_id + ", " +
                               std::to_string(f.frame_index) +
                               ") cannot supply '" + schema.name(c) + "'");
        }
        out << "," << fmt_g9(*v);
      }
      out << "\n";
    }
  }
  write_run_manifest(cfg, "featurize", timer.seconds(),
                     {(cfg.out_dir / "schema.json").string(),
                      (cfg.out_dir / "sampling.csv").string(),
                      (cfg.out_dir / "features_raw.csv").string()});
  return 0;
}

int cmd_kde(const PipelineConfig& cfg) {
  Stopwatch timer;
  WorldInputs inputs = load_world(cfg.world_dir);
  std::vector<FrameRecord> frames = featurize_world(inputs, cfg);
  label_world_frames(frames, inputs.crashes, cfg);

  write_labeled_frames_csv(frames, cfg.out_dir / "labels.csv", cfg.hash());
  const FeatureMatrix m = build_dataset(frames, cfg, cfg.seed);
  write_feature_matrix_csv(m, cfg.out_dir / "dataset.csv", cfg.hash());
  {
    auto out = open_output(cfg.out_dir / "schema.json");
    out << m.schema.to_json() << "\n";
  }
  std::vector<std::string> outputs = {(cfg.out_dir / "labels.csv").string(),
                                      (cfg.out_dir / "dataset.csv").string()};
  if (cfg.raster_enabled) {
    GeoPoint origin{0.0, 0.0};
    for (const auto& c : inputs.crashes) {
      origin.lat += c.pos.lat;
      origin.lon += c.pos.lon;
    }
    origin.lat /= static_cast<double>(inputs.crashes.size());
    origin.lon /= static_cast<double>(inputs.crashes.size());
    std::vector<GeoPoint> pts;
    for (const auto& c : inputs.crashes) pts.push_back(c.pos);
    const DensityField field(std::move(pts), cfg.kde_radius_m, origin);
    BoundingBox bbox{{90.0, 180.0}, {-90.0, -180.0}};
    for (const auto& f : frames) {
      bbox.min.lat = std::min(bbox.min.lat, f.anchor.lat);
      bbox.min.lon = std::min(bbox.min.lon, f.anchor.lon);
      bbox.max.lat = std::max(bbox.max.lat, f.anchor.lat);
      bbox.max.lon = std::max(bbox.max.lon, f.anchor.lon);
    }
    const HeatmapRaster raster = rasterize(field, bbox, cfg.raster_cell_m);
    write_pgm(raster, cfg.out_dir / "raster.pgm", cfg.hash());
    write_raster_csv(raster, cfg.out_dir / "raster.csv", cfg.hash());
    outputs.push_back((cfg.out_dir / "raster.pgm").string());
    outputs.push_back((cfg.out_dir / "raster.csv").string());
  }
  write_run_manifest(cfg, "kde", timer.seconds(), outputs);
  return 0;
}

int cmd_train_encoder(const PipelineConfig& cfg) {
  Stopwatch timer;
  const FeatureMatrix m = load_dataset(cfg);
  EncoderConfig ec = cfg.encoder;
  ec.train.seed = cfg.seed;
  const TrainedEncoder enc =
      train_encoder(m, ec, cfg.encoder_epochs, cfg.encoder_batch);
  const auto path = encoder_path(cfg);
  auto out = open_output(path);
  out << encoder_to_json(enc, cfg.hash()).dump(2) << "\n";
  write_run_manifest(cfg, "train-encoder", timer.seconds(),
                     {path.string()});
  return 0;
}

int cmd_extract(const PipelineConfig& cfg) {
  Stopwatch timer;
  const FeatureMatrix m = load_dataset(cfg);
  std::ifstream in(encoder_path(cfg));
  if (!in) {
    throw Error("missing " + encoder_path(cfg).string() +
                "; run train-encoder first");
  }
  nlohmann::json j;
  in >> j;
  const TrainedEncoder enc = encoder_from_json(j);
  const Eigen::MatrixXd ci = infused_features(enc, m);
  const FeatureMatrix extended = append_infused(m, ci);
  const auto csv_path =
      cfg.out_dir / ("dataset_infused_" + cfg.encoder.key() + ".csv");
  write_feature_matrix_csv(extended, csv_path, cfg.hash());
  const auto schema_path =
      cfg.out_dir / ("schema_infused_" + cfg.encoder.key() + ".json");
  auto out = open_output(schema_path);
  out << extended.schema.to_json() << "\n";
  write_run_manifest(cfg, "extract", timer.seconds(),
                     {csv_path.string(), schema_path.string()});
  return 0;
}

int cmd_train_predictor(const PipelineConfig& cfg) {
  Stopwatch timer;
  const FeatureMatrix m = load_dataset(cfg);

  std::optional<Eigen::MatrixXd> ci;
  if (cfg.predictor_variant == Variant::plus_infused ||
      cfg.predictor_variant == Variant::infused_alone) {
    std::ifstream in(encoder_path(cfg));
    if (!in) {
      throw Error("variant '" +
                  std::string(to_string(cfg.predictor_variant)) +
                  "' needs " + encoder_path(cfg).string());
    }
    nlohmann::json j;
    in >> j;
    ci = infused_features(encoder_from_json(j), m);
  }
  PredictorOptions opts;
  opts.rf = cfg.rf;
  opts.gbdt = cfg.gbdt;
  opts.knn = cfg.knn;
  opts.nn_epochs = cfg.nn_epochs;
  opts.nn_lr = cfg.nn_lr;
  opts.nn_batch = cfg.nn_batch;
  const CellResult result =
      run_cell(m, cfg.predictor_feature_set, cfg.predictor_model,
               cfg.predictor_variant, ci ? &*ci : nullptr, opts, cfg.seed);

  const std::string stem = std::string(to_string(cfg.predictor_model)) + "_" +
                           to_string(cfg.predictor_feature_set) + "_" +
                           to_string(cfg.predictor_variant);
  const auto pred_path = cfg.out_dir / "predictions" / (stem + ".csv");
  {
    auto out = open_output(pred_path);
    out << "# config_hash=" << cfg.hash() << "\n";
    out << "row,prediction,label\n";
    const std::vector<int> test_rows = m.row_indices(Split::test);
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      out << test_rows[i] << ","
          << kLabelNames[static_cast<std::size_t>(result.test_preds[i])]
          << ","
          << to_string(m.labels[static_cast<std::size_t>(test_rows[i])])
          << "\n";
    }
  }
  const auto metrics_path = cfg.out_dir / "predictions" / (stem + ".json");
  {
    nlohmann::json j;
    j["config_hash"] = cfg.hash();
    j["model"] = to_string(cfg.predictor_model);
    j["feature_set"] = to_string(cfg.predictor_feature_set);
    j["variant"] = to_string(cfg.predictor_variant);
    j["test_accuracy"] = result.test_accuracy;
    j["seed"] = cfg.seed;
    auto out = open_output(metrics_path);
    out << j.dump(2) << "\n";
  }
  write_run_manifest(cfg, "train-predictor", timer.seconds(),
                     {pred_path.string(), metrics_path.string()});
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg) {
  Stopwatch timer;
  const FeatureMatrix m = load_dataset(cfg);

  EncoderConfig ec = cfg.encoder;
  ec.train.seed = cfg.seed;
  const TrainedEncoder enc =
      train_encoder(m, ec, cfg.encoder_epochs, cfg.encoder_batch);
  const Eigen::MatrixXd ci = infused_features(enc, m);

  PredictorOptions opts;
  opts.rf = cfg.rf;
  opts.gbdt = cfg.gbdt;
  opts.knn = cfg.knn;
  opts.nn_epochs = cfg.nn_epochs;
  opts.nn_lr = cfg.nn_lr;
  opts.nn_batch = cfg.nn_batch;
  const CellResult base = run_cell(m, cfg.predictor_feature_set,
                                   cfg.predictor_model, Variant::baseline,
                                   nullptr, opts, cfg.seed);
  const CellResult plus = run_cell(m, cfg.predictor_feature_set,
                                   cfg.predictor_model, Variant::plus_infused,
                                   &ci, opts, cfg.seed);
  std::vector<int> test_labels;
  for (const int r : m.row_indices(Split::test)) {
    test_labels.push_back(
        static_cast<int>(m.labels[static_cast<std::size_t>(r)]));
  }
  const ComparisonResult cmp =
      mcnemar(base.test_preds, plus.test_preds, test_labels);
  const auto conf = confusion_matrix(plus.test_preds, test_labels);
  const bool held =
      plus.test_accuracy > base.test_accuracy && cmp.p_value < 0.05;

  nlohmann::json j;
  j["config_hash"] = cfg.hash();
  j["model"] = to_string(cfg.predictor_model);
  j["feature_set"] = to_string(cfg.predictor_feature_set);
  j["baseline_accuracy"] = base.test_accuracy;
  j["plus_infused_accuracy"] = plus.test_accuracy;
  j["mcnemar"] = {{"chi2", cmp.chi2},
                  {"p_value", cmp.p_value},
                  {"b", cmp.b},
                  {"c", cmp.c}};
  j["confusion_plus_infused"] = conf;
  j["encoder_metrics"] = {{"train", enc.metrics.train_metric},
                          {"test", enc.metrics.test_metric}};
  j["improvement_held"] = held;
  const auto eval_path = cfg.out_dir / "evaluation.json";
  {
    auto out = open_output(eval_path);
    out << j.dump(2) << "\n";
  }

  // Permutation importance of the +infused model over the full cell matrix.
  {
    const FeatureMatrix extended = append_infused(m, ci);
    const std::vector<int> cols =
        feature_set_columns(extended.schema, cfg.predictor_feature_set);
    std::vector<int> all_cols = cols;
    for (int c = 0; c < extended.schema.size(); ++c) {
      if (extended.schema.group(c) == FeatureGroup::complexity_infused) {
        all_cols.push_back(c);
      }
    }
    std::vector<std::string> names;
    for (const int c : all_cols) names.push_back(extended.schema.name(c));
    const std::vector<int> train_rows = extended.row_indices(Split::train);
    const std::vector<int> test_rows = extended.row_indices(Split::test);
    const Eigen::MatrixXd X = extended.columns(all_cols);
    ForestConfig fc = cfg.rf;
    fc.seed = cfg.seed;
    const RandomForest forest =
        train_rf(X, labels_as_int(extended), train_rows, fc);
    Eigen::MatrixXd X_test(static_cast<Eigen::Index>(test_rows.size()),
                           X.cols());
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      X_test.row(static_cast<Eigen::Index>(i)) = X.row(test_rows[i]);
    }
    const Attribution attr = permutation_importance(
        [&](const Eigen::RowVectorXd& row) { return forest.predict(row); },
        X_test, test_labels, names, cfg.seed);
    write_attribution_csv(attr, cfg.out_dir / "attribution.csv", cfg.hash());
  }

  write_run_manifest(cfg, "evaluate", timer.seconds(),
                     {eval_path.string(),
                      (cfg.out_dir / "attribution.csv").string()});
  if (cfg.assert_improvement && !held) return 3;
  return 0;
}

int cmd_grid(const PipelineConfig& cfg) {
  Stopwatch timer;
  const std::vector<FrameRecord> frames = load_labeled_frames(cfg);
  const FeatureMatrix m = build_dataset(frames, cfg, cfg.seed);
  const GridReport report = run_experiment_grid(m, cfg);

  {
    auto out = open_output(cfg.out_dir / "report.json");
    out << report.document.dump(2) << "\n";
  }
  {
    auto out = open_output(cfg.out_dir / "report.txt");
    out << report.text;
  }
  {
    auto out = open_output(cfg.out_dir / "report.csv");
    out << report.csv;
  }
  write_run_manifest(cfg, "grid", timer.seconds(),
                     {(cfg.out_dir / "report.json").string(),
                      (cfg.out_dir / "report.txt").string(),
                      (cfg.out_dir / "report.csv").string()});
  if (cfg.assert_improvement && !report.improvement_held) return 3;
  return 0;
}

int cmd_report(const PipelineConfig& cfg) {
  Stopwatch timer;
  const auto path = cfg.out_dir / "report.json";
  std::ifstream in(path);
  if (!in) throw Error("missing " + path.string() + "; run grid first");
  GridReport report;
  in >> report.document;
  const std::string stored = report.document.value("config_hash", "");
  if (stored != cfg.hash()) {
    throw Error("report.json was produced under config hash " + stored +
                ", current config hashes to " + cfg.hash());
  }
  render_grid_report(report);
  {
    auto out = open_output(cfg.out_dir / "report.txt");
    out << report.text;
  }
  {
    auto out = open_output(cfg.out_dir / "report.csv");
    out << report.csv;
  }
  write_run_manifest(cfg, "report", timer.seconds(),
                     {(cfg.out_dir / "report.txt").string(),
                      (cfg.out_dir / "report.csv").string()});
  return 0;
}

}  // namespace rcx
