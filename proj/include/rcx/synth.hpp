#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rcx/ingest.hpp"
#include "rcx/types.hpp"

namespace rcx {

struct CrashClusterSpec {
  GeoPoint center;
  int count = 0;
  double spread_m = 300.0;
};

struct WorldConfig {
  std::uint64_t seed = 42;
  int n_trips = 50;
  int frames_target = 10000;
  // Trip share per scenario: highway, rural, urban, bridge, overpass,
  // hotspot. Must sum to 1.
  std::array<double, 6> scenario_mix = {0.20, 0.20, 0.20, 0.15, 0.15, 0.10};

  // Extra crash clusters placed verbatim (on top of the complexity-driven
  // placement and the automatic hotspot clusters).
  std::vector<CrashClusterSpec> clusters;
  bool hotspot_clusters = true;

  // Dispersion of the complexity annotations around the latent value.
  double complexity_noise = 0.5;
  // Scale of the per-sample speed wobble (m/s).
  double kinematic_noise = 0.6;

  // Family weights inside the latent complexity function.
  double semantic_weight = 1.0;
  double kinematic_weight = 1.0;
  double contextual_weight = 1.0;

  // How many of the 50 candidate semantic features are planted >90% zero
  // (the remaining ones always carry signal). At the default 33 the
  // low-variability filter recovers exactly the 17-name live set.
  int n_dead_semantic = 33;

  // Scales the complexity-driven crash intensity.
  double crash_rate_scale = 1.0;

  GeoPoint region_origin = {42.30, -71.10};
  int crash_year_min = 2018;
  int crash_year_max = 2022;
};

// In-memory copy of everything the generator wrote, plus the latent
// complexity per frame. Values match the files exactly (telemetry is
// rounded to the serialized precision before anchors are computed).
struct GeneratedWorld {
  std::vector<TripSeries> trips;
  std::vector<FrameRecord> frames;  // ordered by (trip_id, frame_index)
  std::vector<double> latent_g;     // aligned with frames
  std::vector<CrashRecord> crashes;
  SpeedLimitMap speed_limits;
};

// Inputs to the latent complexity function, all derived from the same
// values the feature stage later recomputes from the files.
struct LatentInputs {
  // semantic percentages / counts
  double road_pct = 0.0;
  double car_pct = 0.0;
  double building_pct = 0.0;
  double sidewalk_pct = 0.0;
  double person_pct = 0.0;
  double traffic_light_pct = 0.0;
  double vegetation_pct = 0.0;
  double terrain_pct = 0.0;
  double sky_pct = 0.0;
  double lead_car_pct = 0.0;
  double car_count = 0.0;
  double lead_car_count = 0.0;
  // kinematic
  double speed_mean = 0.0;
  double speed_std = 0.0;
  double accel_std = 0.0;
  double accel_min = 0.0;
  double accel_max = 0.0;
  double speed_dev_norm = 0.0;
  // contextual indicators (majority-vote answers)
  bool heavy_traffic = false;
  bool bad_weather = false;
  bool narrow_lanes = false;
  bool night = false;
  bool curved = false;
  bool reduced_visibility = false;
};

/// The fixed quadratic-plus-indicator function g linking the three feature
/// families to the latent complexity, clamped to [0.5, 9.5]. Each family
/// enters through dense linear projections (u1 semantic, u2 kinematic, u3
/// contextual) combined with quadratic and cross-family ridge terms.
/// Identical for every seed so expected model behavior does not move
/// between runs.
double latent_complexity(const LatentInputs& in, double semantic_weight,
                         double kinematic_weight, double contextual_weight);

/// Generates the whole world under `dir`:
///   trips/<scenario>_<nnn>.csv        semantic/<trip_id>.json
///   contextual/<trip_id>.json         complexity_machine/<trip_id>.csv
///   complexity_crowd/<trip_id>.csv    crashes.csv
///   speed_limits.json                 manifest.json
/// Fully deterministic per config. Throws InvalidConfig.
GeneratedWorld generate_world(const WorldConfig& config,
                              const std::filesystem::path& dir,
                              const std::string& config_hash = "");

// Pre-projected speed-limit lookup sharing lookup_speed_limit's contract
// (nearest segment, ties to the first-listed road) but reusing one planar
// projection for every query. The generator and the feature stage both use
// this index so their kinematic features agree bit for bit.
class SpeedLimitIndex {
 public:
  explicit SpeedLimitIndex(const SpeedLimitMap& map);
  double lookup(const GeoPoint& p, double radius_m = 100.0) const;

 private:
  struct Road {
    std::vector<PlanarPoint> points;
    double limit = 0.0;
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  };
  std::vector<Road> roads_;
  GeoPoint origin_;
};

}  // namespace rcx
