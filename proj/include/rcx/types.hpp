#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rcx/geo.hpp"

namespace rcx {

enum class Scenario { highway, rural, urban, bridge, overpass, hotspot };

inline constexpr std::array<const char*, 6> kScenarioNames = {
    "highway", "rural", "urban", "bridge", "overpass", "hotspot"};

const char* to_string(Scenario s);
std::optional<Scenario> scenario_from_string(const std::string& name);

/// Crash-density class. Order matters: vote ties resolve to the lowest.
enum class DensityLabel : int { low = 0, medium = 1, high = 2 };

inline constexpr std::array<const char*, 3> kLabelNames = {"Low", "Medium",
                                                           "High"};
inline constexpr int kNumClasses = 3;

const char* to_string(DensityLabel l);
std::optional<DensityLabel> label_from_string(const std::string& name);

struct TelemetrySample {
  double t = 0.0;      // seconds since clip start
  GeoPoint pos;        // WGS84
  double speed = 0.0;  // m/s, >= 0
  double accel_lon = 0.0;  // m/s^2, signed
};

struct TripSeries {
  std::string trip_id;
  Scenario scenario = Scenario::urban;
  std::vector<TelemetrySample> samples;  // strictly increasing in t
};

// Per-frame pixel statistics as produced upstream by a segmentation model.
// Class vocabulary is open; the feature schema decides what is kept.
struct SemanticStats {
  std::int64_t total_pixels = 0;       // full frame
  std::int64_t lead_total_pixels = 0;  // lead-car region
  std::map<std::string, std::int64_t> full_pixels;   // class -> pixels
  std::map<std::string, std::int64_t> lead_pixels;   // class -> pixels
  std::map<std::string, std::int64_t> counts_full;   // object -> instances
  std::map<std::string, std::int64_t> counts_lead;   // object -> instances
};

enum class Question : int {
  weather = 0,
  road_condition,
  traffic_condition,
  visibility,
  time_of_day,
  road_layout,
  road_type,
  lane_width,
};

inline constexpr int kNumQuestions = 8;
inline constexpr std::array<const char*, kNumQuestions> kQuestionNames = {
    "weather",     "road_condition", "traffic_condition", "visibility",
    "time_of_day", "road_layout",    "road_type",         "lane_width"};

struct ContextualRecord {
  std::array<std::string, kNumQuestions> answers;
  // Fraction of the 3 annotation runs agreeing with the chosen answer:
  // 1, 2/3, or 1/3 (three-way disagreement fallback).
  std::array<double, kNumQuestions> vote_agreement{};

  const std::string& answer(Question q) const {
    return answers[static_cast<std::size_t>(q)];
  }
  std::string& answer(Question q) {
    return answers[static_cast<std::size_t>(q)];
  }
};

enum class ComplexitySource { machine, crowd };

const char* to_string(ComplexitySource s);

struct ComplexityScore {
  ComplexitySource source = ComplexitySource::machine;
  double value = 0.0;              // machine in [0,10], crowd in [1,10]
  std::vector<double> raw_votes;   // crowd only: the 3 worker scores
};

struct CrashRecord {
  GeoPoint pos;
  int year = 0;
};

struct SpeedLimitRoad {
  std::vector<GeoPoint> points;  // polyline
  double limit_mps = 0.0;        // > 0
};

struct SpeedLimitMap {
  std::vector<SpeedLimitRoad> roads;  // file order is the tie-break order
};

struct KinematicFeatures {
  double speed_now = 0.0;
  double speed_mean = 0.0;
  double speed_std = 0.0;
  double accel_mean = 0.0;
  double accel_std = 0.0;
  double accel_min = 0.0;
  double accel_max = 0.0;
  double speed_dev_raw = 0.0;   // mean speed - speed limit
  double speed_dev_norm = 0.0;  // (mean speed - limit) / limit
};

// One sampled frame with everything the two pipeline stages need.
// density_* and label stay unset until the density stage assigns them.
struct FrameRecord {
  std::string trip_id;
  int frame_index = 0;  // 0-based within the trip
  GeoPoint anchor;
  double odometer_m = 0.0;  // meters from clip start, non-decreasing

  SemanticStats semantic;
  std::optional<ContextualRecord> contextual;
  std::optional<KinematicFeatures> kinematics;
  std::optional<double> complexity_machine;  // [0,10]
  std::optional<double> complexity_crowd;    // [1,10], mean of 3 votes

  std::optional<double> density_raw;   // >= 0
  std::optional<double> density_norm;  // [0,10]
  std::optional<DensityLabel> label;
};

}  // namespace rcx
