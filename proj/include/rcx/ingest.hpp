#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rcx/types.hpp"

namespace rcx {

/// Trip log CSV `t,lat,lon,speed,accel_lon` (SI units). Rows must be
/// strictly increasing in t; negative speeds and out-of-range coordinates
/// are rejected. Throws MalformedRow / NonMonotonicTime.
TripSeries parse_trip_log(const std::filesystem::path& path,
                          Scenario scenario);

/// Overload inferring the scenario from the file-stem prefix before the
/// first '_' (the generator writes `<scenario>_<nnn>.csv`).
TripSeries parse_trip_log(const std::filesystem::path& path);

/// Semantic summary JSON: array of objects with `frame`, `total_pixels`,
/// optional `lead_total_pixels` (defaults to `total_pixels`), `full`,
/// `lead_car`, `counts_full`, `counts_lead`. Unknown class names are kept
/// verbatim. Throws PixelOverflow / DuplicateFrame.
std::map<int, SemanticStats> parse_semantic_summary(
    const std::filesystem::path& path);

using AnnotationRun = std::map<std::string, std::string>;  // question -> answer

/// Majority vote over exactly 3 annotation runs. Per question the answer
/// with >= 2 votes wins (agreement 2/3 or 3/3); a three-way disagreement
/// falls back to run 1's answer with agreement 1/3. Throws MissingAnswer.
ContextualRecord majority_vote(const std::array<AnnotationRun, 3>& runs);

/// Contextual runs JSON: array of {"frame": i, "runs": [run, run, run]}.
std::map<int, ContextualRecord> parse_contextual_runs(
    const std::filesystem::path& path);

struct ComplexityParseResult {
  std::map<int, ComplexityScore> scores;
  // Crowd frames whose 3 votes have std > 3 (above the pilot-observed max);
  // flagged, never fatal.
  std::vector<int> high_disagreement_frames;
};

/// Complexity CSV. Machine: `frame,score` with integer scores in [0,10].
/// Crowd: `frame,v1,v2,v3` with votes in [1,10]; value = mean of the votes.
/// Throws OutOfRange / WrongVoteCount / DuplicateFrame.
ComplexityParseResult parse_complexity(const std::filesystem::path& path,
                                       ComplexitySource source);

/// Crash records CSV `lat,lon,year`. Years outside [year_min, year_max]
/// are rejected. Throws MalformedRow / OutOfRange.
std::vector<CrashRecord> parse_crash_records(const std::filesystem::path& path,
                                             int year_min = 2018,
                                             int year_max = 2022);

/// Speed limits JSON: array of {"limit_mps": v, "points": [[lat,lon],...]}.
SpeedLimitMap parse_speed_limits(const std::filesystem::path& path);

/// Limit of the polyline nearest to p (point-to-segment distance, ties by
/// file order). Throws NoRoadWithin when the nearest road is farther than
/// `radius_m`.
double lookup_speed_limit(const SpeedLimitMap& map, const GeoPoint& p,
                          double radius_m = 100.0);

}  // namespace rcx
