#include "rcx/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"

namespace rcx {

namespace {

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRow(path.string() + ": " + e.what());
  }
  return j;
}

std::map<std::string, std::int64_t> pixel_map(const nlohmann::json& obj,
                                              const std::string& ctx) {
  std::map<std::string, std::int64_t> out;
  if (obj.is_null()) return out;
  if (!obj.is_object()) throw MalformedRow(ctx + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!it.value().is_number_integer() || it.value().get<std::int64_t>() < 0) {
      throw MalformedRow(ctx + ": count for '" + it.key() +
                         "' must be a non-negative integer");
    }
    out[it.key()] = it.value().get<std::int64_t>();
  }
  return out;
}

std::int64_t sum_counts(const std::map<std::string, std::int64_t>& m) {
  std::int64_t s = 0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

}  // namespace

TripSeries parse_trip_log(const std::filesystem::path& path,
                          Scenario scenario) {
  const CsvFile csv = read_csv(path);
  const std::vector<std::string> expected = {"t", "lat", "lon", "speed",
                                             "accel_lon"};
  if (csv.header != expected) {
    throw MalformedRow(path.string() +
                       ": header must be t,lat,lon,speed,accel_lon");
  }
  TripSeries trip;
  trip.trip_id = path.stem().string();
  trip.scenario = scenario;
  double prev_t = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string ctx =
        path.string() + ":" + std::to_string(csv.line_numbers[r]);
    if (row.size() != 5) throw MalformedRow(ctx + ": expected 5 fields");
    TelemetrySample s;
    s.t = parse_double_field(row[0], ctx);
    s.pos.lat = parse_double_field(row[1], ctx);
    s.pos.lon = parse_double_field(row[2], ctx);
    s.speed = parse_double_field(row[3], ctx);
    s.accel_lon = parse_double_field(row[4], ctx);
    if (!s.pos.valid()) throw MalformedRow(ctx + ": coordinates out of range");
    if (s.speed < 0.0 || !std::isfinite(s.speed)) {
      throw MalformedRow(ctx + ": negative speed");
    }
    if (!std::isfinite(s.t) || !std::isfinite(s.accel_lon)) {
      throw MalformedRow(ctx + ": non-finite value");
    }
    if (s.t <= prev_t) {
      throw NonMonotonicTime(ctx + ": t=" + fmt_g9(s.t) +
                             " does not increase past " + fmt_g9(prev_t));
    }
    prev_t = s.t;
    trip.samples.push_back(s);
  }
  return trip;
}

TripSeries parse_trip_log(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  const auto underscore = stem.find('_');
  const std::string prefix =
      underscore == std::string::npos ? stem : stem.substr(0, underscore);
  const auto scenario = scenario_from_string(prefix);
  if (!scenario) {
    throw MalformedRow(path.string() + ": cannot infer scenario from stem '" +
                       stem + "'");
  }
  return parse_trip_log(path, *scenario);
}

std::map<int, SemanticStats> parse_semantic_summary(
    const std::filesystem::path& path) {
  const nlohmann::json arr = load_json(path);
  if (!arr.is_array()) {
    throw MalformedRow(path.string() + ": expected a JSON array");
  }
  std::map<int, SemanticStats> out;
  for (const auto& obj : arr) {
    const int frame = obj.at("frame").get<int>();
    const std::string ctx = path.string() + " frame " + std::to_string(frame);
    if (out.count(frame)) {
      throw DuplicateFrame(ctx + ": duplicate entry");
    }
    SemanticStats s;
    s.total_pixels = obj.at("total_pixels").get<std::int64_t>();
    s.lead_total_pixels = obj.contains("lead_total_pixels")
                              ? obj.at("lead_total_pixels").get<std::int64_t>()
                              : s.total_pixels;
    if (s.total_pixels < 0 || s.lead_total_pixels < 0) {
      throw MalformedRow(ctx + ": negative pixel total");
    }
    s.full_pixels = pixel_map(obj.value("full", nlohmann::json::object()),
                              ctx + " full");
    s.lead_pixels = pixel_map(obj.value("lead_car", nlohmann::json::object()),
                              ctx + " lead_car");
    s.counts_full = pixel_map(
        obj.value("counts_full", nlohmann::json::object()), ctx + " counts");
    s.counts_lead = pixel_map(
        obj.value("counts_lead", nlohmann::json::object()), ctx + " counts");
    if (sum_counts(s.full_pixels) > s.total_pixels) {
      throw PixelOverflow(ctx + ": full-frame class pixels exceed total");
    }
    if (sum_counts(s.lead_pixels) > s.lead_total_pixels) {
      throw PixelOverflow(ctx + ": lead-car class pixels exceed region total");
    }
    out.emplace(frame, std::move(s));
  }
  return out;
}

ContextualRecord majority_vote(const std::array<AnnotationRun, 3>& runs) {
  ContextualRecord rec;
  for (int q = 0; q < kNumQuestions; ++q) {
    const std::string question = kQuestionNames[static_cast<std::size_t>(q)];
    std::array<std::string, 3> ans;
    for (int r = 0; r < 3; ++r) {
      const auto it = runs[static_cast<std::size_t>(r)].find(question);
      if (it == runs[static_cast<std::size_t>(r)].end()) {
        throw MissingAnswer("run " + std::to_string(r + 1) +
                            " has no answer for '" + question + "'");
      }
      ans[static_cast<std::size_t>(r)] = it->second;
    }
    std::string chosen;
    double agreement;
    if (ans[0] == ans[1] && ans[1] == ans[2]) {
      chosen = ans[0];
      agreement = 1.0;
    } else if (ans[0] == ans[1] || ans[0] == ans[2]) {
      chosen = ans[0];
      agreement = 2.0 / 3.0;
    } else if (ans[1] == ans[2]) {
      chosen = ans[1];
      agreement = 2.0 / 3.0;
    } else {
      // Three-way disagreement: deterministic fallback to run 1, flagged.
      chosen = ans[0];
      agreement = 1.0 / 3.0;
    }
    rec.answers[static_cast<std::size_t>(q)] = chosen;
    rec.vote_agreement[static_cast<std::size_t>(q)] = agreement;
  }
  return rec;
}

std::map<int, ContextualRecord> parse_contextual_runs(
    const std::filesystem::path& path) {
  const nlohmann::json arr = load_json(path);
  if (!arr.is_array()) {
    throw MalformedRow(path.string() + ": expected a JSON array");
  }
  std::map<int, ContextualRecord> out;
  for (const auto& obj : arr) {
    const int frame = obj.at("frame").get<int>();
    if (out.count(frame)) {
      throw DuplicateFrame(path.string() + ": duplicate frame " +
                           std::to_string(frame));
    }
    const auto& runs_json = obj.at("runs");
    if (!runs_json.is_array() || runs_json.size() != 3) {
      throw MalformedRow(path.string() + " frame " + std::to_string(frame) +
                         ": expected exactly 3 runs");
    }
    std::array<AnnotationRun, 3> runs;
    for (int r = 0; r < 3; ++r) {
      for (auto it = runs_json[static_cast<std::size_t>(r)].begin();
           it != runs_json[static_cast<std::size_t>(r)].end(); ++it) {
        runs[static_cast<std::size_t>(r)][it.key()] =
            it.value().get<std::string>();
      }
    }
    out.emplace(frame, majority_vote(runs));
  }
  return out;
}

ComplexityParseResult parse_complexity(const std::filesystem::path& path,
                                       ComplexitySource source) {
  const CsvFile csv = read_csv(path);
  ComplexityParseResult result;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string ctx =
        path.string() + ":" + std::to_string(csv.line_numbers[r]);
    if (row.empty()) throw MalformedRow(ctx + ": empty row");
    const int frame = static_cast<int>(parse_int_field(row[0], ctx));
    if (result.scores.count(frame)) {
      throw DuplicateFrame(ctx + ": duplicate frame " + std::to_string(frame));
    }
    ComplexityScore score;
    score.source = source;
    if (source == ComplexitySource::machine) {
      if (row.size() != 2) {
        throw MalformedRow(ctx + ": machine rows are frame,score");
      }
      const long long v = parse_int_field(row[1], ctx);
      if (v < 0 || v > 10) {
        throw OutOfRange(ctx + ": machine score " + std::to_string(v) +
                         " outside [0,10]");
      }
      score.value = static_cast<double>(v);
    } else {
      if (row.size() != 4) {
        throw WrongVoteCount(ctx + ": crowd rows are frame,v1,v2,v3");
      }
      double sum = 0.0;
      for (int k = 1; k <= 3; ++k) {
        const double v =
            parse_double_field(row[static_cast<std::size_t>(k)], ctx);
        if (v < 1.0 || v > 10.0) {
          throw OutOfRange(ctx + ": crowd vote " + fmt_g9(v) +
                           " outside [1,10]");
        }
        score.raw_votes.push_back(v);
        sum += v;
      }
      score.value = sum / 3.0;
      const double mean = score.value;
      double var = 0.0;
      for (const double v : score.raw_votes) var += (v - mean) * (v - mean);
      // Population std over the 3 votes; > 3 exceeds the pilot-observed max.
      if (std::sqrt(var / 3.0) > 3.0) {
        result.high_disagreement_frames.push_back(frame);
      }
    }
    result.scores.emplace(frame, std::move(score));
  }
  return result;
}

std::vector<CrashRecord> parse_crash_records(const std::filesystem::path& path,
                                             int year_min, int year_max) {
  const CsvFile csv = read_csv(path);
  const std::vector<std::string> expected = {"lat", "lon", "year"};
  if (csv.header != expected) {
    throw MalformedRow(path.string() + ": header must be lat,lon,year");
  }
  std::vector<CrashRecord> out;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string ctx =
        path.string() + ":" + std::to_string(csv.line_numbers[r]);
    if (row.size() != 3) throw MalformedRow(ctx + ": expected 3 fields");
    CrashRecord rec;
    rec.pos.lat = parse_double_field(row[0], ctx);
    rec.pos.lon = parse_double_field(row[1], ctx);
    rec.year = static_cast<int>(parse_int_field(row[2], ctx));
    if (!rec.pos.valid()) {
      throw MalformedRow(ctx + ": coordinates out of range");
    }
    if (rec.year < year_min || rec.year > year_max) {
      throw OutOfRange(ctx + ": year " + std::to_string(rec.year) +
                       " outside [" + std::to_string(year_min) + ", " +
                       std::to_string(year_max) + "]");
    }
    out.push_back(rec);
  }
  return out;
}

SpeedLimitMap parse_speed_limits(const std::filesystem::path& path) {
  const nlohmann::json arr = load_json(path);
  if (!arr.is_array()) {
    throw MalformedRow(path.string() + ": expected a JSON array");
  }
  SpeedLimitMap map;
  for (const auto& obj : arr) {
    SpeedLimitRoad road;
    road.limit_mps = obj.at("limit_mps").get<double>();
    if (!(road.limit_mps > 0.0)) {
      throw MalformedRow(path.string() + ": limit_mps must be positive");
    }
    for (const auto& pt : obj.at("points")) {
      if (!pt.is_array() || pt.size() != 2) {
        throw MalformedRow(path.string() + ": points must be [lat,lon] pairs");
      }
      GeoPoint p{pt[0].get<double>(), pt[1].get<double>()};
      if (!p.valid()) {
        throw MalformedRow(path.string() + ": coordinates out of range");
      }
      road.points.push_back(p);
    }
    if (road.points.empty()) {
      throw MalformedRow(path.string() + ": road with no points");
    }
    map.roads.push_back(std::move(road));
  }
  return map;
}

double lookup_speed_limit(const SpeedLimitMap& map, const GeoPoint& p,
                          double radius_m) {
  if (map.roads.empty()) throw Error("speed-limit map is empty");
  // Distances are evaluated in a local plane centered on the query point;
  // at the 100 m decision scale the projection error is negligible.
  const PlanarPoint q{0.0, 0.0};
  double best = std::numeric_limits<double>::infinity();
  double best_limit = 0.0;
  for (const auto& road : map.roads) {
    double road_dist = std::numeric_limits<double>::infinity();
    if (road.points.size() == 1) {
      road_dist = planar_distance(q, project(road.points[0], p));
    }
    for (std::size_t i = 0; i + 1 < road.points.size(); ++i) {
      const PlanarPoint a = project(road.points[i], p);
      const PlanarPoint b = project(road.points[i + 1], p);
      road_dist = std::min(road_dist, point_segment_distance(q, a, b));
    }
    if (road_dist < best) {  // strict: ties keep the first-listed road
      best = road_dist;
      best_limit = road.limit_mps;
    }
  }
  if (best > radius_m) {
    throw NoRoadWithin("nearest road is " + fmt_g9(best) +
                       " m away (limit " + fmt_g9(radius_m) + " m)");
  }
  return best_limit;
}

}  // namespace rcx
