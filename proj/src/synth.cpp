#include "rcx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"
#include "rcx/features.hpp"
#include "rcx/rng.hpp"

namespace rcx {

double latent_complexity(const LatentInputs& in, double semantic_weight,
                         double kinematic_weight, double contextual_weight) {
  // Dense projections: every family contributes through a weighted sum of
  // many features, so no single column carries the signal alone.
  const double u1 = 3.2 * in.car_pct + 1.6 * in.building_pct +
                    2.2 * in.sidewalk_pct + 16.0 * in.person_pct +
                    14.0 * in.traffic_light_pct + 0.85 * in.car_count / 14.0 +
                    2.6 * in.lead_car_pct + 0.35 * in.lead_car_count / 4.0 -
                    1.0 * in.vegetation_pct - 0.8 * in.terrain_pct -
                    0.45 * in.sky_pct + 0.3 * in.road_pct;

  const double u2 = 0.9 * in.speed_std / 3.0 + 1.1 * in.accel_std / 1.2 +
                    0.7 * std::min(1.0, 2.5 * std::abs(in.speed_dev_norm)) +
                    0.35 * std::min(1.0, -in.accel_min / 3.5) +
                    0.3 * std::min(1.0, in.accel_max / 2.5) -
                    0.4 * in.speed_mean / 30.0;

  const double u3 = 0.5 * in.heavy_traffic + 0.35 * in.bad_weather +
                    0.35 * in.narrow_lanes + 0.25 * in.night +
                    0.2 * in.curved + 0.35 * in.reduced_visibility;

  const double s = semantic_weight * u1;
  const double k = kinematic_weight * u2;
  const double c = contextual_weight * u3;

  const double cross = 0.8 * s + 0.7 * k + 0.5 * c - 0.9;
  const double g = 1.1 + 2.1 * s + 1.0 * s * s + 1.3 * k + 0.8 * k * k +
                   1.05 * c + 1.6 * cross * cross;
  return std::clamp(g, 0.5, 9.5);
}

SpeedLimitIndex::SpeedLimitIndex(const SpeedLimitMap& map) {
  if (map.roads.empty()) throw Error("speed-limit map is empty");
  origin_ = map.roads.front().points.front();
  for (const auto& road : map.roads) {
    Road r;
    r.limit = road.limit_mps;
    r.min_x = r.min_y = std::numeric_limits<double>::infinity();
    r.max_x = r.max_y = -std::numeric_limits<double>::infinity();
    for (const auto& p : road.points) {
      const PlanarPoint q = project(p, origin_);
      r.min_x = std::min(r.min_x, q.x);
      r.max_x = std::max(r.max_x, q.x);
      r.min_y = std::min(r.min_y, q.y);
      r.max_y = std::max(r.max_y, q.y);
      r.points.push_back(q);
    }
    roads_.push_back(std::move(r));
  }
}

double SpeedLimitIndex::lookup(const GeoPoint& p, double radius_m) const {
  const PlanarPoint q = project(p, origin_);
  double best = std::numeric_limits<double>::infinity();
  double best_limit = 0.0;
  for (const auto& road : roads_) {
    const double bbox_dist =
        std::max({road.min_x - q.x, q.x - road.max_x, road.min_y - q.y,
                  q.y - road.max_y, 0.0});
    if (bbox_dist >= best) continue;
    double d = std::numeric_limits<double>::infinity();
    if (road.points.size() == 1) d = planar_distance(q, road.points[0]);
    for (std::size_t i = 0; i + 1 < road.points.size(); ++i) {
      d = std::min(d,
                   point_segment_distance(q, road.points[i],
                                          road.points[i + 1]));
    }
    if (d < best) {
      best = d;
      best_limit = road.limit;
    }
  }
  if (best > radius_m) {
    throw NoRoadWithin("nearest road is " + fmt_g9(best) + " m away");
  }
  return best_limit;
}

namespace {

double round_g9(double v) { return std::stod(fmt_g9(v)); }

struct ScenarioProfile {
  double base_speed;   // m/s
  double speed_limit;  // m/s
  double curve_scale;  // rad/s
  double heavy_traffic_p;
  double narrow_p;
  double night_p;
  // full-frame base percentages
  double road, vegetation, sky, terrain, car, sidewalk, building;
  double traffic_light_p, traffic_light_pct;
  double person_p, person_pct;
  double car_count_mean;
  // lead-car region base percentages
  double lead_road, lead_sky, lead_vegetation;
  double lead_car_p, lead_car_pct;
  double lead_fence_p, lead_fence_pct;
  double lead_sign_p, lead_sign_pct;
  double lead_car_count_mean;
};

const ScenarioProfile& profile_for(Scenario s) {
  static const std::array<ScenarioProfile, 6> profiles = {{
      // highway
      {29.0, 29.06, 0.004, 0.35, 0.05, 0.30,
       .32, .18, .22, .08, .060, .010, .020, 0.10, .004, 0.05, .002, 5.0,
       .50, .20, .10, 0.55, .12, 0.45, .05, 0.40, .020, 2.2},
      // rural
      {17.0, 20.12, 0.012, 0.05, 0.30, 0.30,
       .25, .34, .20, .12, .015, .015, .015, 0.12, .003, 0.06, .002, 1.2,
       .48, .18, .22, 0.30, .08, 0.35, .05, 0.25, .015, 0.5},
      // urban
      {11.0, 13.41, 0.010, 0.60, 0.35, 0.30,
       .28, .07, .12, .02, .090, .090, .240, 0.85, .010, 0.75, .008, 8.0,
       .45, .10, .05, 0.75, .16, 0.10, .03, 0.35, .020, 3.2},
      // bridge
      {24.0, 24.60, 0.003, 0.30, 0.20, 0.30,
       .30, .05, .30, .03, .060, .030, .040, 0.12, .004, 0.06, .002, 4.5,
       .52, .24, .04, 0.50, .11, 0.50, .05, 0.30, .018, 1.8},
      // overpass
      {22.0, 24.60, 0.005, 0.30, 0.10, 0.30,
       .31, .10, .26, .05, .055, .020, .060, 0.15, .004, 0.05, .002, 4.0,
       .50, .22, .08, 0.45, .10, 0.30, .04, 0.30, .018, 1.6},
      // hotspot
      {13.0, 15.65, 0.010, 0.70, 0.45, 0.35,
       .27, .06, .13, .02, .100, .080, .200, 0.70, .009, 0.60, .007, 9.5,
       .44, .10, .05, 0.80, .18, 0.12, .03, 0.35, .022, 3.6},
  }};
  return profiles[static_cast<std::size_t>(s)];
}

std::vector<Scenario> allocate_scenarios(const WorldConfig& cfg) {
  double mix_sum = 0.0;
  for (const double m : cfg.scenario_mix) mix_sum += m;
  if (std::abs(mix_sum - 1.0) > 1e-9) {
    throw InvalidConfig("scenario mix must sum to 1, got " + fmt_g9(mix_sum));
  }
  std::array<int, 6> counts{};
  std::array<double, 6> fractional{};
  int assigned = 0;
  for (int s = 0; s < 6; ++s) {
    const double exact =
        cfg.scenario_mix[static_cast<std::size_t>(s)] * cfg.n_trips;
    counts[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(exact));
    fractional[static_cast<std::size_t>(s)] =
        exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(s)];
  }
  while (assigned < cfg.n_trips) {  // largest remainder, ties by index
    int best = 0;
    for (int s = 1; s < 6; ++s) {
      if (fractional[static_cast<std::size_t>(s)] >
          fractional[static_cast<std::size_t>(best)]) {
        best = s;
      }
    }
    counts[static_cast<std::size_t>(best)] += 1;
    fractional[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  std::vector<Scenario> out;
  for (int s = 0; s < 6; ++s) {
    for (int i = 0; i < counts[static_cast<std::size_t>(s)]; ++i) {
      out.push_back(static_cast<Scenario>(s));
    }
  }
  return out;
}

int poisson_draw(double lambda, SplitMix64& rng) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.next_double();
  } while (p > limit);
  return k - 1;
}

std::string trip_name(Scenario s, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", index);
  return std::string(to_string(s)) + "_" + buf;
}

TripSeries make_trip(const WorldConfig& cfg, Scenario scenario,
                     const std::string& trip_id, int target_frames,
                     SplitMix64& rng) {
  const ScenarioProfile& prof = profile_for(scenario);
  TripSeries trip;
  trip.trip_id = trip_id;
  trip.scenario = scenario;

  // Start anywhere in a ~56 km box around the region origin.
  const double x0 = (rng.next_double() * 2.0 - 1.0) * 28'000.0;
  const double y0 = (rng.next_double() * 2.0 - 1.0) * 28'000.0;
  double heading = rng.next_double() * 2.0 * kPi;
  const double phase = rng.next_double() * 2.0 * kPi;

  // Anchor gaps overshoot the 20 m interval by about half a sample's
  // travel, so budget that into the path length.
  const double dt = 0.1;
  const double target_len =
      (20.0 + 0.55 * prof.base_speed * dt) * (target_frames - 1) + 14.0;
  double x = x0, y = y0, v = prof.base_speed, dist = 0.0, t = 0.0;
  double curvature = 0.0;
  int step = 0;
  while (dist < target_len) {
    if (step % 80 == 0) {  // new curvature segment every 8 seconds
      curvature = rng.next_normal() * prof.curve_scale;
    }
    const double target_speed =
        prof.base_speed *
        (1.0 + 0.22 * std::sin(2.0 * kPi * t / 45.0 + phase)) +
        cfg.kinematic_noise * rng.next_normal();
    const double accel = std::clamp(1.2 * (target_speed - v), -3.5, 2.5);

    TelemetrySample s;
    s.t = round_g9(t);
    s.pos = unproject(PlanarPoint{x, y}, cfg.region_origin);
    s.pos.lat = round_g9(s.pos.lat);
    s.pos.lon = round_g9(s.pos.lon);
    s.speed = round_g9(std::max(v, 0.3));
    s.accel_lon = round_g9(accel);
    trip.samples.push_back(s);

    v = std::max(v + accel * dt, 0.3);
    heading += curvature * dt;
    x += v * dt * std::sin(heading);
    y += v * dt * std::cos(heading);
    dist += v * dt;
    t += dt;
    ++step;
  }
  return trip;
}

struct QuestionLevels {
  std::vector<std::string> levels;
};

const std::array<QuestionLevels, kNumQuestions>& question_levels() {
  static const std::array<QuestionLevels, kNumQuestions> levels = {{
      {{"clear", "rain", "snow", "fog", "overcast"}},
      {{"dry", "wet"}},
      {{"light", "heavy"}},
      {{"clear", "reduced"}},
      {{"day", "night"}},
      {{"straight", "curved"}},
      {{"highway", "urban", "rural"}},
      {{"standard", "narrow"}},
  }};
  return levels;
}

// The 33 candidate features planted >90% zero at the default config.
const std::vector<std::string>& dead_feature_names() {
  static const std::vector<std::string> names = {
      // full-frame percentage classes (11)
      "wall", "fence", "pole", "traffic_sign", "rider", "truck", "bus",
      "train", "motorcycle", "bicycle", "ground",
      // lead-car percentage classes (14)
      "lead_car_sidewalk", "lead_car_building", "lead_car_wall",
      "lead_car_pole", "lead_car_traffic_light", "lead_car_terrain",
      "lead_car_person", "lead_car_rider", "lead_car_truck", "lead_car_bus",
      "lead_car_train", "lead_car_motorcycle", "lead_car_bicycle",
      "lead_car_ground",
      // instance counts (4 + 4)
      "pedestrian_count", "bus_count", "bicycle_count", "motorcycle_count",
      "lead_car_pedestrian_count", "lead_car_bus_count",
      "lead_car_bicycle_count", "lead_car_motorcycle_count"};
  return names;
}

constexpr std::int64_t kTotalPixels = 1'920'000;      // 1600 x 1200
constexpr std::int64_t kLeadTotalPixels = 76'800;     // 320 x 240

struct FrameTruth {
  SemanticStats semantic;
  std::array<std::string, kNumQuestions> truth_answers;
  ContextualRecord majority;
  std::array<AnnotationRun, 3> runs;
};

double wobble(double base, double phase, int frame, SplitMix64& rng) {
  const double v = base * (1.0 + 0.35 * std::sin(phase + 0.13 * frame) +
                           0.30 * rng.next_normal());
  return std::max(v, 0.0);
}

void set_pct(SemanticStats& s, bool lead, const std::string& cls,
             double pct) {
  const std::int64_t total = lead ? kLeadTotalPixels : kTotalPixels;
  const auto px = static_cast<std::int64_t>(
      std::llround(std::clamp(pct, 0.0, 0.95) * static_cast<double>(total)));
  if (px <= 0) return;
  (lead ? s.lead_pixels : s.full_pixels)[cls] = px;
}

FrameTruth make_frame_truth(const WorldConfig& cfg, Scenario scenario,
                            const ScenarioProfile& prof, int frame,
                            double trip_phase,
                            const std::array<std::string, 3>& trip_weather,
                            bool trip_night, bool segment_curved,
                            SplitMix64& rng) {
  FrameTruth ft;
  SemanticStats& sem = ft.semantic;
  sem.total_pixels = kTotalPixels;
  sem.lead_total_pixels = kLeadTotalPixels;

  set_pct(sem, false, "road", wobble(prof.road, trip_phase, frame, rng));
  set_pct(sem, false, "vegetation",
          wobble(prof.vegetation, trip_phase + 1.1, frame, rng));
  set_pct(sem, false, "sky", wobble(prof.sky, trip_phase + 2.3, frame, rng));
  set_pct(sem, false, "terrain",
          wobble(prof.terrain, trip_phase + 3.1, frame, rng));
  set_pct(sem, false, "car", wobble(prof.car, trip_phase + 4.2, frame, rng));
  set_pct(sem, false, "sidewalk",
          wobble(prof.sidewalk, trip_phase + 5.0, frame, rng));
  set_pct(sem, false, "building",
          wobble(prof.building, trip_phase + 0.7, frame, rng));
  if (rng.next_double() < prof.traffic_light_p) {
    set_pct(sem, false, "traffic_light",
            prof.traffic_light_pct * (0.5 + rng.next_double()));
  }
  if (rng.next_double() < prof.person_p) {
    set_pct(sem, false, "person",
            prof.person_pct * (0.5 + rng.next_double()));
  }
  const double cc = wobble(prof.car_count_mean, trip_phase + 2.9, frame, rng);
  sem.counts_full["car"] = static_cast<std::int64_t>(std::llround(cc));

  set_pct(sem, true, "road", wobble(prof.lead_road, trip_phase, frame, rng));
  set_pct(sem, true, "sky",
          wobble(prof.lead_sky, trip_phase + 1.9, frame, rng));
  set_pct(sem, true, "vegetation",
          wobble(prof.lead_vegetation, trip_phase + 2.7, frame, rng));
  if (rng.next_double() < prof.lead_car_p) {
    set_pct(sem, true, "car", prof.lead_car_pct * (0.5 + rng.next_double()));
  }
  if (rng.next_double() < prof.lead_fence_p) {
    set_pct(sem, true, "fence",
            prof.lead_fence_pct * (0.5 + rng.next_double()));
  }
  if (rng.next_double() < prof.lead_sign_p) {
    set_pct(sem, true, "traffic_sign",
            prof.lead_sign_pct * (0.5 + rng.next_double()));
  }
  const double lcc =
      wobble(prof.lead_car_count_mean, trip_phase + 4.4, frame, rng);
  sem.counts_lead["car"] = static_cast<std::int64_t>(std::llround(lcc));

  // Seed every count key so the candidate vocabulary is complete.
  for (const char* obj : {"pedestrian", "bus", "bicycle", "motorcycle"}) {
    sem.counts_full.emplace(obj, 0);
    sem.counts_lead.emplace(obj, 0);
  }

  // Dead features: the first n_dead stay >90% zero, the rest are revived
  // with a live nonzero rate.
  const auto& dead = dead_feature_names();
  for (std::size_t i = 0; i < dead.size(); ++i) {
    const bool is_dead = static_cast<int>(i) < cfg.n_dead_semantic;
    const double nonzero_p = is_dead ? 0.03 : 0.35;
    if (rng.next_double() >= nonzero_p) continue;
    const std::string& name = dead[i];
    std::string_view rest = name;
    const bool lead = rest.substr(0, 9) == "lead_car_";
    if (lead) rest.remove_prefix(9);
    if (rest.size() > 6 && rest.substr(rest.size() - 6) == "_count") {
      const std::string obj(rest.substr(0, rest.size() - 6));
      (lead ? sem.counts_lead : sem.counts_full)[obj] =
          1 + static_cast<std::int64_t>(rng.next_below(3));
    } else {
      set_pct(sem, lead, std::string(rest),
              0.002 + 0.006 * rng.next_double());
    }
  }

  // Keep each region's class-pixel sum within its total.
  for (const bool lead : {false, true}) {
    auto& pixels = lead ? sem.lead_pixels : sem.full_pixels;
    const std::int64_t total = lead ? kLeadTotalPixels : kTotalPixels;
    std::int64_t used = 0;
    for (const auto& [cls, px] : pixels) used += px;
    if (used > total) {
      const double scale =
          0.97 * static_cast<double>(total) / static_cast<double>(used);
      for (auto& [cls, px] : pixels) {
        px = static_cast<std::int64_t>(
            std::floor(static_cast<double>(px) * scale));
      }
    }
  }

  // Ground-truth contextual answers.
  auto& ans = ft.truth_answers;
  ans[0] = trip_weather[0];
  const bool wet_weather = ans[0] == "rain" || ans[0] == "snow";
  ans[1] = wet_weather ? (rng.next_double() < 0.9 ? "wet" : "dry")
                       : (rng.next_double() < 0.95 ? "dry" : "wet");
  ans[2] = rng.next_double() < prof.heavy_traffic_p ? "heavy" : "light";
  const bool foggy = ans[0] == "fog";
  const bool snowing = ans[0] == "snow";
  ans[3] = (foggy || (snowing && rng.next_double() < 0.6) ||
            (trip_night && wet_weather && rng.next_double() < 0.5))
               ? "reduced"
               : "clear";
  ans[4] = trip_night ? "night" : "day";
  ans[5] = segment_curved ? "curved" : "straight";
  switch (scenario) {
    case Scenario::highway:
    case Scenario::bridge:
    case Scenario::overpass:
      ans[6] = "highway";
      break;
    case Scenario::rural:
      ans[6] = "rural";
      break;
    default:
      ans[6] = "urban";
  }
  ans[7] = rng.next_double() < prof.narrow_p ? "narrow" : "standard";

  // Three annotation runs: run 1 is the truth; runs 2 and 3 flip to a
  // random other level with a small probability.
  const auto& levels = question_levels();
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < kNumQuestions; ++q) {
      std::string a = ans[static_cast<std::size_t>(q)];
      if (r > 0 && rng.next_double() < 0.08) {
        const auto& ls = levels[static_cast<std::size_t>(q)].levels;
        std::string other;
        do {
          other = ls[static_cast<std::size_t>(rng.next_below(ls.size()))];
        } while (other == a && ls.size() > 1);
        a = other;
      }
      ft.runs[static_cast<std::size_t>(r)]
             [kQuestionNames[static_cast<std::size_t>(q)]] = a;
    }
  }
  ft.majority = majority_vote(ft.runs);
  return ft;
}

}  // namespace

GeneratedWorld generate_world(const WorldConfig& cfg,
                              const std::filesystem::path& dir,
                              const std::string& config_hash) {
  if (cfg.n_trips < 1 || cfg.frames_target < cfg.n_trips) {
    throw InvalidConfig("need at least one trip and one frame per trip");
  }
  if (cfg.complexity_noise < 0.0) {
    throw InvalidConfig("complexity noise must be >= 0");
  }
  if (cfg.n_dead_semantic < 0 ||
      cfg.n_dead_semantic > static_cast<int>(dead_feature_names().size())) {
    throw InvalidConfig("n_dead_semantic must be in [0, 33]");
  }

  std::filesystem::create_directories(dir / "trips");
  std::filesystem::create_directories(dir / "semantic");
  std::filesystem::create_directories(dir / "contextual");
  std::filesystem::create_directories(dir / "complexity_machine");
  std::filesystem::create_directories(dir / "complexity_crowd");

  GeneratedWorld world;
  const std::vector<Scenario> scenarios = allocate_scenarios(cfg);

  // Frame quota per trip (largest remainder on the uniform share).
  const int base_frames = cfg.frames_target / cfg.n_trips;
  const int extra = cfg.frames_target - base_frames * cfg.n_trips;

  // Trips and speed limits first: kinematics need the complete road map.
  std::array<int, 6> scenario_counter{};
  SplitMix64 trip_rng(cfg.seed);
  for (int i = 0; i < cfg.n_trips; ++i) {
    const Scenario sc = scenarios[static_cast<std::size_t>(i)];
    const int idx = scenario_counter[static_cast<std::size_t>(sc)]++;
    const int frames = base_frames + (i < extra ? 1 : 0);
    world.trips.push_back(
        make_trip(cfg, sc, trip_name(sc, idx), frames, trip_rng));
  }
  std::sort(world.trips.begin(), world.trips.end(),
            [](const TripSeries& a, const TripSeries& b) {
              return a.trip_id < b.trip_id;
            });

  for (const auto& trip : world.trips) {
    SpeedLimitRoad road;
    road.limit_mps = profile_for(trip.scenario).speed_limit;
    for (std::size_t i = 0; i < trip.samples.size(); i += 10) {
      road.points.push_back(trip.samples[i].pos);
    }
    if ((trip.samples.size() - 1) % 10 != 0) {
      road.points.push_back(trip.samples.back().pos);
    }
    world.speed_limits.roads.push_back(std::move(road));
  }
  const SpeedLimitIndex limit_index(world.speed_limits);

  // Frames: sampling plan, semantic/contextual truth, latent complexity.
  nlohmann::json manifest_frames = nlohmann::json::array();
  SplitMix64 frame_rng(cfg.seed + 1);
  SplitMix64 noise_rng(cfg.seed + 2);

  const double sigma = cfg.complexity_noise;
  // Machine scores quantize to integers; shrink the Gaussian component so
  // the total dispersion stays ~= sigma. Crowd votes split the budget
  // between shared bias and per-vote jitter.
  const double machine_sigma =
      std::sqrt(std::max(sigma * sigma - 1.0 / 12.0, 0.0));
  const double vote_jitter = std::min(0.8, 1.6 * sigma);
  const double crowd_bias = std::sqrt(
      std::max(sigma * sigma - vote_jitter * vote_jitter / 3.0, 0.0));

  for (const auto& trip : world.trips) {
    const ScenarioProfile& prof = profile_for(trip.scenario);
    const SamplingPlan plan = sample_frames(trip, 20.0);
    const double trip_phase = frame_rng.next_double() * 2.0 * kPi;
    const bool trip_night = frame_rng.next_double() < prof.night_p;
    std::array<std::string, 3> trip_weather;
    {
      const double w = frame_rng.next_double();
      trip_weather[0] = w < 0.58   ? "clear"
                        : w < 0.76 ? "overcast"
                        : w < 0.91 ? "rain"
                        : w < 0.96 ? "snow"
                                   : "fog";
    }

    for (const auto& anchor : plan.anchors) {
      FrameRecord frame;
      frame.trip_id = trip.trip_id;
      frame.frame_index = anchor.frame_index;
      frame.anchor = trip.samples[anchor.sample_begin].pos;
      frame.odometer_m = anchor.odometer_m;

      const std::span<const TelemetrySample> segment(
          trip.samples.data() + anchor.sample_begin,
          anchor.sample_end - anchor.sample_begin);
      const double limit = limit_index.lookup(frame.anchor);
      frame.kinematics = kinematics(segment, limit);

      // A segment is "curved" when its heading turns by more than ~9 deg.
      double turn = 0.0;
      if (segment.size() >= 3) {
        const PlanarPoint a = project(segment.front().pos, cfg.region_origin);
        const PlanarPoint m =
            project(segment[segment.size() / 2].pos, cfg.region_origin);
        const PlanarPoint b = project(segment.back().pos, cfg.region_origin);
        const double h1 = std::atan2(m.x - a.x, m.y - a.y);
        const double h2 = std::atan2(b.x - m.x, b.y - m.y);
        turn = std::abs(std::remainder(h2 - h1, 2.0 * kPi));
      }
      FrameTruth truth = make_frame_truth(
          cfg, trip.scenario, prof, anchor.frame_index, trip_phase,
          trip_weather, trip_night, turn > 0.16, frame_rng);
      frame.semantic = std::move(truth.semantic);
      frame.contextual = truth.majority;

      LatentInputs li;
      li.road_pct = semantic_feature_value(frame.semantic, "road");
      li.car_pct = semantic_feature_value(frame.semantic, "car");
      li.building_pct = semantic_feature_value(frame.semantic, "building");
      li.sidewalk_pct = semantic_feature_value(frame.semantic, "sidewalk");
      li.person_pct = semantic_feature_value(frame.semantic, "person");
      li.traffic_light_pct =
          semantic_feature_value(frame.semantic, "traffic_light");
      li.vegetation_pct =
          semantic_feature_value(frame.semantic, "vegetation");
      li.terrain_pct = semantic_feature_value(frame.semantic, "terrain");
      li.sky_pct = semantic_feature_value(frame.semantic, "sky");
      li.lead_car_pct = semantic_feature_value(frame.semantic, "lead_car_car");
      li.car_count = semantic_feature_value(frame.semantic, "car_count");
      li.lead_car_count =
          semantic_feature_value(frame.semantic, "lead_car_car_count");
      li.speed_mean = frame.kinematics->speed_mean;
      li.speed_std = frame.kinematics->speed_std;
      li.accel_std = frame.kinematics->accel_std;
      li.accel_min = frame.kinematics->accel_min;
      li.accel_max = frame.kinematics->accel_max;
      li.speed_dev_norm = frame.kinematics->speed_dev_norm;
      const ContextualRecord& maj = *frame.contextual;
      li.heavy_traffic = maj.answer(Question::traffic_condition) == "heavy";
      li.bad_weather = maj.answer(Question::weather) != "clear";
      li.narrow_lanes = maj.answer(Question::lane_width) == "narrow";
      li.night = maj.answer(Question::time_of_day) == "night";
      li.curved = maj.answer(Question::road_layout) == "curved";
      li.reduced_visibility = maj.answer(Question::visibility) == "reduced";

      const double g =
          latent_complexity(li, cfg.semantic_weight, cfg.kinematic_weight,
                            cfg.contextual_weight);
      world.latent_g.push_back(g);

      const double machine_raw =
          std::clamp(g + machine_sigma * noise_rng.next_normal(), 0.0, 10.0);
      frame.complexity_machine = std::round(machine_raw);

      const double bias = crowd_bias * noise_rng.next_normal();
      double vote_sum = 0.0;
      std::array<double, 3> votes;
      for (int k = 0; k < 3; ++k) {
        const double vote = round_g9(std::clamp(
            g + bias + vote_jitter * noise_rng.next_normal(), 1.0, 10.0));
        votes[static_cast<std::size_t>(k)] = vote;
        vote_sum += vote;
      }
      frame.complexity_crowd = vote_sum / 3.0;

      manifest_frames.push_back(
          {{"trip_id", frame.trip_id},
           {"frame_index", frame.frame_index},
           {"g", g},
           {"machine", *frame.complexity_machine},
           {"crowd_votes", votes}});
      world.frames.push_back(std::move(frame));

      // Stash the runs for the contextual file writer below.
      static_cast<void>(truth.runs);
      manifest_frames.back()["runs"] = nlohmann::json::array();
      for (const auto& run : truth.runs) {
        manifest_frames.back()["runs"].push_back(run);
      }
    }
  }

  // Crash points: complexity-driven placement along the paths, plus the
  // automatic hotspot clusters and any configured ones.
  SplitMix64 crash_rng(cfg.seed + 3);
  const int year_span = cfg.crash_year_max - cfg.crash_year_min + 1;
  for (std::size_t i = 0; i < world.frames.size(); ++i) {
    const double g = world.latent_g[i];
    // Smoothstep in complexity: quiet below g=3, saturating above g=7 so
    // the densest stretches stay within a few multiples of the bulk.
    const double u = std::clamp((g - 3.0) / 4.0, 0.0, 1.0);
    const double lambda =
        cfg.crash_rate_scale * (0.035 + 0.95 * u * u * (3.0 - 2.0 * u));
    const int n = poisson_draw(lambda, crash_rng);
    const PlanarPoint center =
        project(world.frames[i].anchor, cfg.region_origin);
    for (int k = 0; k < n; ++k) {
      const PlanarPoint p{center.x + 220.0 * crash_rng.next_normal(),
                          center.y + 220.0 * crash_rng.next_normal()};
      CrashRecord rec;
      rec.pos = unproject(p, cfg.region_origin);
      rec.pos.lat = round_g9(rec.pos.lat);
      rec.pos.lon = round_g9(rec.pos.lon);
      rec.year = cfg.crash_year_min +
                 static_cast<int>(crash_rng.next_below(
                     static_cast<std::uint64_t>(year_span)));
      world.crashes.push_back(rec);
    }
  }
  std::vector<CrashClusterSpec> clusters = cfg.clusters;
  if (cfg.hotspot_clusters) {
    for (const auto& trip : world.trips) {
      if (trip.scenario != Scenario::hotspot) continue;
      CrashClusterSpec c;
      c.center = trip.samples[trip.samples.size() / 2].pos;
      c.count = static_cast<int>(std::lround(25.0 * cfg.crash_rate_scale));
      c.spread_m = 450.0;
      clusters.push_back(c);
    }
  }
  for (const auto& cluster : clusters) {
    const PlanarPoint center = project(cluster.center, cfg.region_origin);
    for (int k = 0; k < cluster.count; ++k) {
      const PlanarPoint p{
          center.x + cluster.spread_m * crash_rng.next_normal(),
          center.y + cluster.spread_m * crash_rng.next_normal()};
      CrashRecord rec;
      rec.pos = unproject(p, cfg.region_origin);
      rec.pos.lat = round_g9(rec.pos.lat);
      rec.pos.lon = round_g9(rec.pos.lon);
      rec.year = cfg.crash_year_min +
                 static_cast<int>(crash_rng.next_below(
                     static_cast<std::uint64_t>(year_span)));
      world.crashes.push_back(rec);
    }
  }

  // ---- file output ----
  for (const auto& trip : world.trips) {
    auto out = open_output(dir / "trips" / (trip.trip_id + ".csv"));
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "t,lat,lon,speed,accel_lon\n";
    for (const auto& s : trip.samples) {
      out << fmt_g9(s.t) << "," << fmt_g9(s.pos.lat) << ","
          << fmt_g9(s.pos.lon) << "," << fmt_g9(s.speed) << ","
          << fmt_g9(s.accel_lon) << "\n";
    }
  }

  // Per-trip annotation files, driven from the frame records.
  std::size_t frame_cursor = 0;
  for (const auto& trip : world.trips) {
    nlohmann::json semantic = nlohmann::json::array();
    nlohmann::json contextual = nlohmann::json::array();
    auto machine =
        open_output(dir / "complexity_machine" / (trip.trip_id + ".csv"));
    auto crowd =
        open_output(dir / "complexity_crowd" / (trip.trip_id + ".csv"));
    machine << "frame,score\n";
    crowd << "frame,v1,v2,v3\n";
    while (frame_cursor < world.frames.size() &&
           world.frames[frame_cursor].trip_id == trip.trip_id) {
      const FrameRecord& f = world.frames[frame_cursor];
      const auto& mf = manifest_frames[frame_cursor];

      nlohmann::json sem;
      sem["frame"] = f.frame_index;
      sem["total_pixels"] = f.semantic.total_pixels;
      sem["lead_total_pixels"] = f.semantic.lead_total_pixels;
      sem["full"] = f.semantic.full_pixels;
      sem["lead_car"] = f.semantic.lead_pixels;
      sem["counts_full"] = f.semantic.counts_full;
      sem["counts_lead"] = f.semantic.counts_lead;
      semantic.push_back(std::move(sem));

      contextual.push_back(
          {{"frame", f.frame_index}, {"runs", mf.at("runs")}});

      machine << f.frame_index << ","
              << static_cast<int>(*f.complexity_machine) << "\n";
      crowd << f.frame_index;
      for (const auto& v : mf.at("crowd_votes")) {
        crowd << "," << fmt_g9(v.get<double>());
      }
      crowd << "\n";
      ++frame_cursor;
    }
    auto sem_out = open_output(dir / "semantic" / (trip.trip_id + ".json"));
    sem_out << semantic.dump() << "\n";
    auto ctx_out =
        open_output(dir / "contextual" / (trip.trip_id + ".json"));
    ctx_out << contextual.dump() << "\n";
  }

  {
    auto out = open_output(dir / "crashes.csv");
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "lat,lon,year\n";
    for (const auto& c : world.crashes) {
      out << fmt_g9(c.pos.lat) << "," << fmt_g9(c.pos.lon) << "," << c.year
          << "\n";
    }
  }
  {
    nlohmann::json roads = nlohmann::json::array();
    for (const auto& road : world.speed_limits.roads) {
      nlohmann::json points = nlohmann::json::array();
      for (const auto& p : road.points) {
        points.push_back({p.lat, p.lon});
      }
      roads.push_back(
          {{"limit_mps", road.limit_mps}, {"points", std::move(points)}});
    }
    auto out = open_output(dir / "speed_limits.json");
    out << roads.dump() << "\n";
  }
  {
    // Drop the bulky runs from the manifest copy; the files carry them.
    for (auto& mf : manifest_frames) mf.erase("runs");
    nlohmann::json manifest;
    if (!config_hash.empty()) manifest["config_hash"] = config_hash;
    manifest["seed"] = cfg.seed;
    manifest["n_trips"] = cfg.n_trips;
    manifest["frames_target"] = cfg.frames_target;
    manifest["scenario_mix"] = cfg.scenario_mix;
    manifest["complexity_noise"] = cfg.complexity_noise;
    manifest["weights"] = {{"semantic", cfg.semantic_weight},
                           {"kinematic", cfg.kinematic_weight},
                           {"contextual", cfg.contextual_weight}};
    manifest["n_dead_semantic"] = cfg.n_dead_semantic;
    manifest["crash_rate_scale"] = cfg.crash_rate_scale;
    manifest["n_crashes"] = world.crashes.size();
    manifest["n_frames"] = world.frames.size();
    manifest["trips"] = nlohmann::json::array();
    for (const auto& trip : world.trips) {
      manifest["trips"].push_back(
          {{"trip_id", trip.trip_id},
           {"scenario", to_string(trip.scenario)},
           {"samples", trip.samples.size()}});
    }
    manifest["frames"] = std::move(manifest_frames);
    auto out = open_output(dir / "manifest.json");
    out << manifest.dump() << "\n";
  }
  return world;
}

}  // namespace rcx
