#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rcx/dataset.hpp"
#include "rcx/errors.hpp"
#include "rcx/geo.hpp"
#include "rcx/rng.hpp"
#include "rcx/schema.hpp"

using namespace rcx;

namespace {

FrameRecord make_frame(const std::string& trip, int index, double value,
                       DensityLabel label) {
  FrameRecord f;
  f.trip_id = trip;
  f.frame_index = index;
  f.label = label;
  f.semantic.total_pixels = 100;
  f.semantic.lead_total_pixels = 100;
  f.semantic.full_pixels["road"] =
      static_cast<std::int64_t>(std::lround(value * 100.0));
  return f;
}

FeatureSchema tiny_schema() {
  FeatureSchema s;
  s.add("road", FeatureGroup::semantic);
  return s;
}

FeatureFn semantic_only_fn() {
  return [](const FrameRecord& f,
            std::string_view name) -> std::optional<double> {
    if (name == "road") {
      return static_cast<double>(f.semantic.full_pixels.count("road")
                                     ? f.semantic.full_pixels.at("road")
                                     : 0) /
             static_cast<double>(f.semantic.total_pixels);
    }
    return std::nullopt;
  };
}

}  // namespace

TEST_CASE("splitmix64 reference stream") {
  // First outputs for seed 1234567 from the published splitmix64 algorithm.
  SplitMix64 rng(1234567);
  CHECK(rng.next_u64() == 6457827717110365317ull);
  CHECK(rng.next_u64() == 3203168211198807973ull);
  SplitMix64 again(1234567);
  CHECK(again.next_u64() == 6457827717110365317ull);
}

TEST_CASE("uniform doubles stay in [0,1)") {
  SplitMix64 rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal draws have roughly unit variance") {
  SplitMix64 rng(4);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("fisher-yates is a permutation and deterministic") {
  SplitMix64 rng(7);
  std::vector<int> v = shuffled_indices(100, rng);
  std::set<int> seen(v.begin(), v.end());
  CHECK(seen.size() == 100);
  SplitMix64 rng2(7);
  CHECK(shuffled_indices(100, rng2) == v);
}

TEST_CASE("haversine matches a known pair") {
  // Boston to New York, roughly 306 km.
  const GeoPoint boston{42.3601, -71.0589};
  const GeoPoint nyc{40.7128, -74.0060};
  const double d = haversine_m(boston, nyc);
  CHECK(d == doctest::Approx(306'000).epsilon(0.01));
  CHECK(haversine_m(boston, boston) == 0.0);
}

TEST_CASE("equirectangular projection basics") {
  const GeoPoint origin{42.3, -71.1};
  const auto p0 = project(origin, origin);
  CHECK(p0.x == 0.0);
  CHECK(p0.y == 0.0);
  // 0.001 degrees of latitude is ~111.19 m.
  const auto p1 = project(GeoPoint{42.301, -71.1}, origin);
  CHECK(p1.y == doctest::Approx(111.19).epsilon(1e-3));
  CHECK(std::abs(p1.x) < 1e-9);
  // Round trip.
  const GeoPoint q{42.31, -71.05};
  const GeoPoint back = unproject(project(q, origin), origin);
  CHECK(back.lat == doctest::Approx(q.lat).epsilon(1e-12));
  CHECK(back.lon == doctest::Approx(q.lon).epsilon(1e-12));
  CHECK_THROWS_AS(project(GeoPoint{45.3, -71.1}, origin),
                  OutOfProjectionRange);
  // Projection agrees with haversine to <0.1% nearby.
  const GeoPoint r{42.306, -71.093};
  const double planar = planar_distance(project(r, origin), p0);
  const double sphere = haversine_m(r, origin);
  CHECK(std::abs(planar - sphere) / sphere < 1e-3);
}

TEST_CASE("point-segment distance") {
  const PlanarPoint a{0, 0}, b{10, 0};
  CHECK(point_segment_distance({5, 3}, a, b) == doctest::Approx(3.0));
  CHECK(point_segment_distance({-4, 0}, a, b) == doctest::Approx(4.0));
  CHECK(point_segment_distance({5, 0}, a, b) == doctest::Approx(0.0));
  CHECK(point_segment_distance({1, 1}, a, a) == doctest::Approx(std::sqrt(2)));
}

TEST_CASE("schema uniqueness, counts, and round-trip") {
  FeatureSchema s;
  s.add("a", FeatureGroup::semantic);
  s.add("b", FeatureGroup::kinematic);
  s.add("c", FeatureGroup::contextual);
  CHECK_THROWS(s.add("a", FeatureGroup::semantic));
  CHECK(s.count(FeatureGroup::semantic) == 1);
  CHECK(s.index_of("b") == 1);
  CHECK(s.index_of("zzz") == -1);

  const FeatureSchema back = FeatureSchema::from_json(s.to_json());
  CHECK(back == s);
  CHECK(back.names() == s.names());
}

TEST_CASE("paper schema name blocks") {
  CHECK(paper_semantic_names().size() == 17);
  CHECK(kinematic_names().size() == 9);
}

TEST_CASE("assemble orders rows by (trip, frame)") {
  std::vector<FrameRecord> frames;
  frames.push_back(make_frame("tripB", 0, 0.3, DensityLabel::low));
  frames.push_back(make_frame("tripA", 1, 0.2, DensityLabel::medium));
  frames.push_back(make_frame("tripA", 0, 0.1, DensityLabel::high));
  const FeatureMatrix m =
      assemble_dataset(frames, tiny_schema(), semantic_only_fn());
  CHECK(m.n_rows() == 3);
  CHECK(m.schema.size() == 1);
  CHECK(m.row_trip == std::vector<std::string>{"tripA", "tripA", "tripB"});
  CHECK(m.row_frame == std::vector<int>{0, 1, 0});
  CHECK(m.rows(0, 0) == doctest::Approx(0.1));
  CHECK(m.rows(2, 0) == doctest::Approx(0.3));
}

TEST_CASE("assemble rejects missing features and labels") {
  std::vector<FrameRecord> frames = {
      make_frame("t", 0, 0.5, DensityLabel::low)};
  FeatureSchema s = tiny_schema();
  s.add("mystery", FeatureGroup::kinematic);
  CHECK_THROWS_AS(assemble_dataset(frames, s, semantic_only_fn()),
                  MissingFeature);

  frames[0].label.reset();
  CHECK_THROWS_AS(assemble_dataset(frames, tiny_schema(), semantic_only_fn()),
                  UnlabeledFrame);
}

TEST_CASE("assemble of zero frames keeps the schema") {
  const FeatureMatrix m =
      assemble_dataset({}, tiny_schema(), semantic_only_fn());
  CHECK(m.n_rows() == 0);
  CHECK(m.schema.size() == 1);
}

TEST_CASE("split: counts, determinism, reproducibility") {
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 10; ++i) {
    frames.push_back(make_frame("t", i, 0.1 * i, DensityLabel::low));
  }
  FeatureMatrix m = assemble_dataset(frames, tiny_schema(),
                                     semantic_only_fn());
  split_dataset(m, 7);
  int train = 0;
  for (const Split s : m.split) train += (s == Split::train);
  CHECK(train == 7);  // floor(0.70 * 10)

  FeatureMatrix m2 = assemble_dataset(frames, tiny_schema(),
                                      semantic_only_fn());
  split_dataset(m2, 7);
  CHECK(m.split == m2.split);

  split_dataset(m2, 8);
  CHECK(m.split != m2.split);  // different seed, different flags (10 rows)
}

TEST_CASE("split of 10407 rows gives 7284 train rows") {
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 10407; ++i) {
    frames.push_back(make_frame("t", i, 0.0, DensityLabel::low));
  }
  FeatureMatrix m = assemble_dataset(frames, tiny_schema(),
                                     semantic_only_fn());
  split_dataset(m, 1);
  int train = 0;
  for (const Split s : m.split) train += (s == Split::train);
  CHECK(train == 7284);
}

TEST_CASE("split rejects tiny matrices") {
  std::vector<FrameRecord> frames = {
      make_frame("t", 0, 0.0, DensityLabel::low)};
  FeatureMatrix m = assemble_dataset(frames, tiny_schema(),
                                     semantic_only_fn());
  CHECK_THROWS_AS(split_dataset(m, 1), TooFewRows);
}

TEST_CASE("trip-wise split keeps trips whole") {
  std::vector<FrameRecord> frames;
  for (int t = 0; t < 10; ++t) {
    for (int i = 0; i < 20; ++i) {
      frames.push_back(make_frame("trip" + std::to_string(t), i, 0.0,
                                  DensityLabel::low));
    }
  }
  FeatureMatrix m = assemble_dataset(frames, tiny_schema(),
                                     semantic_only_fn());
  split_dataset(m, 3, 0.70, true);
  std::map<std::string, std::set<Split>> per_trip;
  for (std::size_t r = 0; r < m.row_trip.size(); ++r) {
    per_trip[m.row_trip[r]].insert(m.split[r]);
  }
  for (const auto& [trip, flags] : per_trip) {
    CHECK(flags.size() == 1);  // no trip straddles the split
  }
  int train = 0;
  for (const Split s : m.split) train += (s == Split::train);
  CHECK(train >= 140);  // 7 whole trips
  CHECK(train <= 160);
}

TEST_CASE("csv export/import round-trips values at 9 digits") {
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(make_frame("t", i, 0.123456789 * (i + 1),
                                i % 2 ? DensityLabel::high
                                      : DensityLabel::medium));
  }
  FeatureMatrix m = assemble_dataset(frames, tiny_schema(),
                                     semantic_only_fn());
  split_dataset(m, 5);
  const auto path =
      std::filesystem::temp_directory_path() / "rcx_test_matrix.csv";
  write_feature_matrix_csv(m, path, "deadbeef00000000");
  const FeatureMatrix back = read_feature_matrix_csv(path, m.schema);
  REQUIRE(back.n_rows() == m.n_rows());
  for (int r = 0; r < m.n_rows(); ++r) {
    CHECK(back.rows(r, 0) ==
          doctest::Approx(m.rows(r, 0)).epsilon(1e-9));
    CHECK(back.labels[static_cast<std::size_t>(r)] ==
          m.labels[static_cast<std::size_t>(r)]);
    CHECK(back.split[static_cast<std::size_t>(r)] ==
          m.split[static_cast<std::size_t>(r)]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("split flags are stable across stages") {
  // The same (matrix, seed) must reproduce identical flags when re-split,
  // so the encoder and predictor stages share one partition.
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 200; ++i) {
    frames.push_back(make_frame("t", i, 0.01 * i, DensityLabel::low));
  }
  FeatureMatrix encoder_stage = assemble_dataset(frames, tiny_schema(),
                                                 semantic_only_fn());
  FeatureMatrix predictor_stage = encoder_stage;
  split_dataset(encoder_stage, 42);
  split_dataset(predictor_stage, 42);
  CHECK(encoder_stage.split == predictor_stage.split);
}
