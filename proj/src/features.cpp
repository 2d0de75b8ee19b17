#include "rcx/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rcx/errors.hpp"

namespace rcx {

SamplingPlan sample_frames(const TripSeries& trip, double interval_m) {
  if (trip.samples.size() < 2) {
    throw DegenerateTrip("trip '" + trip.trip_id + "' has " +
                         std::to_string(trip.samples.size()) +
                         " samples; need at least 2");
  }
  SamplingPlan plan;
  plan.interval_m = interval_m;

  const std::size_t n = trip.samples.size();
  std::vector<double> odo(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    odo[i] = odo[i - 1] +
             haversine_m(trip.samples[i - 1].pos, trip.samples[i].pos);
  }

  std::size_t anchor = 0;
  plan.anchors.push_back({0, 0.0, 0, n});
  for (std::size_t i = 1; i < n; ++i) {
    if (odo[i] - odo[anchor] >= interval_m) {
      plan.anchors.back().sample_end = i;
      plan.anchors.push_back({static_cast<int>(plan.anchors.size()), odo[i],
                              i, n});
      anchor = i;
    }
  }
  return plan;
}

KinematicFeatures kinematics(std::span<const TelemetrySample> segment,
                             double speed_limit_mps) {
  if (segment.empty()) throw EmptySegment("kinematics over an empty segment");
  if (!(speed_limit_mps > 0.0)) {
    throw NonPositiveLimit("speed limit must be positive, got " +
                           std::to_string(speed_limit_mps));
  }
  const double n = static_cast<double>(segment.size());
  KinematicFeatures k;
  k.speed_now = segment.front().speed;
  k.accel_min = segment.front().accel_lon;
  k.accel_max = segment.front().accel_lon;
  double speed_sum = 0.0, accel_sum = 0.0;
  for (const auto& s : segment) {
    speed_sum += s.speed;
    accel_sum += s.accel_lon;
    k.accel_min = std::min(k.accel_min, s.accel_lon);
    k.accel_max = std::max(k.accel_max, s.accel_lon);
  }
  k.speed_mean = speed_sum / n;
  k.accel_mean = accel_sum / n;
  double speed_var = 0.0, accel_var = 0.0;
  for (const auto& s : segment) {
    speed_var += (s.speed - k.speed_mean) * (s.speed - k.speed_mean);
    accel_var += (s.accel_lon - k.accel_mean) * (s.accel_lon - k.accel_mean);
  }
  // Population std: segments can be a single sample.
  k.speed_std = std::sqrt(speed_var / n);
  k.accel_std = std::sqrt(accel_var / n);
  k.speed_dev_raw = k.speed_mean - speed_limit_mps;
  k.speed_dev_norm = k.speed_dev_raw / speed_limit_mps;
  return k;
}

namespace {

constexpr std::string_view kLeadPrefix = "lead_car_";
constexpr std::string_view kCountSuffix = "_count";

bool strip_prefix(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) == prefix) {
    s.remove_prefix(prefix.size());
    return true;
  }
  return false;
}

bool strip_suffix(std::string_view& s, std::string_view suffix) {
  if (s.size() >= suffix.size() &&
      s.substr(s.size() - suffix.size()) == suffix) {
    s.remove_suffix(suffix.size());
    return true;
  }
  return false;
}

double lookup_or_zero(const std::map<std::string, std::int64_t>& m,
                      std::string_view key) {
  const auto it = m.find(std::string(key));
  return it == m.end() ? 0.0 : static_cast<double>(it->second);
}

}  // namespace

double semantic_feature_value(const SemanticStats& stats,
                              std::string_view name) {
  std::string_view rest = name;
  const bool lead = strip_prefix(rest, kLeadPrefix);
  if (strip_suffix(rest, kCountSuffix)) {
    return lookup_or_zero(lead ? stats.counts_lead : stats.counts_full, rest);
  }
  const double total = static_cast<double>(
      lead ? stats.lead_total_pixels : stats.total_pixels);
  if (total <= 0.0) return 0.0;
  return lookup_or_zero(lead ? stats.lead_pixels : stats.full_pixels, rest) /
         total;
}

std::vector<std::string> candidate_semantic_names(
    const std::vector<FrameRecord>& frames) {
  std::set<std::string> full_classes, lead_classes, full_objects, lead_objects;
  for (const auto& f : frames) {
    for (const auto& [k, v] : f.semantic.full_pixels) full_classes.insert(k);
    for (const auto& [k, v] : f.semantic.lead_pixels) lead_classes.insert(k);
    for (const auto& [k, v] : f.semantic.counts_full) full_objects.insert(k);
    for (const auto& [k, v] : f.semantic.counts_lead) lead_objects.insert(k);
  }
  std::vector<std::string> names;
  for (const auto& c : full_classes) names.push_back(c);
  for (const auto& c : lead_classes) {
    names.push_back(std::string(kLeadPrefix) + c);
  }
  for (const auto& o : full_objects) {
    names.push_back(o + std::string(kCountSuffix));
  }
  for (const auto& o : lead_objects) {
    names.push_back(std::string(kLeadPrefix) + o + std::string(kCountSuffix));
  }
  return names;
}

std::vector<std::string> filter_low_variability(
    const Eigen::MatrixXd& values, const std::vector<std::string>& names,
    double zero_frac_threshold) {
  if (values.rows() == 0) {
    throw EmptyMatrix("low-variability filter needs at least one row");
  }
  if (values.cols() != static_cast<Eigen::Index>(names.size())) {
    throw Error("filter: column/name count mismatch");
  }
  std::vector<std::string> retained;
  const double n = static_cast<double>(values.rows());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const double zeros =
        static_cast<double>((values.col(c).array() == 0.0).count());
    // Dropped only when *strictly more* than the threshold fraction is zero.
    if (zeros / n <= zero_frac_threshold) {
      retained.push_back(names[static_cast<std::size_t>(c)]);
    }
  }
  return retained;
}

std::vector<std::string> semantic_schema_names(
    const std::vector<FrameRecord>& frames, SchemaMode mode,
    double zero_frac_threshold) {
  if (mode == SchemaMode::paper17) return paper_semantic_names();
  std::vector<std::string> candidates = candidate_semantic_names(frames);
  if (mode == SchemaMode::all50) return candidates;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(frames.size()),
                         static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t r = 0; r < frames.size(); ++r) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          semantic_feature_value(frames[r].semantic, candidates[c]);
    }
  }
  return filter_low_variability(values, candidates, zero_frac_threshold);
}

int ContextualEncoding::columns() const {
  int n = 0;
  for (const auto& q : questions) {
    n += q.single_column ? 1 : static_cast<int>(q.levels.size());
  }
  return n;
}

std::vector<std::string> ContextualEncoding::column_names() const {
  std::vector<std::string> names;
  for (const auto& q : questions) {
    const std::string base =
        kQuestionNames[static_cast<std::size_t>(q.question)];
    if (q.single_column) {
      names.push_back(base + "_" + q.positive_level);
    } else {
      for (const auto& level : q.levels) names.push_back(base + "_" + level);
    }
  }
  return names;
}

ContextualEncoding ContextualEncoding::paper_default() {
  ContextualEncoding enc;
  enc.questions = {
      {Question::weather, {"clear", "rain", "snow", "fog", "overcast"},
       false, ""},
      {Question::road_condition, {"dry", "wet"}, false, ""},
      {Question::traffic_condition, {"light", "heavy"}, false, ""},
      {Question::visibility, {"clear", "reduced"}, true, "reduced"},
      {Question::time_of_day, {"day", "night"}, false, ""},
      {Question::road_layout, {"straight", "curved"}, false, ""},
      {Question::road_type, {"highway", "urban", "rural"}, false, ""},
      {Question::lane_width, {"standard", "narrow"}, false, ""},
  };
  return enc;
}

Eigen::VectorXd one_hot(const ContextualRecord& rec,
                        const ContextualEncoding& enc) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(enc.columns());
  Eigen::Index col = 0;
  for (const auto& q : enc.questions) {
    const std::string& answer = rec.answer(q.question);
    const auto it = std::find(q.levels.begin(), q.levels.end(), answer);
    if (it == q.levels.end()) {
      throw UnknownLevel(
          std::string(kQuestionNames[static_cast<std::size_t>(q.question)]) +
          ": answer '" + answer + "' is not a declared level");
    }
    if (q.single_column) {
      v(col++) = (answer == q.positive_level) ? 1.0 : 0.0;
    } else {
      v(col + (it - q.levels.begin())) = 1.0;
      col += static_cast<Eigen::Index>(q.levels.size());
    }
  }
  return v;
}

ContextualRecord decode_one_hot(const Eigen::VectorXd& v,
                                const ContextualEncoding& enc) {
  if (v.size() != enc.columns()) {
    throw Error("decode: vector length does not match encoding");
  }
  ContextualRecord rec;
  Eigen::Index col = 0;
  for (const auto& q : enc.questions) {
    if (q.single_column) {
      if (v(col) != 0.0) {
        rec.answer(q.question) = q.positive_level;
      } else {
        for (const auto& level : q.levels) {
          if (level != q.positive_level) {
            rec.answer(q.question) = level;
            break;
          }
        }
      }
      ++col;
    } else {
      for (std::size_t i = 0; i < q.levels.size(); ++i) {
        if (v(col + static_cast<Eigen::Index>(i)) != 0.0) {
          rec.answer(q.question) = q.levels[i];
          break;
        }
      }
      col += static_cast<Eigen::Index>(q.levels.size());
    }
  }
  return rec;
}

void MinMaxScaler::fit(const Eigen::MatrixXd& rows,
                       const std::vector<int>& train_rows) {
  if (train_rows.empty()) throw NotFitted("no train rows to fit on");
  min_ = Eigen::VectorXd::Constant(rows.cols(),
                                   std::numeric_limits<double>::infinity());
  max_ = Eigen::VectorXd::Constant(rows.cols(),
                                   -std::numeric_limits<double>::infinity());
  for (const int r : train_rows) {
    min_ = min_.cwiseMin(rows.row(r).transpose());
    max_ = max_.cwiseMax(rows.row(r).transpose());
  }
  fitted_ = true;
}

Eigen::VectorXd MinMaxScaler::apply_row(const Eigen::VectorXd& row) const {
  if (!fitted_) throw NotFitted("min-max scaler has not been fitted");
  Eigen::VectorXd out(row.size());
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    const double range = max_(c) - min_(c);
    if (range <= 0.0) {
      out(c) = 0.0;  // constant train feature
    } else {
      out(c) = std::clamp((row(c) - min_(c)) / range, 0.0, 1.0);
    }
  }
  return out;
}

Eigen::MatrixXd MinMaxScaler::apply(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = apply_row(rows.row(r).transpose()).transpose();
  }
  return out;
}

FeatureFn make_frame_featurizer(const ContextualEncoding& enc) {
  // Precompute the contextual column layout once.
  struct ContextualColumn {
    Question question;
    std::string level;
    bool single_column;
  };
  auto columns = std::make_shared<std::map<std::string, ContextualColumn>>();
  for (const auto& q : enc.questions) {
    const std::string base =
        kQuestionNames[static_cast<std::size_t>(q.question)];
    if (q.single_column) {
      (*columns)[base + "_" + q.positive_level] = {q.question,
                                                   q.positive_level, true};
    } else {
      for (const auto& level : q.levels) {
        (*columns)[base + "_" + level] = {q.question, level, false};
      }
    }
  }
  auto encoding = std::make_shared<ContextualEncoding>(enc);

  return [columns, encoding](const FrameRecord& f,
                             std::string_view name) -> std::optional<double> {
    const std::string key(name);
    // kinematic
    const auto& kn = kinematic_names();
    for (std::size_t i = 0; i < kn.size(); ++i) {
      if (kn[i] == key) {
        if (!f.kinematics) return std::nullopt;
        const KinematicFeatures& k = *f.kinematics;
        const double vals[9] = {k.speed_now,  k.speed_mean, k.speed_std,
                                k.accel_mean, k.accel_std,  k.accel_min,
                                k.accel_max,  k.speed_dev_raw,
                                k.speed_dev_norm};
        return vals[i];
      }
    }
    // complexity index
    if (key == "complexity_machine") {
      if (!f.complexity_machine) return std::nullopt;
      return *f.complexity_machine;
    }
    if (key == "complexity_crowd") {
      if (!f.complexity_crowd) return std::nullopt;
      return *f.complexity_crowd;
    }
    // contextual
    const auto it = columns->find(key);
    if (it != columns->end()) {
      if (!f.contextual) return std::nullopt;
      const auto& col = it->second;
      const std::string& answer = f.contextual->answer(col.question);
      // Validate against the declared levels so an unknown answer surfaces.
      for (const auto& q : encoding->questions) {
        if (q.question == col.question) {
          if (std::find(q.levels.begin(), q.levels.end(), answer) ==
              q.levels.end()) {
            return std::nullopt;
          }
          break;
        }
      }
      return answer == col.level ? 1.0 : 0.0;
    }
    // semantic (open vocabulary; missing class = 0 by contract)
    return semantic_feature_value(f.semantic, key);
  };
}

FeatureSchema build_schema(const std::vector<FrameRecord>& frames,
                           SchemaMode mode, const ContextualEncoding& enc,
                           double zero_frac_threshold) {
  FeatureSchema schema;
  for (const auto& n :
       semantic_schema_names(frames, mode, zero_frac_threshold)) {
    schema.add(n, FeatureGroup::semantic);
  }
  for (const auto& n : kinematic_names()) {
    schema.add(n, FeatureGroup::kinematic);
  }
  for (const auto& n : enc.column_names()) {
    schema.add(n, FeatureGroup::contextual);
  }
  schema.add("complexity_machine", FeatureGroup::complexity_index);
  schema.add("complexity_crowd", FeatureGroup::complexity_index);
  return schema;
}

}  // namespace rcx
