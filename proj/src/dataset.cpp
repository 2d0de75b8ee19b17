#include "rcx/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "rcx/csv.hpp"
#include "rcx/rng.hpp"

namespace rcx {

std::vector<int> FeatureMatrix::row_indices(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < n_rows(); ++i) {
    if (split[static_cast<std::size_t>(i)] == s) out.push_back(i);
  }
  return out;
}

Eigen::MatrixXd FeatureMatrix::columns(const std::vector<int>& cols,
                                       const std::vector<int>& row_idx) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(row_idx.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < row_idx.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows(row_idx[r], cols[c]);
    }
  }
  return out;
}

Eigen::MatrixXd FeatureMatrix::columns(const std::vector<int>& cols) const {
  std::vector<int> all(static_cast<std::size_t>(n_rows()));
  for (int i = 0; i < n_rows(); ++i) all[static_cast<std::size_t>(i)] = i;
  return columns(cols, all);
}

FeatureMatrix assemble_dataset(const std::vector<FrameRecord>& frames,
                               const FeatureSchema& schema,
                               const FeatureFn& feature_fn) {
  std::vector<const FrameRecord*> ordered;
  ordered.reserve(frames.size());
  for (const auto& f : frames) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const FrameRecord* a, const FrameRecord* b) {
              if (a->trip_id != b->trip_id) return a->trip_id < b->trip_id;
              return a->frame_index < b->frame_index;
            });

  FeatureMatrix m;
  m.schema = schema;
  m.rows.resize(static_cast<Eigen::Index>(ordered.size()), schema.size());
  m.labels.reserve(ordered.size());
  m.row_trip.reserve(ordered.size());
  m.row_frame.reserve(ordered.size());

  for (std::size_t r = 0; r < ordered.size(); ++r) {
    const FrameRecord& f = *ordered[r];
    if (!f.label) {
      throw UnlabeledFrame("frame (" + f.trip_id + ", " +
                           std::to_string(f.frame_index) + ") has no label");
    }
    for (int c = 0; c < schema.size(); ++c) {
      const auto v = feature_fn(f, schema.name(c));
      if (!v || !std::isfinite(*v)) {
        throw MissingFeature("frame (" + f.trip_id + ", " +
                             std::to_string(f.frame_index) +
                             ") cannot supply feature '" + schema.name(c) +
                             "'");
      }
      m.rows(static_cast<Eigen::Index>(r), c) = *v;
    }
    m.labels.push_back(*f.label);
    m.row_trip.push_back(f.trip_id);
    m.row_frame.push_back(f.frame_index);
  }
  return m;
}

void split_dataset(FeatureMatrix& m, std::uint64_t seed, double train_frac,
                   bool trip_wise) {
  const int n = m.n_rows();
  if (n < 2) {
    throw TooFewRows("split needs at least 2 rows, got " + std::to_string(n));
  }
  const int train_count =
      static_cast<int>(std::floor(train_frac * static_cast<double>(n)));
  SplitMix64 rng(seed);
  m.split.assign(static_cast<std::size_t>(n), Split::test);
  m.split_seed = seed;

  if (!trip_wise) {
    std::vector<int> idx = shuffled_indices(n, rng);
    for (int i = 0; i < train_count; ++i) {
      m.split[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] =
          Split::train;
    }
    return;
  }

  // Trip-wise: whole trips enter the train set in shuffled order until the
  // quota is reached. The exact 70% +-1 row guarantee does not apply here.
  std::vector<std::string> trips;
  for (const auto& t : m.row_trip) {
    if (trips.empty() || trips.back() != t) trips.push_back(t);
  }
  fisher_yates(trips, rng);
  std::vector<bool> trip_is_train;
  int assigned = 0;
  for (const auto& t : trips) {
    int size = 0;
    for (const auto& rt : m.row_trip) size += (rt == t);
    if (assigned >= train_count) break;
    for (std::size_t r = 0; r < m.row_trip.size(); ++r) {
      if (m.row_trip[r] == t) m.split[r] = Split::train;
    }
    assigned += size;
  }
}

void write_feature_matrix_csv(const FeatureMatrix& m,
                              const std::filesystem::path& path,
                              const std::string& config_hash) {
  if (!m.has_split() && m.n_rows() > 0) {
    throw Error("feature matrix has no split flags; call split_dataset first");
  }
  auto out = open_output(path);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  for (int c = 0; c < m.schema.size(); ++c) {
    out << m.schema.name(c) << ",";
  }
  out << "label,split\n";
  for (int r = 0; r < m.n_rows(); ++r) {
    for (int c = 0; c < m.schema.size(); ++c) {
      out << fmt_g9(m.rows(r, c)) << ",";
    }
    out << to_string(m.labels[static_cast<std::size_t>(r)]) << ","
        << (m.split[static_cast<std::size_t>(r)] == Split::train ? "train"
                                                                 : "test")
        << "\n";
  }
}

FeatureMatrix read_feature_matrix_csv(const std::filesystem::path& path,
                                      const FeatureSchema& schema) {
  const CsvFile csv = read_csv(path);
  const int d = schema.size();
  if (static_cast<int>(csv.header.size()) != d + 2) {
    throw MalformedRow(path.string() + ": expected " + std::to_string(d + 2) +
                       " columns, found " +
                       std::to_string(csv.header.size()));
  }
  for (int c = 0; c < d; ++c) {
    if (csv.header[static_cast<std::size_t>(c)] != schema.name(c)) {
      throw MalformedRow(path.string() + ": column " + std::to_string(c) +
                         " is '" + csv.header[static_cast<std::size_t>(c)] +
                         "', schema expects '" + schema.name(c) + "'");
    }
  }
  FeatureMatrix m;
  m.schema = schema;
  m.rows.resize(static_cast<Eigen::Index>(csv.rows.size()), d);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string ctx =
        path.string() + ":" + std::to_string(csv.line_numbers[r]);
    if (static_cast<int>(row.size()) != d + 2) {
      throw MalformedRow(ctx + ": wrong field count");
    }
    for (int c = 0; c < d; ++c) {
      m.rows(static_cast<Eigen::Index>(r), c) =
          parse_double_field(row[static_cast<std::size_t>(c)], ctx);
    }
    const auto label = label_from_string(row[static_cast<std::size_t>(d)]);
    if (!label) throw MalformedRow(ctx + ": unknown label");
    m.labels.push_back(*label);
    const auto& sp = row[static_cast<std::size_t>(d + 1)];
    if (sp == "train") {
      m.split.push_back(Split::train);
    } else if (sp == "test") {
      m.split.push_back(Split::test);
    } else {
      throw MalformedRow(ctx + ": unknown split flag '" + sp + "'");
    }
  }
  return m;
}

}  // namespace rcx
