#include "rcx/kde.hpp"

#include <algorithm>
#include <cmath>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"

namespace rcx {

DensityField::DensityField(std::vector<GeoPoint> points, double radius_m,
                           GeoPoint origin)
    : points_(std::move(points)), radius_(radius_m), origin_(origin) {
  if (!(radius_ > 0.0)) {
    throw Error("KDE radius must be positive, got " + fmt_g9(radius_m));
  }
  planar_.reserve(points_.size());
  for (const auto& p : points_) planar_.push_back(project(p, origin_));

  std::vector<std::pair<long long, int>> keyed;
  keyed.reserve(planar_.size());
  for (std::size_t i = 0; i < planar_.size(); ++i) {
    keyed.emplace_back(cell_key(planar_[i].x, planar_[i].y),
                       static_cast<int>(i));
  }
  std::sort(keyed.begin(), keyed.end());
  for (const auto& [key, idx] : keyed) {
    if (cells_.empty() || cells_.back().key != key) {
      cells_.push_back({key, {}});
    }
    cells_.back().point_idx.push_back(idx);
  }
}

long long DensityField::cell_key(double x, double y) const {
  const long long cx = static_cast<long long>(std::floor(x / radius_));
  const long long cy = static_cast<long long>(std::floor(y / radius_));
  return (cx << 32) + cy;  // |cy| stays far below 2^31 inside the projection
}

const std::vector<int>* DensityField::cell(long long key) const {
  const auto it = std::lower_bound(
      cells_.begin(), cells_.end(), key,
      [](const Cell& c, long long k) { return c.key < k; });
  if (it == cells_.end() || it->key != key) return nullptr;
  return &it->point_idx;
}

double DensityField::density_at(const GeoPoint& q) const {
  const PlanarPoint qp = project(q, origin_);
  const long long cx = static_cast<long long>(std::floor(qp.x / radius_));
  const long long cy = static_cast<long long>(std::floor(qp.y / radius_));
  const double r2 = radius_ * radius_;
  double sum = 0.0;
  for (long long dx = -1; dx <= 1; ++dx) {
    for (long long dy = -1; dy <= 1; ++dy) {
      const std::vector<int>* bucket =
          cell(((cx + dx) << 32) + (cy + dy));
      if (!bucket) continue;
      for (const int i : *bucket) {
        const double ddx = planar_[static_cast<std::size_t>(i)].x - qp.x;
        const double ddy = planar_[static_cast<std::size_t>(i)].y - qp.y;
        const double d2 = ddx * ddx + ddy * ddy;
        if (d2 < r2) {  // strict: a point exactly at the radius contributes 0
          const double u = 1.0 - d2 / r2;
          sum += (3.0 / kPi) * u * u;
        }
      }
    }
  }
  return sum / r2;
}

HeatmapRaster rasterize(const DensityField& field, const BoundingBox& bbox,
                        double cell_size_m) {
  if (!(cell_size_m > 0.0)) {
    throw Error("cell size must be positive");
  }
  const PlanarPoint lo = project(bbox.min, field.origin());
  const PlanarPoint hi = project(bbox.max, field.origin());
  if (!(hi.x > lo.x) || !(hi.y > lo.y)) {
    throw EmptyBBox("bounding box has no area");
  }
  HeatmapRaster raster;
  raster.cell_size_m = cell_size_m;
  raster.width = static_cast<int>(std::ceil((hi.x - lo.x) / cell_size_m));
  raster.height = static_cast<int>(std::ceil((hi.y - lo.y) / cell_size_m));
  raster.origin = unproject(
      PlanarPoint{lo.x + cell_size_m / 2.0, lo.y + cell_size_m / 2.0},
      field.origin());
  raster.values.resize(static_cast<std::size_t>(raster.width) *
                       static_cast<std::size_t>(raster.height));
  for (int row = 0; row < raster.height; ++row) {
    for (int col = 0; col < raster.width; ++col) {
      const PlanarPoint center{lo.x + (col + 0.5) * cell_size_m,
                               lo.y + (row + 0.5) * cell_size_m};
      raster.values[static_cast<std::size_t>(row * raster.width + col)] =
          field.density_at(unproject(center, field.origin()));
    }
  }
  return raster;
}

std::vector<double> normalize_density(const std::vector<double>& values) {
  if (values.empty()) {
    throw DegenerateRange("no density values to normalize");
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mx > *mn)) {
    throw DegenerateRange("all density values are equal (" + fmt_g9(*mn) +
                          "); the 0-10 scale is undefined");
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const double v : values) {
    out.push_back(10.0 * (v - *mn) / (*mx - *mn));
  }
  return out;
}

DensityLabel bin_density(double d_norm, double low_threshold,
                         double high_threshold) {
  if (!(d_norm >= 0.0 && d_norm <= 10.0)) {
    throw OutOfScale("normalized density " + fmt_g9(d_norm) +
                     " outside [0,10]");
  }
  if (d_norm < low_threshold) return DensityLabel::low;
  if (d_norm < high_threshold) return DensityLabel::medium;
  return DensityLabel::high;
}

void label_frames(std::vector<FrameRecord>& frames, const DensityField& field,
                  double low_threshold, double high_threshold) {
  std::vector<double> raw;
  raw.reserve(frames.size());
  for (const auto& f : frames) raw.push_back(field.density_at(f.anchor));
  const std::vector<double> norm = normalize_density(raw);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i].density_raw = raw[i];
    frames[i].density_norm = norm[i];
    frames[i].label = bin_density(norm[i], low_threshold, high_threshold);
  }
}

void write_pgm(const HeatmapRaster& raster, const std::filesystem::path& path,
               const std::string& config_hash) {
  auto out = open_output(path);
  double vmax = 0.0;
  for (const double v : raster.values) vmax = std::max(vmax, v);
  out << "P2\n";
  out << "# origin_lat=" << fmt_g9(raster.origin.lat)
      << " origin_lon=" << fmt_g9(raster.origin.lon)
      << " cell_size_m=" << fmt_g9(raster.cell_size_m)
      << " value_max=" << fmt_g9(vmax);
  if (!config_hash.empty()) out << " config_hash=" << config_hash;
  out << "\n";
  out << raster.width << " " << raster.height << "\n65535\n";
  // PGM rows run north to south.
  for (int row = raster.height - 1; row >= 0; --row) {
    for (int col = 0; col < raster.width; ++col) {
      const double v = raster.at(row, col);
      const int g =
          vmax > 0.0
              ? static_cast<int>(std::lround(65535.0 * v / vmax))
              : 0;
      out << g << (col + 1 == raster.width ? "" : " ");
    }
    out << "\n";
  }
}

void write_raster_csv(const HeatmapRaster& raster,
                      const std::filesystem::path& path,
                      const std::string& config_hash) {
  auto out = open_output(path);
  out << "# origin_lat=" << fmt_g9(raster.origin.lat)
      << " origin_lon=" << fmt_g9(raster.origin.lon)
      << " cell_size_m=" << fmt_g9(raster.cell_size_m);
  if (!config_hash.empty()) out << " config_hash=" << config_hash;
  out << "\n";
  out << "row,col,density\n";
  for (int row = 0; row < raster.height; ++row) {
    for (int col = 0; col < raster.width; ++col) {
      out << row << "," << col << "," << fmt_g9(raster.at(row, col)) << "\n";
    }
  }
}

void write_labeled_frames_csv(const std::vector<FrameRecord>& frames,
                              const std::filesystem::path& path,
                              const std::string& config_hash) {
  auto out = open_output(path);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "trip_id,frame_index,density_raw,density_norm,label\n";
  for (const auto& f : frames) {
    if (!f.density_raw || !f.density_norm || !f.label) {
      throw UnlabeledFrame("frame (" + f.trip_id + ", " +
                           std::to_string(f.frame_index) +
                           ") has no density label to export");
    }
    out << f.trip_id << "," << f.frame_index << "," << fmt_g9(*f.density_raw)
        << "," << fmt_g9(*f.density_norm) << "," << to_string(*f.label)
        << "\n";
  }
}

}  // namespace rcx
