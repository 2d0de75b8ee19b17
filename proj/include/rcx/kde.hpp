#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rcx/types.hpp"

namespace rcx {

// Crash-point set with its kernel radius, prepared for density queries.
// Distances are planar (local equirectangular around `origin`); a uniform
// grid with cell size = radius accelerates queries without changing them.
class DensityField {
 public:
  DensityField(std::vector<GeoPoint> points, double radius_m,
               GeoPoint origin);

  const std::vector<GeoPoint>& points() const { return points_; }
  double radius_m() const { return radius_; }
  const GeoPoint& origin() const { return origin_; }

  /// Quartic (biweight) kernel density at q:
  ///   (1/r^2) * sum_i (3/pi) * (1 - (dist_i/r)^2)^2  over dist_i < r.
  /// No points in range -> 0.
  double density_at(const GeoPoint& q) const;

 private:
  struct Cell {
    long long key;
    std::vector<int> point_idx;
  };
  long long cell_key(double x, double y) const;
  const std::vector<int>* cell(long long key) const;

  std::vector<GeoPoint> points_;
  std::vector<PlanarPoint> planar_;
  double radius_;
  GeoPoint origin_;
  std::vector<Cell> cells_;  // sorted by key
};

struct BoundingBox {
  GeoPoint min;  // south-west corner
  GeoPoint max;  // north-east corner
};

struct HeatmapRaster {
  GeoPoint origin;  // geographic position of the south-west cell center
  double cell_size_m = 0.0;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, row 0 = southernmost

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row * width + col)];
  }
};

/// Density evaluated at every cell center of a regular grid over `bbox`.
/// Throws EmptyBBox.
HeatmapRaster rasterize(const DensityField& field, const BoundingBox& bbox,
                        double cell_size_m);

/// Min-max normalization of raw densities to [0, 10], corpus-wide.
/// Throws DegenerateRange when all values are equal (or there are none).
std::vector<double> normalize_density(const std::vector<double>& values);

/// Low: [0, 0.5), Medium: [0.5, 2), High: [2, 10].
/// Throws OutOfScale outside [0, 10].
DensityLabel bin_density(double d_norm, double low_threshold = 0.5,
                         double high_threshold = 2.0);

/// Assigns density_raw (kernel density at the anchor), density_norm
/// (corpus-wide min-max to 0-10), and the binned label to every frame.
void label_frames(std::vector<FrameRecord>& frames, const DensityField& field,
                  double low_threshold = 0.5, double high_threshold = 2.0);

/// P2 (ASCII) PGM, values scaled to 0..65535 by the raster max. The header
/// comment records origin, cell size, and the scale so the export is
/// reproducible bit for bit.
void write_pgm(const HeatmapRaster& raster, const std::filesystem::path& path,
               const std::string& config_hash = "");

/// CSV grid with one header comment recording the geometry.
void write_raster_csv(const HeatmapRaster& raster,
                      const std::filesystem::path& path,
                      const std::string& config_hash = "");

/// Labeled frames CSV: trip_id,frame_index,density_raw,density_norm,label.
void write_labeled_frames_csv(const std::vector<FrameRecord>& frames,
                              const std::filesystem::path& path,
                              const std::string& config_hash = "");

}  // namespace rcx
