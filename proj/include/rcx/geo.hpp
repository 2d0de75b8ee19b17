#pragma once

#include <cmath>

#include "rcx/errors.hpp"

namespace rcx {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

struct GeoPoint {
  double lat = 0.0;  // degrees WGS84, [-90, 90]
  double lon = 0.0;  // degrees WGS84, [-180, 180]

  bool valid() const {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0 &&
           std::isfinite(lat) && std::isfinite(lon);
  }
};

struct PlanarPoint {
  double x = 0.0;  // meters east of origin
  double y = 0.0;  // meters north of origin
};

/// Great-circle distance in meters (haversine, spherical Earth).
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Local equirectangular projection around `origin`:
/// x = R * dlon * cos(origin.lat), y = R * dlat (radians).
/// Valid only near the origin; throws OutOfProjectionRange when either
/// coordinate of `p` is 2 degrees or more away from the origin.
PlanarPoint project(const GeoPoint& p, const GeoPoint& origin);

/// Inverse of project().
GeoPoint unproject(const PlanarPoint& q, const GeoPoint& origin);

inline double planar_distance(const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

/// Distance from point q to segment [a, b], all in planar meters.
double point_segment_distance(const PlanarPoint& q, const PlanarPoint& a,
                              const PlanarPoint& b);

}  // namespace rcx
