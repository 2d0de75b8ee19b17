#include "rcx/geo.hpp"

#include <algorithm>

namespace rcx {

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = deg_to_rad(a.lat);
  const double lat2 = deg_to_rad(b.lat);
  const double dlat = lat2 - lat1;
  const double dlon = deg_to_rad(b.lon - a.lon);
  const double sl = std::sin(dlat / 2.0);
  const double so = std::sin(dlon / 2.0);
  const double h = sl * sl + std::cos(lat1) * std::cos(lat2) * so * so;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

PlanarPoint project(const GeoPoint& p, const GeoPoint& origin) {
  const double dlat = p.lat - origin.lat;
  const double dlon = p.lon - origin.lon;
  if (std::abs(dlat) >= 2.0 || std::abs(dlon) >= 2.0) {
    throw OutOfProjectionRange("point (" + std::to_string(p.lat) + ", " +
                               std::to_string(p.lon) +
                               ") is outside the 2-degree window around (" +
                               std::to_string(origin.lat) + ", " +
                               std::to_string(origin.lon) + ")");
  }
  return PlanarPoint{kEarthRadiusM * deg_to_rad(dlon) *
                         std::cos(deg_to_rad(origin.lat)),
                     kEarthRadiusM * deg_to_rad(dlat)};
}

GeoPoint unproject(const PlanarPoint& q, const GeoPoint& origin) {
  GeoPoint p;
  p.lat = origin.lat + rad_to_deg(q.y / kEarthRadiusM);
  p.lon = origin.lon +
          rad_to_deg(q.x / (kEarthRadiusM * std::cos(deg_to_rad(origin.lat))));
  return p;
}

double point_segment_distance(const PlanarPoint& q, const PlanarPoint& a,
                              const PlanarPoint& b) {
  const double abx = b.x - a.x;
  const double aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((q.x - a.x) * abx + (q.y - a.y) * aby) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const PlanarPoint c{a.x + t * abx, a.y + t * aby};
  return planar_distance(q, c);
}

}  // namespace rcx
