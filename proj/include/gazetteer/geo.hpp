#pragma once

#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

namespace gazetteer {

inline constexpr double kEarthRadiusKm = 6371.0;

// WGS84 degrees. Throws std::invalid_argument when out of range or
// non-finite.
class GeoPoint {
 public:
  GeoPoint(double lat, double lon);

  double lat() const { return lat_; }
  double lon() const { return lon_; }

  bool operator==(const GeoPoint&) const = default;

 private:
  double lat_;
  double lon_;
};

// Default reference for distance reports: approximate centre of Sweden.
inline const GeoPoint kSwedenCentre{62.0, 15.0};

struct LinkedPlace {
  std::string entry_id;
  std::string headword;
  std::string qid;
  GeoPoint point;
  double similarity = 0.0;
};

// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct DistanceHistogram {
  GeoPoint reference = kSwedenCentre;
  double bucket_km = 500.0;
  std::map<long, std::size_t> counts;  // bucket index -> count

  std::size_t total() const;
  // "bucket_lower_km,count" rows from bucket 0 up to the last non-empty
  // bucket, empty buckets included.
  std::string to_csv() const;
};

// Throws std::invalid_argument unless bucket_km > 0.
DistanceHistogram distance_histogram(const std::vector<GeoPoint>& points,
                                     const GeoPoint& reference = kSwedenCentre,
                                     double bucket_km = 500.0);

// RFC 7946 FeatureCollection, geometry coordinates in [lon, lat] order.
nlohmann::json to_geojson(const std::vector<LinkedPlace>& places);

struct SvgPoint {
  double x = 0.0;
  double y = 0.0;
};

// Equirectangular: x = (lon+180)/360*W, y = (90-lat)/180*(W/2).
SvgPoint project(const GeoPoint& p, double width_px);

// Plain scatter map with a 30 degree graticule, circles ordered by entry_id.
std::string render_svg_map(const std::vector<LinkedPlace>& places,
                           int width_px = 1600);

}  // namespace gazetteer
