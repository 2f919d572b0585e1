#include "gazetteer/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gazetteer {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000".
  if (std::string_view(buf) == "-0.000") return "0.000";
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 ||
      lat > 90.0 || lon < -180.0 || lon > 180.0) {
    throw std::invalid_argument("coordinate out of range: (" +
                                std::to_string(lat) + ", " +
                                std::to_string(lon) + ")");
  }
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = radians(a.lat());
  const double phi2 = radians(b.lat());
  const double dphi = radians(b.lat() - a.lat());
  const double dlambda = radians(b.lon() - a.lon());
  const double s1 = std::sin(dphi / 2);
  const double s2 = std::sin(dlambda / 2);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

std::size_t DistanceHistogram::total() const {
  std::size_t n = 0;
  for (const auto& [bucket, count] : counts) n += count;
  return n;
}

std::string DistanceHistogram::to_csv() const {
  std::string out = "bucket_lower_km,count\n";
  if (counts.empty()) return out;
  const long last = counts.rbegin()->first;
  for (long b = 0; b <= last; ++b) {
    auto it = counts.find(b);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g,%zu\n", static_cast<double>(b) * bucket_km,
                  it == counts.end() ? std::size_t{0} : it->second);
    out += buf;
  }
  return out;
}

DistanceHistogram distance_histogram(const std::vector<GeoPoint>& points,
                                     const GeoPoint& reference,
                                     double bucket_km) {
  if (!(bucket_km > 0.0) || !std::isfinite(bucket_km)) {
    throw std::invalid_argument("bucket width must be positive");
  }
  DistanceHistogram h{reference, bucket_km, {}};
  for (const GeoPoint& p : points) {
    const auto bucket =
        static_cast<long>(std::floor(haversine_km(reference, p) / bucket_km));
    ++h.counts[bucket];
  }
  return h;
}

nlohmann::json to_geojson(const std::vector<LinkedPlace>& places) {
  nlohmann::json features = nlohmann::json::array();
  for (const LinkedPlace& p : places) {
    features.push_back(
        {{"type", "Feature"},
         {"geometry",
          {{"type", "Point"},
           {"coordinates", {p.point.lon(), p.point.lat()}}}},
         {"properties",
          {{"entry_id", p.entry_id},
           {"headword", p.headword},
           {"qid", p.qid},
           {"similarity", p.similarity}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

SvgPoint project(const GeoPoint& p, double width_px) {
  return {(p.lon() + 180.0) / 360.0 * width_px,
          (90.0 - p.lat()) / 180.0 * (width_px / 2.0)};
}

std::string render_svg_map(const std::vector<LinkedPlace>& places,
                           int width_px) {
  if (width_px <= 0) throw std::invalid_argument("width must be positive");
  const double w = width_px;
  const double h = w / 2.0;

  std::vector<const LinkedPlace*> sorted;
  for (const auto& p : places) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LinkedPlace* a, const LinkedPlace* b) {
                     return a->entry_id < b->entry_id;
                   });

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(width_px) + "\" height=\"" + fixed(h) +
         "\" viewBox=\"0 0 " + std::to_string(width_px) + " " + fixed(h) +
         "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width_px) +
         "\" height=\"" + fixed(h) + "\" fill=\"#f4f6f8\"/>\n";
  svg += "<g id=\"graticule\" stroke=\"#c8ced6\" stroke-width=\"0.5\">\n";
  for (int lon = -150; lon <= 150; lon += 30) {
    const double x = (lon + 180.0) / 360.0 * w;
    svg += "<line x1=\"" + fixed(x) + "\" y1=\"0.000\" x2=\"" + fixed(x) +
           "\" y2=\"" + fixed(h) + "\"/>\n";
  }
  for (int lat = -60; lat <= 60; lat += 30) {
    const double y = (90.0 - lat) / 180.0 * h;
    svg += "<line x1=\"0.000\" y1=\"" + fixed(y) + "\" x2=\"" + fixed(w) +
           "\" y2=\"" + fixed(y) + "\"/>\n";
  }
  svg += "</g>\n<g id=\"places\" fill=\"#c0392b\" fill-opacity=\"0.6\">\n";
  for (const LinkedPlace* p : sorted) {
    const SvgPoint xy = project(p->point, w);
    svg += "<circle cx=\"" + fixed(xy.x) + "\" cy=\"" + fixed(xy.y) +
           "\" r=\"2\"><title>" + xml_escape(p->headword) + " (" +
           xml_escape(p->qid) + ")</title></circle>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace gazetteer
