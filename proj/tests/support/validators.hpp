#pragma once

// Structural checkers for report outputs, written against the published
// formats rather than the library's writers.

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

namespace gazetteer::testing {

inline bool is_position(const nlohmann::json& p) {
  if (!p.is_array() || p.size() < 2 || p.size() > 3) return false;
  for (const auto& c : p) {
    if (!c.is_number() || !std::isfinite(c.get<double>())) return false;
  }
  const double lon = p[0].get<double>(), lat = p[1].get<double>();
  return lon >= -180.0 && lon <= 180.0 && lat >= -90.0 && lat <= 90.0;
}

// RFC 7946 checks for a FeatureCollection of Point features. Returns an
// empty string when valid, otherwise the first problem found.
inline std::string geojson_problem(const nlohmann::json& doc) {
  if (!doc.is_object()) return "document is not an object";
  if (doc.value("type", "") != "FeatureCollection") return "type is not FeatureCollection";
  if (!doc.contains("features") || !doc["features"].is_array()) return "features missing";
  for (const auto& f : doc["features"]) {
    if (!f.is_object() || f.value("type", "") != "Feature") return "feature type";
    if (!f.contains("geometry")) return "geometry missing";
    if (!f.contains("properties") ||
        !(f["properties"].is_object() || f["properties"].is_null())) {
      return "properties missing";
    }
    const auto& g = f["geometry"];
    if (g.is_null()) continue;
    if (!g.is_object() || g.value("type", "") != "Point") return "geometry type";
    if (!g.contains("coordinates") || !is_position(g["coordinates"])) {
      return "bad position";
    }
  }
  if (doc.contains("crs")) return "crs member is not allowed";
  return {};
}

// Tag balance of a small XML document (no CDATA, no DTD).
inline bool xml_balanced(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while ((i = xml.find('<', i)) != std::string::npos) {
    const auto end = xml.find('>', i);
    if (end == std::string::npos) return false;
    const std::string tag = xml.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty() && root_seen) return false;
    root_seen = true;
    if (tag.back() != '/') stack.push_back(name);
  }
  return root_seen && stack.empty();
}

inline std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = haystack.find(needle); p != std::string::npos;
       p = haystack.find(needle, p + 1)) {
    ++n;
  }
  return n;
}

}  // namespace gazetteer::testing
