#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazetteer/http.hpp"

namespace gazetteer {

// Wikidata item identifier "Q<n>", n >= 1.
class Qid {
 public:
  explicit Qid(std::uint64_t number);

  // Accepts "Q123" or an entity URI ending in "/Q123". Throws
  // std::invalid_argument otherwise.
  static Qid parse(std::string_view text);
  static std::optional<Qid> try_parse(std::string_view text);

  std::uint64_t number() const { return number_; }
  std::string str() const { return "Q" + std::to_string(number_); }

  auto operator<=>(const Qid&) const = default;

 private:
  std::uint64_t number_;
};

struct WikidataCandidate {
  Qid qid;
  std::string label;
  std::optional<std::string> description_sv;

  bool operator==(const WikidataCandidate&) const = default;
};

struct CoordinateRecord {
  Qid qid;
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const CoordinateRecord&) const = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

// Parses a WKT literal "Point(<lon> <lat>)", optionally preceded by a datum
// IRI. Only the Earth datum (Q2) is accepted. Note the axis swap: WKT puts
// longitude first, the result is (lat, lon). Throws ParseError.
LatLon parse_wkt_point(std::string_view literal);

struct WikidataEndpoints {
  std::string api_url = "https://www.wikidata.org/w/api.php";
  std::string sparql_url = "https://query.wikidata.org/sparql";
  // Wikimedia requires a descriptive agent; deployments should add a
  // contact address.
  std::string user_agent = "gazetteer/0.1 (encyclopedia gazetteer builder)";
};

inline constexpr std::size_t kSparqlBatch = 200;
inline constexpr std::size_t kGetEntitiesBatch = 50;

class WikidataClient {
 public:
  explicit WikidataClient(Transport& transport, WikidataEndpoints endpoints = {});

  // wbsearchentities; candidates in endpoint order, non-item hits dropped.
  std::vector<WikidataCandidate> search_candidates(
      std::string_view headword, int limit = 5,
      std::string_view language = "sv");

  // wbgetentities in batches of 50. Every input QID is a key of the result;
  // a missing item or description maps to nullopt.
  std::map<Qid, std::optional<std::string>> fetch_descriptions(
      const std::vector<Qid>& qids, std::string_view language = "sv");

  // SPARQL over P625 in batches of 200 QIDs. One record per QID that has a
  // coordinate, first result row winning, in input order. Unparseable rows
  // are skipped and counted in coordinate_warnings().
  std::vector<CoordinateRecord> fetch_coordinates(const std::vector<Qid>& qids);

  static std::string coordinate_query(const std::vector<Qid>& batch);

  std::size_t coordinate_warnings() const { return coordinate_warnings_; }

 private:
  HttpResponse get_json(const HttpRequest& request);

  Transport& transport_;
  WikidataEndpoints endpoints_;
  std::atomic<std::size_t> coordinate_warnings_{0};
};

}  // namespace gazetteer
