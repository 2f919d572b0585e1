#include "gazetteer/wikidata.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include "gazetteer/errors.hpp"
#include "json.hpp"

namespace gazetteer {

namespace {

using nlohmann::json;

constexpr std::string_view kEarthDatum = "http://www.wikidata.org/entity/Q2";

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, std::string_view literal) {
  double value = 0.0;
  const auto [end, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw ParseError("bad number in WKT literal: " + std::string(literal));
  }
  return value;
}

json parse_body(const HttpResponse& res, std::string_view what) {
  try {
    return json::parse(res.body);
  } catch (const json::parse_error& err) {
    throw ProtocolError(std::string(what) + ": malformed JSON: " + err.what());
  }
}

std::vector<Qid> dedupe(const std::vector<Qid>& qids) {
  std::vector<Qid> out;
  std::set<Qid> seen;
  for (const Qid& q : qids) {
    if (seen.insert(q).second) out.push_back(q);
  }
  return out;
}

}  // namespace

Qid::Qid(std::uint64_t number) : number_(number) {
  if (number == 0) throw std::invalid_argument("QID number must be positive");
}

std::optional<Qid> Qid::try_parse(std::string_view text) {
  if (auto slash = text.rfind('/'); slash != std::string_view::npos) {
    text.remove_prefix(slash + 1);
  }
  if (text.size() < 2 || text.front() != 'Q' || text[1] == '0') {
    return std::nullopt;
  }
  text.remove_prefix(1);
  std::uint64_t n = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return Qid(n);
}

Qid Qid::parse(std::string_view text) {
  if (auto q = try_parse(text)) return *q;
  throw std::invalid_argument("not a QID: " + std::string(text));
}

LatLon parse_wkt_point(std::string_view literal) {
  std::string_view s = trim(literal);
  if (!s.empty() && s.front() == '<') {
    const auto close = s.find('>');
    if (close == std::string_view::npos) {
      throw ParseError("unterminated datum IRI: " + std::string(literal));
    }
    if (s.substr(1, close - 1) != kEarthDatum) {
      throw ParseError("non-terrestrial datum: " + std::string(literal));
    }
    s = trim(s.substr(close + 1));
  }
  constexpr std::string_view kPoint = "point";
  if (s.size() < kPoint.size()) {
    throw ParseError("not a WKT point: " + std::string(literal));
  }
  for (std::size_t i = 0; i < kPoint.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != kPoint[i]) {
      throw ParseError("not a WKT point: " + std::string(literal));
    }
  }
  s = trim(s.substr(kPoint.size()));
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') {
    throw ParseError("not a WKT point: " + std::string(literal));
  }
  s = trim(s.substr(1, s.size() - 2));
  const auto gap = s.find_first_of(" \t");
  if (gap == std::string_view::npos) {
    throw ParseError("WKT point needs two coordinates: " + std::string(literal));
  }
  const double lon = parse_number(s.substr(0, gap), literal);
  const double lat = parse_number(trim(s.substr(gap)), literal);
  if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
    throw ParseError("coordinate out of range: " + std::string(literal));
  }
  return {lat, lon};
}

WikidataClient::WikidataClient(Transport& transport,
                               WikidataEndpoints endpoints)
    : transport_(transport), endpoints_(std::move(endpoints)) {}

HttpResponse WikidataClient::get_json(const HttpRequest& request) {
  HttpResponse res = transport_.send(request);
  if (res.status == 429 || res.status >= 500) {
    throw TransportError(request.method + " " + request.url + ": HTTP " +
                         std::to_string(res.status));
  }
  if (res.status != 200) {
    throw ProtocolError(request.method + " " + request.url + ": HTTP " +
                        std::to_string(res.status));
  }
  return res;
}

std::vector<WikidataCandidate> WikidataClient::search_candidates(
    std::string_view headword, int limit, std::string_view language) {
  if (headword.empty()) throw std::invalid_argument("empty headword");
  if (limit < 1 || limit > 50) {
    throw std::invalid_argument("search limit must be in [1, 50]");
  }
  HttpRequest req;
  const std::string lang = url_encode(language);
  req.url = endpoints_.api_url + "?action=wbsearchentities&search=" +
            url_encode(headword) + "&language=" + lang + "&uselang=" + lang +
            "&limit=" + std::to_string(limit) + "&format=json";
  req.headers = {{"User-Agent", endpoints_.user_agent},
                 {"Accept", "application/json"}};
  const json body = parse_body(get_json(req), "wbsearchentities");
  if (body.contains("error")) {
    throw ProtocolError("wbsearchentities error: " + body["error"].dump());
  }

  std::vector<WikidataCandidate> out;
  try {
    for (const json& hit : body.at("search")) {
      auto qid = Qid::try_parse(hit.at("id").get<std::string>());
      if (!qid) continue;
      WikidataCandidate c{*qid, hit.value("label", std::string()), std::nullopt};
      if (auto d = hit.find("description"); d != hit.end() && d->is_string()) {
        c.description_sv = d->get<std::string>();
      }
      out.push_back(std::move(c));
      if (out.size() == static_cast<std::size_t>(limit)) break;
    }
  } catch (const json::exception& err) {
    throw ProtocolError(std::string("wbsearchentities: ") + err.what());
  }
  return out;
}

std::map<Qid, std::optional<std::string>> WikidataClient::fetch_descriptions(
    const std::vector<Qid>& qids, std::string_view language) {
  if (qids.empty()) throw std::invalid_argument("no QIDs to describe");
  const std::vector<Qid> unique = dedupe(qids);
  std::map<Qid, std::optional<std::string>> out;
  for (const Qid& q : unique) out.emplace(q, std::nullopt);

  for (std::size_t first = 0; first < unique.size();
       first += kGetEntitiesBatch) {
    const std::size_t last = std::min(unique.size(), first + kGetEntitiesBatch);
    std::string ids;
    for (std::size_t i = first; i < last; ++i) {
      if (!ids.empty()) ids += '|';
      ids += unique[i].str();
    }
    HttpRequest req;
    req.url = endpoints_.api_url + "?action=wbgetentities&ids=" +
              url_encode(ids) + "&props=descriptions&languages=" +
              url_encode(language) + "&format=json";
    req.headers = {{"User-Agent", endpoints_.user_agent},
                   {"Accept", "application/json"}};
    const json body = parse_body(get_json(req), "wbgetentities");
    if (body.contains("error")) {
      throw ProtocolError("wbgetentities error: " + body["error"].dump());
    }
    try {
      for (const auto& [key, entity] : body.at("entities").items()) {
        if (entity.contains("missing")) continue;
        std::optional<std::string> text;
        if (auto d = entity.find("descriptions"); d != entity.end()) {
          if (auto l = d->find(std::string(language)); l != d->end()) {
            text = l->at("value").get<std::string>();
          }
        }
        // A redirected item comes back under its target id.
        std::vector<Qid> targets;
        if (auto q = Qid::try_parse(key)) targets.push_back(*q);
        if (auto r = entity.find("redirects"); r != entity.end()) {
          if (auto from = Qid::try_parse(r->value("from", ""))) {
            targets.push_back(*from);
          }
        }
        for (const Qid& q : targets) {
          if (auto it = out.find(q); it != out.end()) it->second = text;
        }
      }
    } catch (const json::exception& err) {
      throw ProtocolError(std::string("wbgetentities: ") + err.what());
    }
  }
  return out;
}

std::string WikidataClient::coordinate_query(const std::vector<Qid>& batch) {
  std::string values;
  for (const Qid& q : batch) {
    if (!values.empty()) values += ' ';
    values += "wd:" + q.str();
  }
  return "SELECT ?item ?coords WHERE { VALUES ?item { " + values +
         " } ?item wdt:P625 ?coords }";
}

std::vector<CoordinateRecord> WikidataClient::fetch_coordinates(
    const std::vector<Qid>& qids) {
  if (qids.empty()) throw std::invalid_argument("no QIDs to geocode");
  const std::vector<Qid> unique = dedupe(qids);
  std::map<Qid, CoordinateRecord> found;

  for (std::size_t first = 0; first < unique.size(); first += kSparqlBatch) {
    const std::size_t last = std::min(unique.size(), first + kSparqlBatch);
    const std::vector<Qid> batch(unique.begin() + first, unique.begin() + last);
    HttpRequest req;
    req.method = "POST";
    req.url = endpoints_.sparql_url;
    req.headers = {{"User-Agent", endpoints_.user_agent},
                   {"Accept", "application/sparql-results+json"},
                   {"Content-Type", "application/x-www-form-urlencoded"}};
    req.body = "query=" + url_encode(coordinate_query(batch));
    const json body = parse_body(get_json(req), "sparql");
    try {
      for (const json& row : body.at("results").at("bindings")) {
        auto qid = Qid::try_parse(row.at("item").at("value").get<std::string>());
        if (!qid) {
          ++coordinate_warnings_;
          continue;
        }
        if (found.contains(*qid)) continue;
        try {
          const LatLon p =
              parse_wkt_point(row.at("coords").at("value").get<std::string>());
          found.emplace(*qid, CoordinateRecord{*qid, p.lat, p.lon});
        } catch (const ParseError&) {
          ++coordinate_warnings_;
        }
      }
    } catch (const json::exception& err) {
      throw ProtocolError(std::string("sparql results: ") + err.what());
    }
  }

  std::vector<CoordinateRecord> out;
  for (const Qid& q : unique) {
    if (auto it = found.find(q); it != found.end()) out.push_back(it->second);
  }
  return out;
}

}  // namespace gazetteer
