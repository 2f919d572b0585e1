#pragma once

// In-process stand-in for the Wikidata API and query service, answering from
// tests/fixtures/wikidata_items.json with responses shaped like the real
// endpoints.

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "gazetteer/http.hpp"
#include "json.hpp"

namespace gazetteer::testing {

std::filesystem::path fixture_dir();

std::string url_decode(std::string_view text);
std::map<std::string, std::string> query_params(std::string_view url);

class FakeWikidata final : public Transport {
 public:
  explicit FakeWikidata(const std::filesystem::path& items_file =
                            fixture_dir() / "wikidata_items.json");

  HttpResponse send(const HttpRequest& request) override;

  std::size_t calls() const { return calls_; }
  std::size_t sparql_calls() const { return sparql_calls_; }
  std::vector<HttpRequest> requests() const;

  // Extra SPARQL-only items, e.g. for large batch tests.
  void add_coordinate(const std::string& qid, const std::string& wkt);
  // Every request answers with `status` (e.g. 503) while nonzero.
  void fail_with(int status) { fail_status_ = status; }

 private:
  HttpResponse search(const std::map<std::string, std::string>& params) const;
  HttpResponse get_entities(const std::map<std::string, std::string>& params) const;
  HttpResponse sparql(const std::string& body) const;

  nlohmann::json db_;
  mutable std::mutex mu_;
  std::vector<HttpRequest> log_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> sparql_calls_{0};
  std::atomic<int> fail_status_{0};
};

}  // namespace gazetteer::testing
