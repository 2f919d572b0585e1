#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gazetteer/dataset.hpp"
#include "gazetteer/pipeline.hpp"
#include "json.hpp"
#include "support/fake_wikidata.hpp"
#include "support/validators.hpp"
#include "support/workspace.hpp"

using namespace gazetteer;
using gazetteer::testing::FakeWikidata;
using gazetteer::testing::Workspace;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code_of(auto&& stage) {
  try {
    stage();
  } catch (const StageError& err) {
    return err.exit_code();
  }
  return 0;
}

// Runs the full pipeline in record mode against the fake, warming the cache.
void record_run(const Workspace& ws) {
  FakeWikidata fake;
  std::ostringstream diag;
  Pipeline p(ws.config(CacheMode::kRecord), diag);
  p.set_network_transport(&fake);
  p.run();
}

const Entry& by_headword(const std::vector<Entry>& entries, const std::string& h) {
  for (const auto& e : entries) {
    if (e.headword == h) return e;
  }
  throw std::runtime_error("missing " + h);
}

}  // namespace

TEST_CASE("each stage is idempotent") {
  Workspace ws("gazetteer_idem");
  record_run(ws);
  std::ostringstream diag;
  Pipeline p(ws.config(), diag);
  const auto path = ws.config().dataset_path;
  const std::vector<std::pair<const char*, std::function<void()>>> stages{
      {"ingest", [&] { p.ingest(); }},
      {"classify", [&] { p.classify(); }},
      {"link", [&] { p.link(); }},
      {"coords", [&] { p.coords(); }},
      {"report", [&] { p.report(); }}};
  for (const auto& [name, stage] : stages) {
    CAPTURE(name);
    stage();
    const auto once = load_dataset(path);
    const std::string bytes = slurp(path);
    stage();
    CHECK(load_dataset(path) == once);
    CHECK(slurp(path) == bytes);
  }
  CHECK(p.network_calls() == 0);
}

TEST_CASE("ingest keeps enrichment of unchanged entries") {
  Workspace ws("gazetteer_resume");
  record_run(ws);
  const auto cfg = ws.config();
  const auto before = load_dataset(cfg.dataset_path);
  std::ofstream(cfg.raw_dir / "2" / "11.txt")
      << "Stockholm, Sveriges hufvudstad.\nUppsala, stad i Uppland, residensstad "
         "i Uppsala län,\nvid Fyrisån.\n";
  std::ostringstream diag;
  Pipeline p(cfg, diag);
  p.ingest();
  const auto after = load_dataset(cfg.dataset_path);
  CHECK(by_headword(after, "Berlin") == by_headword(before, "Berlin"));
  CHECK(by_headword(after, "Uppsala") == by_headword(before, "Uppsala"));
  CHECK_FALSE(by_headword(after, "Stockholm").qid.has_value());
  CHECK_FALSE(by_headword(after, "Stockholm").is_location.has_value());
}

TEST_CASE("end-to-end replay links and geocodes the fixture") {
  Workspace ws("gazetteer_e2e");
  record_run(ws);
  std::ostringstream diag;
  Pipeline p(ws.config(), diag);
  const auto summaries = p.run();
  REQUIRE(summaries.size() == 5);  // model already trained by the record run
  CHECK(p.network_calls() == 0);

  const auto entries = load_dataset(ws.config().dataset_path);
  REQUIRE(entries.size() == 12);
  CHECK(by_headword(entries, "Stockholm").qid == "Q1754");
  CHECK(by_headword(entries, "Iowa").qid == "Q99670857");
  CHECK(by_headword(entries, "Arktonnesos").qid != "Q3780284");
  CHECK_FALSE(by_headword(entries, "Iowa").lat.has_value());
  CHECK(by_headword(entries, "Stockholm").lat == 59.329444);

  // Every linked QID that has a coordinate in the fixture got one.
  const auto db = nlohmann::json::parse(
      std::ifstream(testing::fixture_dir() / "wikidata_items.json"));
  for (const auto& e : entries) {
    if (!e.qid) continue;
    const bool has_coord = db["items"][*e.qid].contains("coords");
    CHECK(e.lat.has_value() == has_coord);
  }

  std::size_t locations = 0;
  for (const auto& e : entries) locations += e.is_location.value_or(false) ? 1 : 0;
  const auto& classify = summaries[1];
  CHECK(classify.stage == "classify");
  CHECK(classify.ratios.at("location_fraction") == double(locations) / 12.0);

  const fs::path data = ws.config().dataset_path.parent_path();
  const auto geojson = nlohmann::json::parse(std::ifstream(data / "places.geojson"));
  CHECK(testing::geojson_problem(geojson) == "");
  CHECK(testing::xml_balanced(slurp(data / "map.svg")));
  CHECK(slurp(data / "distance_histogram.csv").starts_with("bucket_lower_km,count\n"));
}

TEST_CASE("classify on an empty dataset") {
  Workspace ws("gazetteer_empty");
  record_run(ws);
  const auto cfg = ws.config();
  save_dataset(cfg.dataset_path, {});
  std::ostringstream diag;
  Pipeline p(cfg, diag);
  const auto s = p.classify();
  CHECK(s.input_count == 0);
  CHECK(s.ratios.at("location_fraction") == 0.0);
}

TEST_CASE("classify --out leaves the dataset alone") {
  Workspace ws("gazetteer_out");
  std::ostringstream diag;
  auto cfg = ws.config(CacheMode::kRecord);
  Pipeline p(cfg, diag);
  p.ingest();
  p.train();
  const std::string before = slurp(cfg.dataset_path);
  p.classify(ws.root() / "labelled.jsonl");
  CHECK(slurp(cfg.dataset_path) == before);
  CHECK(load_dataset(ws.root() / "labelled.jsonl").front().is_location.has_value());
}

TEST_CASE("fatal errors map to stage exit codes and leave the dataset intact") {
  Workspace ws("gazetteer_codes");
  record_run(ws);
  const auto cfg = ws.config();
  const std::string pristine = slurp(cfg.dataset_path);
  std::ostringstream diag;

  SUBCASE("config") {
    auto bad = cfg;
    bad.raw_dir = ws.root() / "nowhere";
    Pipeline p(bad, diag);
    CHECK(exit_code_of([&] { p.ingest(); }) == kExitConfig);
  }
  SUBCASE("ingest") {
    std::ofstream(cfg.raw_dir / "1" / "01.txt") << "Dubblett, sida.\n";
    Pipeline p(cfg, diag);
    CHECK(exit_code_of([&] { p.ingest(); }) == kExitIngest);
  }
  SUBCASE("train") {
    auto bad = cfg;
    bad.annotations_path = ws.root() / "ann.jsonl";
    std::ofstream(bad.annotations_path) << R"({"entry_id":"9:9:9","label":true})" "\n";
    Pipeline p(bad, diag);
    CHECK(exit_code_of([&] { p.train(); }) == kExitTrain);
  }
  SUBCASE("classify") {
    auto bad = cfg;
    bad.embed_dim = 16;
    Pipeline p(bad, diag);
    CHECK(exit_code_of([&] { p.classify(); }) == kExitClassify);
  }
  SUBCASE("link") {
    const HttpRequest search{"GET",
                             cfg.endpoints.api_url +
                                 "?action=wbsearchentities&search=Berlin&language="
                                 "sv&uselang=sv&limit=5&format=json",
                             {},
                             ""};
    REQUIRE(fs::remove(cfg.cache_dir / (cache_key(search) + ".json")));
    Pipeline p(cfg, diag);
    CHECK(exit_code_of([&] { p.link(); }) == kExitLink);
    CHECK(diag.str().find("1:3:1") != std::string::npos);
  }
  SUBCASE("coords") {
    auto entries = load_dataset(cfg.dataset_path);
    for (auto& e : entries) {
      if (e.headword == "Berlin") e.lat.reset();
    }
    save_dataset(cfg.dataset_path, entries);
    fs::remove_all(cfg.cache_dir);
    fs::create_directories(cfg.cache_dir);
    const std::string before = slurp(cfg.dataset_path);
    Pipeline p(cfg, diag);
    CHECK(exit_code_of([&] { p.coords(); }) == kExitCoords);
    CHECK(slurp(cfg.dataset_path) == before);
    return;
  }
  SUBCASE("report") {
    auto bad = cfg;
    bad.geojson_path = ws.root() / "missing-dir" / "places.geojson";
    Pipeline p(bad, diag);
    CHECK(exit_code_of([&] { p.report(); }) == kExitReport);
  }
  CHECK(slurp(cfg.dataset_path) == pristine);
}

TEST_CASE("summaries serialize with ratios in range") {
  RunSummary s;
  s.stage = "classify";
  s.input_count = 4;
  s.output_count = 1;
  s.ratios["location_fraction"] = 0.25;
  const auto j = s.to_json();
  CHECK(j["stage"] == "classify");
  CHECK(j["ratios"]["location_fraction"] == 0.25);
  CHECK(summary_table({s}).find("location_fraction=0.2500") != std::string::npos);
}
