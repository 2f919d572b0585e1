// Acceptance runner: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gazetteer/classifier.hpp"
#include "gazetteer/corpus.hpp"
#include "gazetteer/dataset.hpp"
#include "gazetteer/geo.hpp"
#include "gazetteer/linker.hpp"
#include "gazetteer/pipeline.hpp"
#include "gazetteer/wikidata.hpp"
#include "json.hpp"
#include "support/datasets.hpp"
#include "support/fake_wikidata.hpp"
#include "support/oracles.hpp"
#include "support/validators.hpp"
#include "support/workspace.hpp"

using namespace gazetteer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

struct Criterion {
  int number;
  const char* title;
  double limit_s;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Outcome metric_reproduction() {
  Outcome o;
  // A test set realising tp=93, fp=6, fn=7, tn=94 under w=1, b=0.
  LogisticModel m;
  m.weights = {1.0};
  std::vector<LabeledVector> test;
  auto add = [&](std::size_t n, double x, bool label) {
    for (std::size_t i = 0; i < n; ++i) test.push_back({EmbeddingVector({x}), label});
  };
  add(93, 1.0, true);
  add(6, 1.0, false);
  add(7, -1.0, true);
  add(94, -1.0, false);
  const EvalReport r = evaluate(m, test);
  o.expect(r.tp == 93 && r.fp == 6 && r.fn == 7 && r.tn == 94, "counts");
  o.expect(std::abs(r.accuracy - 0.935) <= 0.0005, fmt("accuracy %.6f", r.accuracy));
  o.expect(std::abs(r.precision - 0.939) <= 0.0005, fmt("precision %.6f", r.precision));
  o.expect(std::abs(r.recall - 0.930) <= 0.0005, fmt("recall %.6f", r.recall));
  o.expect(std::abs(r.f1 - 0.935) <= 0.0005, fmt("f1 %.6f", r.f1));
  const auto& c = r.normalized_confusion;
  o.expect(std::abs(c[0][0] - 0.93) <= 0.005 && std::abs(c[0][1] - 0.07) <= 0.005,
           fmt("row location %.4f %.4f", c[0][0], c[0][1]));
  o.expect(std::abs(c[1][0] - 0.06) <= 0.005 && std::abs(c[1][1] - 0.94) <= 0.005,
           fmt("row other %.4f %.4f", c[1][0], c[1][1]));
  if (o.pass) {
    o.detail = fmt("acc %.4f prec %.4f", r.accuracy, r.precision) +
               fmt(" rec %.4f f1 %.4f", r.recall, r.f1);
  }
  return o;
}

Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t dim = 3 + inst % 3;
    std::vector<LabeledVector> data;
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int n = 0; n < 16; ++n) {
      std::vector<double> x(dim);
      for (auto& v : x) v = u(rng);
      xs.push_back(x);
      ys.push_back(static_cast<int>(rng() % 2));
      data.push_back({EmbeddingVector(x), ys.back() == 1});
    }
    std::vector<double> w(dim);
    for (auto& v : w) v = u(rng);
    const double b = u(rng);
    const double lambda = 0.01;
    const auto g = loss_and_gradient(data, w, b, lambda);
    for (std::size_t i = 0; i <= dim; ++i) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (i < dim) {
        wp[i] += h;
        wm[i] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double numeric = static_cast<double>(
          (testing::oracle_logistic_loss(xs, ys, wp, bp, lambda) -
           testing::oracle_logistic_loss(xs, ys, wm, bm, lambda)) /
          (2.0L * h));
      const double analytic = i < dim ? g.grad_weights[i] : g.grad_bias;
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  o.expect(worst < 1e-6, fmt("max relative error %.3e", worst));
  if (o.pass) o.detail = fmt("max relative error %.3e over 10 instances", worst);
  return o;
}

Outcome separable_training() {
  Outcome o;
  const auto data = testing::two_gaussians();
  o.expect(testing::linearly_separable_2d(data), "generated set is not separable");
  TrainingTrace trace;
  const auto m = train(data, {}, &trace);
  const double acc = evaluate(m, data).accuracy;
  o.expect(acc == 1.0, fmt("training accuracy %.4f", acc));
  o.expect(trace.losses.back() < 0.05, fmt("final loss %.5f", trace.losses.back()));
  if (o.pass) o.detail = fmt("accuracy %.1f, final loss %.5f", acc, trace.losses.back());
  return o;
}

Outcome linker_argmax() {
  Outcome o;
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t permutations = 0;
  for (int set = 0; set < 100 && o.pass; ++set) {
    const std::size_t n = 1 + rng() % 5;
    const EmbeddingVector entry({u(rng), u(rng), u(rng), u(rng)});
    std::vector<std::pair<WikidataCandidate, EmbeddingVector>> cs;
    std::vector<std::uint64_t> used;
    while (cs.size() < n) {
      const std::uint64_t q = 1 + rng() % 500;
      if (std::find(used.begin(), used.end(), q) != used.end()) continue;
      used.push_back(q);
      // Every third candidate copies the first one's vector to force ties.
      EmbeddingVector v = (!cs.empty() && cs.size() % 3 == 0)
                              ? cs.front().second
                              : EmbeddingVector({u(rng), u(rng), u(rng), u(rng)});
      cs.emplace_back(WikidataCandidate{Qid(q), "", std::nullopt}, v);
    }
    // Brute force: plain cosine, lowest QID among the maxima.
    double best = -2.0;
    std::uint64_t best_q = 0;
    for (const auto& [c, v] : cs) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < v.dim(); ++i) {
        ab += entry[i] * v[i];
        aa += entry[i] * entry[i];
        bb += v[i] * v[i];
      }
      const double s = ab / std::sqrt(aa * bb);
      if (s > best + 1e-12 || (std::abs(s - best) <= 1e-12 && c.qid.number() < best_q)) {
        best = s;
        best_q = c.qid.number();
      }
    }
    auto perm = cs;
    auto by_qid = [](const auto& a, const auto& b) { return a.first.qid < b.first.qid; };
    std::sort(perm.begin(), perm.end(), by_qid);
    do {
      ++permutations;
      const auto ranked = rank_candidates(entry, perm);
      o.expect(ranked.front().candidate.qid.number() == best_q,
               "set " + std::to_string(set) + " chose " +
                   ranked.front().candidate.qid.str() + ", expected Q" +
                   std::to_string(best_q));
    } while (std::next_permutation(perm.begin(), perm.end(), by_qid));
  }
  if (o.pass) o.detail = std::to_string(permutations) + " orderings over 100 sets";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome end_to_end() {
  Outcome o;
  testing::Workspace ws("gazetteer_acceptance");
  {
    testing::FakeWikidata fake;
    std::ostringstream diag;
    Pipeline recorder(ws.config(CacheMode::kRecord), diag);
    recorder.set_network_transport(&fake);
    recorder.run();
  }

  std::string svg[2];
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(ws.root() / "data");
    fs::create_directories(ws.root() / "data");
    std::ostringstream diag;
    Pipeline replay(ws.config(CacheMode::kReplay), diag);
    const auto summaries = replay.run();
    o.expect(summaries.size() == 6, "expected all six stages");
    o.expect(replay.network_calls() == 0,
             "network calls in replay: " + std::to_string(replay.network_calls()));
    svg[pass] = slurp(ws.root() / "data" / "map.svg");

    const auto entries = load_dataset(ws.config().dataset_path);
    o.expect(entries.size() == 12, "entry count " + std::to_string(entries.size()));
    const auto find = [&](const std::string& h) -> const Entry* {
      for (const auto& e : entries) {
        if (e.headword == h) return &e;
      }
      return nullptr;
    };
    const Entry* stockholm = find("Stockholm");
    const Entry* arktonnesos = find("Arktonnesos");
    const Entry* iowa = find("Iowa");
    const Entry* aachen = find("Aachen");
    o.expect(stockholm && stockholm->qid == "Q1754", "Stockholm not linked to Q1754");
    o.expect(aachen && aachen->qid.has_value(), "Aachen not linked");
    o.expect(arktonnesos && arktonnesos->qid != "Q3780284",
             "Arktonnesos linked to the correct item");

    // Iowa: the mislink is required exactly when the fixture similarities
    // favour the Star Trek description.
    LocalTrigramEmbedder embedder;
    if (iowa) {
      const auto ev = embedder.embed(iowa->definition);
      const double star_trek = cosine_similarity(
          ev, embedder.embed("den federerade staten Iowa i Nord-Amerikas förenta "
                             "stater såsom den skildras i Star Trek"));
      const double state = cosine_similarity(ev, embedder.embed("delstat i USA"));
      const std::string expected = star_trek > state ? "Q99670857" : "Q1546";
      o.expect(iowa->qid == expected, "Iowa linked to " + iowa->qid.value_or("nothing") +
                                          ", expected " + expected);
    } else {
      o.expect(false, "Iowa entry missing");
    }

    const auto geojson =
        nlohmann::json::parse(slurp(ws.root() / "data" / "places.geojson"));
    const std::string problem = testing::geojson_problem(geojson);
    o.expect(problem.empty(), "GeoJSON: " + problem);
    o.expect(testing::xml_balanced(svg[pass]), "SVG not well formed");
  }
  o.expect(!svg[0].empty() && svg[0] == svg[1], "SVG differs between runs");
  if (o.pass) o.detail = "replay run, 0 network calls, SVG byte-stable";
  return o;
}

Outcome geometry() {
  Outcome o;
  std::mt19937_64 rng(6371);
  std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
  for (int n = 0; n < 100; ++n) {
    const GeoPoint a(lat(rng), lon(rng)), b(lat(rng), lon(rng)), c(lat(rng), lon(rng));
    const double ab = haversine_km(a, b);
    o.expect(std::abs(ab - haversine_km(b, a)) <= 1e-9, "asymmetric distance");
    o.expect(haversine_km(a, c) <= ab + haversine_km(b, c) + 1e-6,
             "triangle inequality violated");
  }
  const double antipodal = haversine_km(GeoPoint(0, 0), GeoPoint(0, 180));
  o.expect(std::abs(antipodal - std::numbers::pi * 6371.0) <= 1e-3,
           fmt("antipodal %.6f km", antipodal));

  // Histogram conservation over every coordinate in the fixtures.
  const auto db = nlohmann::json::parse(
      std::ifstream(testing::fixture_dir() / "wikidata_items.json"));
  std::vector<GeoPoint> all;
  for (const auto& [id, item] : db["items"].items()) {
    if (!item.contains("coords")) continue;
    for (const auto& wkt : item["coords"]) {
      try {
        const LatLon p = parse_wkt_point(wkt.get<std::string>());
        all.emplace_back(p.lat, p.lon);
      } catch (const std::exception&) {
      }
    }
  }
  for (std::size_t k = 0; k <= all.size(); ++k) {
    const std::vector<GeoPoint> subset(all.begin(), all.begin() + k);
    for (double bucket : {100.0, 500.0, 2500.0}) {
      const auto h = distance_histogram(subset, kSwedenCentre, bucket);
      o.expect(h.total() == subset.size(), "histogram lost points");
    }
  }
  if (o.pass) {
    o.detail = fmt("antipodal %.4f km, %.0f fixture points", antipodal,
                   static_cast<double>(all.size()));
  }
  return o;
}

Outcome truncation() {
  Outcome o;
  std::mt19937_64 rng(200);
  const std::vector<std::string> alphabet{"a", "B", " ", ".", "ä", "ö", "é", ",",
                                          "\n", "x", "€"};
  for (int n = 0; n < 1000; ++n) {
    std::string t;
    const std::size_t len = rng() % 500;
    for (std::size_t i = 0; i < len; ++i) t += alphabet[rng() % alphabet.size()];
    const std::string once = truncate_definition(t);
    o.expect(truncate_definition(once) == once, "not idempotent");
    o.expect(utf8_length(once) <= 200, "longer than 200");
    const std::string_view prefix = utf8_prefix(t, 200);
    if (prefix.find('.') != std::string_view::npos) {
      o.expect(!once.empty() && once.back() == '.', "does not end at a period");
    }
  }
  if (o.pass) o.detail = "1000 seeded strings";
  return o;
}

Outcome desk_scale() {
  Outcome o;
  // Streaming ingest: pages are grouped per volume and segmented one volume
  // at a time; a synthetic multi-volume dump goes through unchanged code.
  testing::Workspace ws("gazetteer_scale");
  fs::remove_all(ws.root() / "raw");
  const int volumes = 4, pages = 60;
  for (int v = 1; v <= volumes; ++v) {
    fs::create_directories(ws.root() / "raw" / std::to_string(v));
    for (int p = 1; p <= pages; ++p) {
      std::ofstream out(ws.root() / "raw" / std::to_string(v) / (std::to_string(p) + ".txt"));
      for (int e = 0; e < 5; ++e) {
        out << "Ort" << v << "x" << p << "x" << e << ", by i socknen.\n";
      }
    }
  }
  const auto grouped = index_raw_pages(ws.root() / "raw");
  o.expect(grouped.size() == static_cast<std::size_t>(volumes), "volume grouping");
  std::ostringstream diag;
  Pipeline p(ws.config(), diag);
  const auto s = p.ingest();
  o.expect(s.output_count == static_cast<std::size_t>(volumes * pages * 5),
           "ingest count " + std::to_string(s.output_count));
  o.expect(s.stats.at("volumes") == volumes, "volumes stat");

  // Coordinate lookups go out in batches of 200.
  testing::FakeWikidata fake;
  WikidataClient client(fake);
  std::vector<Qid> qids;
  for (int i = 1; i <= 1000; ++i) qids.emplace_back(8000000 + i);
  client.fetch_coordinates(qids);
  o.expect(fake.sparql_calls() == 5, "SPARQL calls " + std::to_string(fake.sparql_calls()));
  if (o.pass) {
    o.detail =
        "corpus-scale counts and the original test-set scores are not "
        "reproducible here; streaming ingest and batched SPARQL verified";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric reproduction", 1.0, metric_reproduction},
      {2, "gradient check", 5.0, gradient_check},
      {3, "separable training", 10.0, separable_training},
      {4, "linker argmax and order invariance", 5.0, linker_argmax},
      {5, "end-to-end fixture run", 30.0, end_to_end},
      {6, "geometry suite", 5.0, geometry},
      {7, "truncation property", 2.0, truncation},
      {8, "desk-scale limits", 30.0, desk_scale},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& err) {
      o.pass = false;
      o.detail = std::string("exception: ") + err.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s limit)", c.limit_s);
    }
    std::printf("criterion %d: %s  %-36s %7.3f s  %s\n", c.number,
                o.pass ? "PASS" : "FAIL", c.title, secs, o.detail.c_str());
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
