#include "gazetteer/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <unistd.h>

#include "gazetteer/classifier.hpp"
#include "gazetteer/corpus.hpp"
#include "gazetteer/dataset.hpp"
#include "gazetteer/errors.hpp"
#include "gazetteer/geo.hpp"
#include "gazetteer/linker.hpp"

namespace gazetteer {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

double fraction(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void clear_link_fields(Entry& e) {
  e.qid.reset();
  e.similarity.reset();
  e.lat.reset();
  e.lon.reset();
  e.link_note.reset();
}

// Runs `body`, converting any failure into a StageError with `code`.
template <typename F>
auto guarded(int code, const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& err) {
    throw StageError(code, std::string(stage) + ": " + err.what());
  }
}

std::vector<std::string> definitions_of(const std::vector<Entry>& entries) {
  std::vector<std::string> texts;
  texts.reserve(entries.size());
  for (const auto& e : entries) texts.push_back(e.definition);
  return texts;
}

}  // namespace

nlohmann::ordered_json RunSummary::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["input_count"] = input_count;
  j["output_count"] = output_count;
  j["error_count"] = error_count;
  j["wall_time_s"] = wall_time_s;
  j["ratios"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ratios) j["ratios"][k] = v;
  j["stats"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : stats) j["stats"][k] = v;
  return j;
}

std::string summary_table(const std::vector<RunSummary>& summaries) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %9s  %s\n", "stage",
                "input", "output", "errors", "time_s", "ratios");
  out += line;
  for (const auto& s : summaries) {
    std::string ratios;
    for (const auto& [k, v] : s.ratios) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s%s=%.4f", ratios.empty() ? "" : " ",
                    k.c_str(), v);
      ratios += buf;
    }
    std::snprintf(line, sizeof line, "%-10s %8zu %8zu %8zu %9.3f  %s\n",
                  s.stage.c_str(), s.input_count, s.output_count,
                  s.error_count, s.wall_time_s, ratios.c_str());
    out += line;
  }
  return out;
}

Pipeline::Pipeline(PipelineConfig config, std::ostream& diag)
    : config_(std::move(config)), diag_(diag) {}

Pipeline::~Pipeline() = default;

void Pipeline::set_embedding_provider(
    std::unique_ptr<EmbeddingProvider> provider) {
  provider_ = std::move(provider);
}

void Pipeline::set_network_transport(Transport* transport) {
  network_override_ = transport;
  cache_.reset();
  polite_.reset();
}

std::size_t Pipeline::network_calls() const {
  return cache_ ? cache_->network_calls() : 0;
}

EmbeddingProvider& Pipeline::provider() {
  if (provider_) return *provider_;
  std::unique_ptr<EmbeddingProvider> base;
  if (config_.embed_provider == "local") {
    base = std::make_unique<LocalTrigramEmbedder>(config_.embed_dim);
  } else if (config_.embed_provider == "remote") {
    if (config_.embed_url.empty()) {
      throw StageError(kExitConfig, "remote embedding needs embed_url");
    }
    RemoteEmbedderOptions opts;
    opts.url = config_.embed_url;
    opts.dim = config_.embed_dim;
    opts.timeout = std::chrono::milliseconds(config_.embed_timeout_ms);
    opts.max_in_flight = config_.concurrency;
    base = std::make_unique<RemoteEmbedder>(opts);
  } else {
    throw StageError(kExitConfig,
                     "unknown embed provider: " + config_.embed_provider);
  }
  if (!config_.embed_cache.empty()) {
    base = std::make_unique<CachingEmbedder>(std::move(base),
                                             config_.embed_cache);
  }
  provider_ = std::move(base);
  return *provider_;
}

Transport& Pipeline::wikidata_transport() {
  if (cache_) return *cache_;
  Transport* network = nullptr;
  if (config_.cache_mode != CacheMode::kReplay) {
    if (network_override_) {
      network = network_override_;
    } else {
      if (!http_) {
        http_ = std::make_unique<HttpTransport>();
      }
      network = http_.get();
    }
    polite_ = std::make_unique<PoliteTransport>(
        *network, std::chrono::milliseconds(config_.min_interval_ms));
    network = polite_.get();
  } else if (!fs::is_directory(config_.cache_dir)) {
    throw StageError(kExitConfig, "replay cache directory not found: " +
                                      config_.cache_dir.string());
  }
  cache_ = std::make_unique<CachingTransport>(config_.cache_mode,
                                              config_.cache_dir, network);
  return *cache_;
}

void Pipeline::require_dataset(int exit_code) const {
  if (config_.dataset_path.empty()) {
    throw StageError(kExitConfig, "no dataset path configured");
  }
  if (!fs::exists(config_.dataset_path)) {
    throw StageError(exit_code,
                     "dataset not found: " + config_.dataset_path.string());
  }
}

fs::path Pipeline::output_path(const fs::path& configured,
                               const char* fallback) const {
  if (!configured.empty()) return configured;
  return config_.dataset_path.parent_path() / fallback;
}

RunSummary Pipeline::ingest() {
  Stopwatch clock;
  if (config_.raw_dir.empty() || !fs::is_directory(config_.raw_dir)) {
    throw StageError(kExitConfig,
                     "raw directory not found: " + config_.raw_dir.string());
  }
  if (config_.dataset_path.empty()) {
    throw StageError(kExitConfig, "no dataset path configured");
  }
  return guarded(kExitIngest, "ingest", [&] {
    // Enrichment from a previous run survives when an entry is unchanged.
    std::map<std::string, Entry> previous;
    if (fs::exists(config_.dataset_path)) {
      for (auto& e : load_dataset(config_.dataset_path)) {
        previous.emplace(e.id, std::move(e));
      }
    }

    RunSummary s;
    s.stage = "ingest";
    std::vector<Entry> all;
    const auto volumes = index_raw_pages(config_.raw_dir, config_.page_pattern);
    // Segmentation runs one volume at a time, so memory is bounded by the
    // largest volume plus the output records.
    for (const auto& files : volumes) {
      s.input_count += files.size();
      for (Entry& e : segment_pages(read_pages(files))) {
        if (auto it = previous.find(e.id);
            it != previous.end() && it->second.raw_text == e.raw_text &&
            it->second.definition == e.definition) {
          e = it->second;
        }
        all.push_back(std::move(e));
      }
    }
    save_dataset(config_.dataset_path, all);

    const CorpusStats stats = corpus_stats(all);
    s.output_count = stats.entry_count;
    s.stats["mean_words_per_entry"] = stats.mean_words_per_entry;
    s.stats["mean_chars_per_entry"] = stats.mean_chars_per_entry;
    s.stats["volumes"] = static_cast<double>(volumes.size());
    s.wall_time_s = clock.seconds();
    return s;
  });
}

RunSummary Pipeline::train() {
  Stopwatch clock;
  if (config_.annotations_path.empty() ||
      !fs::exists(config_.annotations_path)) {
    throw StageError(kExitConfig, "annotations file not found: " +
                                      config_.annotations_path.string());
  }
  if (config_.model_path.empty()) {
    throw StageError(kExitConfig, "no model path configured");
  }
  require_dataset(kExitTrain);
  EmbeddingProvider& embedder = provider();
  return guarded(kExitTrain, "train", [&] {
    const auto entries = load_dataset(config_.dataset_path);
    std::map<std::string, const Entry*> by_id;
    for (const auto& e : entries) by_id.emplace(e.id, &e);

    const auto annotations = load_annotations(config_.annotations_path);
    std::vector<std::string> texts;
    for (const auto& a : annotations) {
      auto it = by_id.find(a.entry_id);
      if (it == by_id.end()) {
        throw StageError(kExitTrain, "annotation refers to unknown entry " +
                                         a.entry_id);
      }
      texts.push_back(it->second->definition);
    }
    const auto vectors = embedder.embed_batch(texts);
    std::vector<LabeledVector> data;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < annotations.size(); ++i) {
      data.push_back({vectors[i], annotations[i].label});
      positives += annotations[i].label ? 1 : 0;
    }
    TrainingTrace trace;
    const LogisticModel model = gazetteer::train(data, Hyperparams{}, &trace);
    save_model(config_.model_path, model);

    const EvalReport fit = evaluate(model, data);
    RunSummary s;
    s.stage = "train";
    s.input_count = annotations.size();
    s.output_count = model.trained_on;
    s.ratios["positive_fraction"] = fraction(positives, annotations.size());
    s.ratios["training_accuracy"] = fit.accuracy;
    s.stats["initial_loss"] = trace.losses.front();
    s.stats["final_loss"] = trace.losses.back();
    s.wall_time_s = clock.seconds();
    return s;
  });
}

RunSummary Pipeline::classify(const std::optional<fs::path>& out) {
  Stopwatch clock;
  require_dataset(kExitClassify);
  if (config_.model_path.empty() || !fs::exists(config_.model_path)) {
    throw StageError(kExitConfig,
                     "model not found: " + config_.model_path.string());
  }
  EmbeddingProvider& embedder = provider();
  return guarded(kExitClassify, "classify", [&] {
    auto entries = load_dataset(config_.dataset_path);
    const LogisticModel model = load_model(config_.model_path);
    if (model.dim() != embedder.dim()) {
      throw StageError(kExitClassify,
                       "model dim " + std::to_string(model.dim()) +
                           " does not match embedding dim " +
                           std::to_string(embedder.dim()));
    }
    const auto vectors = embedder.embed_batch(definitions_of(entries));
    std::size_t locations = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const bool is_location = gazetteer::classify(model, vectors[i]);
      if (!is_location) clear_link_fields(entries[i]);
      entries[i].is_location = is_location;
      locations += is_location ? 1 : 0;
    }
    save_dataset(out.value_or(config_.dataset_path), entries);

    RunSummary s;
    s.stage = "classify";
    s.input_count = entries.size();
    s.output_count = locations;
    s.ratios["location_fraction"] = fraction(locations, entries.size());
    s.wall_time_s = clock.seconds();
    return s;
  });
}

RunSummary Pipeline::link() {
  Stopwatch clock;
  require_dataset(kExitLink);
  EmbeddingProvider& embedder = provider();
  Transport& transport = wikidata_transport();
  return guarded(kExitLink, "link", [&] {
    auto entries = load_dataset(config_.dataset_path);
    std::vector<Entry> locations;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].is_location.value_or(false)) {
        locations.push_back(entries[i]);
        index.push_back(i);
      }
    }

    WikidataClient client(transport, config_.endpoints);
    LinkOptions options;
    options.min_similarity = config_.min_similarity;
    options.concurrency = config_.concurrency;
    const auto results = link_batch(locations, embedder, client, options);

    std::size_t failed = 0;
    for (const auto& r : results) {
      if (r.status == LinkStatus::kClientFailed) {
        diag_ << "link: entry " << r.entry_id << ": " << r.note << '\n';
        ++failed;
      }
    }
    if (failed > 0) {
      throw StageError(kExitLink, "link: " + std::to_string(failed) +
                                      " entries failed; dataset unchanged");
    }

    RunSummary s;
    s.stage = "link";
    s.input_count = locations.size();
    for (std::size_t k = 0; k < results.size(); ++k) {
      const LinkResult& r = results[k];
      Entry& e = entries[index[k]];
      switch (r.status) {
        case LinkStatus::kLinked: {
          const std::string qid = r.chosen->str();
          if (e.qid != qid) {
            e.lat.reset();
            e.lon.reset();
          }
          e.qid = qid;
          e.similarity = r.similarity;
          e.link_note.reset();
          ++s.output_count;
          break;
        }
        case LinkStatus::kNoCandidates:
          clear_link_fields(e);
          e.link_note = "no candidates";
          break;
        case LinkStatus::kBelowMinSimilarity:
          clear_link_fields(e);
          e.link_note = r.note;
          break;
        case LinkStatus::kEmbeddingFailed:
          clear_link_fields(e);
          e.link_note = r.note;
          diag_ << "link: entry " << r.entry_id << ": " << r.note << '\n';
          ++s.error_count;
          break;
        case LinkStatus::kClientFailed:
          break;
      }
    }
    save_dataset(config_.dataset_path, entries);
    s.ratios["linked_fraction"] = fraction(s.output_count, s.input_count);
    s.wall_time_s = clock.seconds();
    return s;
  });
}

RunSummary Pipeline::coords() {
  Stopwatch clock;
  require_dataset(kExitCoords);
  Transport& transport = wikidata_transport();
  return guarded(kExitCoords, "coords", [&] {
    auto entries = load_dataset(config_.dataset_path);
    // Every linked QID goes into the query; only records lacking a
    // coordinate are filled.
    std::vector<Qid> wanted;
    std::set<Qid> seen;
    std::size_t pending = 0;
    for (const auto& e : entries) {
      if (!e.qid) continue;
      const Qid q = Qid::parse(*e.qid);
      if (seen.insert(q).second) wanted.push_back(q);
      if (!(e.lat && e.lon)) ++pending;
    }

    RunSummary s;
    s.stage = "coords";
    s.input_count = pending;
    std::size_t warnings = 0;
    if (pending > 0) {
      WikidataClient client(transport, config_.endpoints);
      std::map<std::string, CoordinateRecord> by_qid;
      for (const auto& rec : client.fetch_coordinates(wanted)) {
        by_qid.emplace(rec.qid.str(), rec);
      }
      warnings = client.coordinate_warnings();
      for (auto& e : entries) {
        if (!e.qid || (e.lat && e.lon)) continue;
        if (auto it = by_qid.find(*e.qid); it != by_qid.end()) {
          e.lat = it->second.lat;
          e.lon = it->second.lon;
          ++s.output_count;
        }
      }
      save_dataset(config_.dataset_path, entries);
    }
    if (warnings) {
      diag_ << "coords: skipped " << warnings << " unparseable rows\n";
    }
    s.ratios["geocoded_fraction"] = fraction(s.output_count, pending);
    s.stats["warnings"] = static_cast<double>(warnings);
    s.wall_time_s = clock.seconds();
    return s;
  });
}

RunSummary Pipeline::report() {
  Stopwatch clock;
  require_dataset(kExitReport);
  return guarded(kExitReport, "report", [&] {
    const auto entries = load_dataset(config_.dataset_path);
    const GeoPoint reference(config_.ref_lat, config_.ref_lon);
    std::vector<LinkedPlace> places;
    std::vector<GeoPoint> points;
    std::size_t linked = 0;
    for (const auto& e : entries) {
      if (!e.qid) continue;
      ++linked;
      if (!e.lat || !e.lon) continue;
      places.push_back({e.id, e.headword, *e.qid, GeoPoint(*e.lat, *e.lon),
                        e.similarity.value_or(0.0)});
      points.push_back(places.back().point);
    }

    const auto hist = distance_histogram(points, reference, config_.bucket_km);
    write_file_atomic(output_path(config_.geojson_path, "places.geojson"),
                      to_geojson(places).dump(2) + "\n");
    write_file_atomic(
        output_path(config_.histogram_path, "distance_histogram.csv"),
        hist.to_csv());
    write_file_atomic(output_path(config_.svg_path, "map.svg"),
                      render_svg_map(places, config_.svg_width));

    RunSummary s;
    s.stage = "report";
    s.input_count = linked;
    s.output_count = places.size();
    s.ratios["geocoded_fraction"] = fraction(places.size(), linked);
    s.stats["reference_lat"] = reference.lat();
    s.stats["reference_lon"] = reference.lon();
    s.stats["bucket_km"] = config_.bucket_km;
    s.wall_time_s = clock.seconds();
    return s;
  });
}

std::vector<RunSummary> Pipeline::run() {
  std::vector<RunSummary> out;
  out.push_back(ingest());
  if (config_.model_path.empty()) {
    throw StageError(kExitConfig, "no model path configured");
  }
  if (!fs::exists(config_.model_path)) out.push_back(train());
  out.push_back(classify());
  out.push_back(link());
  out.push_back(coords());
  out.push_back(report());
  return out;
}

}  // namespace gazetteer
