#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazetteer/embedding.hpp"
#include "gazetteer/http.hpp"
#include "gazetteer/wikidata.hpp"
#include "json.hpp"

namespace gazetteer {

// Process exit codes, one per stage.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIngest = 2,
  kExitTrain = 3,
  kExitClassify = 4,
  kExitLink = 5,
  kExitCoords = 6,
  kExitReport = 7,
};

class StageError : public std::runtime_error {
 public:
  StageError(int exit_code, const std::string& what)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct PipelineConfig {
  std::filesystem::path raw_dir;
  std::string page_pattern = "{volume}/{page}.txt";
  std::filesystem::path dataset_path;
  std::filesystem::path model_path;
  std::filesystem::path annotations_path;

  std::string embed_provider = "local";  // local | remote
  std::string embed_url;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::filesystem::path embed_cache;  // empty: no cache
  int embed_timeout_ms = 30000;

  WikidataEndpoints endpoints;
  CacheMode cache_mode = CacheMode::kRecord;
  std::filesystem::path cache_dir = "wikidata-cache";
  int min_interval_ms = 100;
  double min_similarity = -1.0;

  double ref_lat = 62.0;
  double ref_lon = 15.0;
  double bucket_km = 500.0;
  std::filesystem::path geojson_path;    // default: <dataset dir>/places.geojson
  std::filesystem::path histogram_path;  // default: <dataset dir>/distance_histogram.csv
  std::filesystem::path svg_path;        // default: <dataset dir>/map.svg
  int svg_width = 1600;

  std::size_t concurrency = 4;
};

struct RunSummary {
  std::string stage;
  std::size_t input_count = 0;
  std::size_t output_count = 0;
  std::size_t error_count = 0;
  double wall_time_s = 0.0;
  std::map<std::string, double> ratios;  // all in [0, 1]
  std::map<std::string, double> stats;

  nlohmann::ordered_json to_json() const;
};

std::string summary_table(const std::vector<RunSummary>& summaries);

// Runs pipeline stages over one evolving dataset. Every stage reads the
// dataset, enriches it and replaces it atomically; on a fatal error the
// dataset is left untouched and a StageError carrying the stage's exit code
// is thrown. Diagnostics go to `diag`.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::ostream& diag);
  ~Pipeline();

  // Test seams. The provider replaces the one built from config; the
  // transport replaces the network layer below the record/replay cache.
  void set_embedding_provider(std::unique_ptr<EmbeddingProvider> provider);
  void set_network_transport(Transport* transport);

  RunSummary ingest();
  RunSummary train();
  // Writes to `out` when given, otherwise back to the dataset.
  RunSummary classify(const std::optional<std::filesystem::path>& out = {});
  RunSummary link();
  RunSummary coords();
  RunSummary report();

  // ingest -> train (when no model file exists) -> classify -> link ->
  // coords -> report.
  std::vector<RunSummary> run();

  const PipelineConfig& config() const { return config_; }
  // Requests that reached the network layer (always 0 in replay mode).
  std::size_t network_calls() const;

 private:
  EmbeddingProvider& provider();
  Transport& wikidata_transport();
  void require_dataset(int exit_code) const;
  std::filesystem::path output_path(const std::filesystem::path& configured,
                                    const char* fallback) const;

  PipelineConfig config_;
  std::ostream& diag_;
  std::unique_ptr<EmbeddingProvider> provider_;
  Transport* network_override_ = nullptr;
  std::unique_ptr<Transport> http_;
  std::unique_ptr<Transport> polite_;
  std::unique_ptr<CachingTransport> cache_;
};

}  // namespace gazetteer
