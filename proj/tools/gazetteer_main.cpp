// gazetteer: builds a geocoded gazetteer from OCR page dumps of an
// encyclopedia.
//
//   gazetteer ingest   --raw-dir raw --dataset data/entries.jsonl
//   gazetteer train    --dataset data/entries.jsonl --annotations ann.jsonl --model-out model.json
//   gazetteer classify --dataset data/entries.jsonl --model model.json --in-place
//   gazetteer link     --dataset data/entries.jsonl --cache-mode replay
//   gazetteer coords   --dataset data/entries.jsonl
//   gazetteer report   --dataset data/entries.jsonl --geojson places.geojson --histogram hist.csv --svg map.svg
//   gazetteer run      --config pipeline.ini
//
// Settings come from an INI-style key=value file (--config), environment
// variables and flags, later sources overriding earlier ones. Summaries are
// written to stdout as JSON lines, a human-readable table and diagnostics go
// to stderr.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "gazetteer/pipeline.hpp"

namespace {

using gazetteer::PipelineConfig;
using gazetteer::RunSummary;

// Value of --config (either "--config f" or "--config=f"), empty if absent.
std::string config_file_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.starts_with("--config=")) return a.substr(9);
  }
  return {};
}

// Settings file entries as "--key value" arguments. Keys may use '_' or '-'.
std::vector<std::string> config_file_args(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) {
      throw CLI::ConversionError("sections are not supported: " + item.fullname());
    }
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key);
    for (const auto& v : item.inputs) out.push_back(v);
  }
  return out;
}

void print(const std::vector<RunSummary>& summaries) {
  for (const auto& s : summaries) std::cout << s.to_json().dump() << '\n';
  std::cout.flush();
  std::cerr << gazetteer::summary_table(summaries);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encyclopedia-to-gazetteer pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "key=value settings file");

  PipelineConfig cfg;
  std::string raw_dir, dataset, model, annotations, embed_cache, cache_dir;
  std::string geojson, histogram, svg;
  std::string cache_mode = "record";

  app.add_option("--raw-dir", raw_dir, "Directory of OCR page files")
      ->envname("GAZETTEER_RAW_DIR");
  app.add_option("--page-pattern", cfg.page_pattern,
                 "Page path pattern below raw-dir")
      ->envname("GAZETTEER_PAGE_PATTERN")
      ->capture_default_str();
  app.add_option("--dataset", dataset, "Line-delimited entry dataset")
      ->envname("GAZETTEER_DATASET");
  app.add_option("--model,--model-out", model, "Classifier model file")
      ->envname("GAZETTEER_MODEL");
  app.add_option("--annotations", annotations,
                 "Line-delimited {entry_id, label} records")
      ->envname("GAZETTEER_ANNOTATIONS");

  app.add_option("--embed-provider", cfg.embed_provider, "local or remote")
      ->check(CLI::IsMember({"local", "remote"}))
      ->envname("GAZETTEER_EMBED_PROVIDER")
      ->capture_default_str();
  app.add_option("--embed-url", cfg.embed_url, "Embedding service endpoint")
      ->envname("EMBED_URL");
  app.add_option("--embed-dim", cfg.embed_dim, "Embedding dimension")
      ->check(CLI::PositiveNumber)
      ->envname("GAZETTEER_EMBED_DIM")
      ->capture_default_str();
  app.add_option("--embed-cache", embed_cache, "On-disk embedding cache file")
      ->envname("GAZETTEER_EMBED_CACHE");
  app.add_option("--embed-timeout-ms", cfg.embed_timeout_ms)
      ->envname("GAZETTEER_EMBED_TIMEOUT_MS")
      ->capture_default_str();

  app.add_option("--cache-mode", cache_mode, "live, record or replay")
      ->check(CLI::IsMember({"live", "record", "replay"}))
      ->envname("WD_CACHE_MODE")
      ->capture_default_str();
  app.add_option("--cache-dir", cache_dir, "Wikidata response cache directory")
      ->envname("GAZETTEER_CACHE_DIR");
  app.add_option("--api-url", cfg.endpoints.api_url)
      ->envname("GAZETTEER_API_URL")
      ->capture_default_str();
  app.add_option("--sparql-url", cfg.endpoints.sparql_url)
      ->envname("GAZETTEER_SPARQL_URL")
      ->capture_default_str();
  app.add_option("--user-agent", cfg.endpoints.user_agent)
      ->envname("GAZETTEER_USER_AGENT");
  app.add_option("--min-interval-ms", cfg.min_interval_ms,
                 "Minimum spacing between live requests")
      ->check(CLI::NonNegativeNumber)
      ->envname("GAZETTEER_MIN_INTERVAL_MS")
      ->capture_default_str();
  app.add_option("--min-sim", cfg.min_similarity,
                 "Similarity floor for links (-1 disables)")
      ->check(CLI::Range(-1.0, 1.0))
      ->envname("GAZETTEER_MIN_SIM")
      ->capture_default_str();
  app.add_option("--concurrency", cfg.concurrency)
      ->check(CLI::PositiveNumber)
      ->envname("GAZETTEER_CONCURRENCY")
      ->capture_default_str();

  app.add_option("--ref-lat", cfg.ref_lat, "Reference latitude for distances")
      ->check(CLI::Range(-90.0, 90.0))
      ->envname("GAZETTEER_REF_LAT")
      ->capture_default_str();
  app.add_option("--ref-lon", cfg.ref_lon, "Reference longitude for distances")
      ->check(CLI::Range(-180.0, 180.0))
      ->envname("GAZETTEER_REF_LON")
      ->capture_default_str();
  app.add_option("--bucket-km", cfg.bucket_km, "Histogram bucket width")
      ->check(CLI::PositiveNumber)
      ->envname("GAZETTEER_BUCKET_KM")
      ->capture_default_str();
  app.add_option("--geojson", geojson)->envname("GAZETTEER_GEOJSON");
  app.add_option("--histogram", histogram)->envname("GAZETTEER_HISTOGRAM");
  app.add_option("--svg", svg)->envname("GAZETTEER_SVG");
  app.add_option("--svg-width", cfg.svg_width)
      ->check(CLI::PositiveNumber)
      ->envname("GAZETTEER_SVG_WIDTH")
      ->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Segment page dumps into entries");
  auto* train = app.add_subcommand("train", "Fit the location classifier");
  auto* classify = app.add_subcommand("classify", "Label entries as locations");
  bool in_place = false;
  std::string classify_out;
  classify->add_flag("--in-place", in_place, "Rewrite the dataset");
  classify->add_option("--out", classify_out, "Write the labelled dataset here");
  auto* link = app.add_subcommand("link", "Link locations to Wikidata items");
  auto* coords = app.add_subcommand("coords", "Fetch coordinates for links");
  auto* report = app.add_subcommand("report", "Write GeoJSON, histogram, SVG");
  auto* run = app.add_subcommand("run", "Run every stage in order");

  // Precedence is settings file, then environment, then flags. A value is
  // only handed to the parser when no later source sets the same option.
  std::set<const CLI::Option*> on_command_line, from_env;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (!a.starts_with("--")) continue;
    if (const auto* opt = app.get_option_no_throw(a.substr(0, a.find('=')))) {
      on_command_line.insert(opt);
    }
  }
  std::vector<std::string> env_args;
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_envname().empty() || opt->get_lnames().empty()) continue;
    if (on_command_line.count(opt)) continue;
    if (const char* v = std::getenv(opt->get_envname().c_str())) {
      env_args.push_back("--" + opt->get_lnames().front());
      env_args.push_back(v);
      from_env.insert(opt);
    }
  }
  std::vector<std::string> args{argv[0]};
  try {
    if (const std::string path = config_file_arg(argc, argv); !path.empty()) {
      const auto file_args = config_file_args(path);
      for (std::size_t i = 0; i < file_args.size();) {
        std::size_t next = i + 1;
        while (next < file_args.size() && !file_args[next].starts_with("--")) ++next;
        const auto* opt = app.get_option_no_throw(file_args[i]);
        if (!opt || (!on_command_line.count(opt) && !from_env.count(opt))) {
          args.insert(args.end(), file_args.begin() + i, file_args.begin() + next);
        }
        i = next;
      }
    }
  } catch (const CLI::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return gazetteer::kExitConfig;
  }
  args.insert(args.end(), env_args.begin(), env_args.end());
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gazetteer::kExitConfig;
  }

  cfg.raw_dir = raw_dir;
  cfg.dataset_path = dataset;
  cfg.model_path = model;
  cfg.annotations_path = annotations;
  cfg.embed_cache = embed_cache;
  if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
  cfg.cache_mode = gazetteer::parse_cache_mode(cache_mode);
  cfg.geojson_path = geojson;
  cfg.histogram_path = histogram;
  cfg.svg_path = svg;
  if (!cfg.embed_url.empty() && cfg.embed_provider == "local" &&
      app.get_option("--embed-provider")->count() == 0) {
    // An embedding endpoint implies the remote provider.
    cfg.embed_provider = "remote";
  }

  gazetteer::Pipeline pipeline(cfg, std::cerr);
  std::vector<RunSummary> summaries;
  try {
    if (*ingest) {
      summaries.push_back(pipeline.ingest());
    } else if (*train) {
      summaries.push_back(pipeline.train());
    } else if (*classify) {
      if (!in_place && classify_out.empty()) {
        std::cerr << "classify: pass --in-place or --out <file>\n";
        return gazetteer::kExitConfig;
      }
      std::optional<std::filesystem::path> out;
      if (!classify_out.empty()) out = classify_out;
      summaries.push_back(pipeline.classify(out));
    } else if (*link) {
      summaries.push_back(pipeline.link());
    } else if (*coords) {
      summaries.push_back(pipeline.coords());
    } else if (*report) {
      summaries.push_back(pipeline.report());
    } else if (*run) {
      summaries = pipeline.run();
    }
  } catch (const gazetteer::StageError& e) {
    print(summaries);
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    print(summaries);
    std::cerr << "error: " << e.what() << '\n';
    return gazetteer::kExitConfig;
  }
  print(summaries);
  return gazetteer::kExitOk;
}
