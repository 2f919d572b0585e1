#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazetteer {

// Maximum definition length in Unicode scalar values.
inline constexpr std::size_t kDefinitionLimit = 200;

struct RawPage {
  int volume = 0;
  int page_no = 0;
  std::string text;
};

// One encyclopedia article. The optional fields are filled in by later
// pipeline stages (classify, link, coords) and are absent until then.
struct Entry {
  std::string id;  // "volume:page:ordinal"
  int volume = 0;
  int page = 0;
  std::string headword;
  std::string definition;
  std::string raw_text;

  std::optional<bool> is_location;
  std::optional<std::string> qid;
  std::optional<double> similarity;
  std::optional<double> lat;
  std::optional<double> lon;
  std::optional<std::string> link_note;

  bool operator==(const Entry&) const = default;
};

struct CorpusStats {
  std::size_t entry_count = 0;
  double mean_words_per_entry = 0.0;
  double mean_chars_per_entry = 0.0;
};

// UTF-8 helpers. Invalid bytes are treated as single scalar values so that
// damaged OCR text never throws.
std::size_t utf8_length(std::string_view text);
std::string_view utf8_prefix(std::string_view text, std::size_t scalars);
std::vector<char32_t> utf8_decode(std::string_view text);
std::string utf8_encode(char32_t cp);

// First 200 scalar values, cut after the last period in that prefix when one
// exists. Idempotent.
std::string truncate_definition(std::string_view text);

// First whitespace-delimited token with trailing ",.:;" removed and any
// bracketed pronunciation hint cut off. Throws std::invalid_argument when no
// usable token remains.
std::string extract_headword(std::string_view raw_text);

// Joins "word-\nlowercase" line-end hyphenation and collapses whitespace runs
// to single spaces.
std::string clean_ocr_text(std::string_view text);

// True when `line` may open a new entry: it starts with an uppercase letter
// and a ',' or '.' occurs within its first 40 characters.
bool looks_like_entry_start(std::string_view line);

// Splits pages (sorted by volume, page_no) into entries. Entries may span
// page breaks. Text before the first detectable entry start is dropped only
// when there is no previous entry to append it to.
std::vector<Entry> segment_pages(const std::vector<RawPage>& pages);

CorpusStats corpus_stats(const std::vector<Entry>& entries);

struct PageFile {
  int volume = 0;
  int page_no = 0;
  std::filesystem::path path;
};

// Finds page files below `raw_dir` whose relative path matches `pattern`,
// where the pattern holds "{volume}" and "{page}" placeholders. The result
// is grouped by volume (ascending), each group sorted by page number, so a
// caller can stream one volume at a time. Duplicate (volume, page) pairs
// throw ParseError.
std::vector<std::vector<PageFile>> index_raw_pages(
    const std::filesystem::path& raw_dir,
    std::string_view pattern = "{volume}/{page}.txt");

// Reads the listed files. Pages that are blank after trimming are skipped.
std::vector<RawPage> read_pages(const std::vector<PageFile>& files);

}  // namespace gazetteer
