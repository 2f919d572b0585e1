#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gazetteer/corpus.hpp"

namespace gazetteer {

// Line-delimited JSON dataset, one entry record per line.

std::string entry_to_json_line(const Entry& entry);
Entry entry_from_json_line(const std::string& line, std::size_t line_no);

void write_dataset(std::ostream& out, const std::vector<Entry>& entries);
std::vector<Entry> read_dataset(std::istream& in);

// Atomic: writes to a sibling temp file and renames over `path`.
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Entry>& entries);
std::vector<Entry> load_dataset(const std::filesystem::path& path);

// Writes `contents` to `path` via temp file + rename.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace gazetteer
