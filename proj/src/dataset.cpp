#include "gazetteer/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "gazetteer/errors.hpp"
#include "json.hpp"

namespace gazetteer {

using nlohmann::json;

namespace {

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string entry_to_json_line(const Entry& e) {
  // Key order follows the record layout rather than json's sorted default.
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["volume"] = e.volume;
  j["page"] = e.page;
  j["headword"] = e.headword;
  j["definition"] = e.definition;
  j["raw_text"] = e.raw_text;
  if (e.is_location) j["is_location"] = *e.is_location;
  if (e.qid) j["qid"] = *e.qid;
  if (e.similarity) j["similarity"] = *e.similarity;
  if (e.lat) j["lat"] = *e.lat;
  if (e.lon) j["lon"] = *e.lon;
  if (e.link_note) j["link_note"] = *e.link_note;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Entry entry_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("malformed record: ") + err.what(), line_no);
  }
  if (!j.is_object()) throw ParseError("record is not an object", line_no);
  Entry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.volume = j.at("volume").get<int>();
    e.page = j.at("page").get<int>();
    e.headword = j.at("headword").get<std::string>();
    e.definition = j.at("definition").get<std::string>();
    e.raw_text = j.at("raw_text").get<std::string>();
    e.is_location = get_optional<bool>(j, "is_location");
    e.qid = get_optional<std::string>(j, "qid");
    e.similarity = get_optional<double>(j, "similarity");
    e.lat = get_optional<double>(j, "lat");
    e.lon = get_optional<double>(j, "lon");
    e.link_note = get_optional<std::string>(j, "link_note");
  } catch (const json::exception& err) {
    throw ParseError(std::string("bad record field: ") + err.what(), line_no);
  }
  if (e.id.empty()) throw ParseError("empty id", line_no);
  if (e.headword.empty()) throw ParseError("empty headword", line_no);
  if (utf8_length(e.definition) > kDefinitionLimit) {
    throw ParseError("definition longer than 200 characters", line_no);
  }
  return e;
}

void write_dataset(std::ostream& out, const std::vector<Entry>& entries) {
  for (const Entry& e : entries) out << entry_to_json_line(e) << '\n';
}

std::vector<Entry> read_dataset(std::istream& in) {
  std::vector<Entry> entries;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Entry e = entry_from_json_line(line, line_no);
    if (!ids.insert(e.id).second) {
      throw ParseError("duplicate id " + e.id, line_no);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot replace " + path.string() + ": " +
                             ec.message());
  }
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<Entry>& entries) {
  std::ostringstream out;
  write_dataset(out, entries);
  write_file_atomic(path, out.str());
}

std::vector<Entry> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  return read_dataset(in);
}

}  // namespace gazetteer
