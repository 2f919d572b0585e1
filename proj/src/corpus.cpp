#include "gazetteer/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "gazetteer/errors.hpp"

namespace gazetteer {

namespace {

// Byte length of the UTF-8 sequence starting at text[i]; 1 for invalid or
// truncated sequences.
std::size_t sequence_length(std::string_view text, std::size_t i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  std::size_t len = 1;
  if (lead >= 0xF0 && lead <= 0xF4) {
    len = 4;
  } else if (lead >= 0xE0) {
    len = lead <= 0xEF ? 3 : 1;
  } else if (lead >= 0xC2) {
    len = 2;
  }
  if (len == 1 || i + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_upper(char32_t c) {
  if (c >= U'A' && c <= U'Z') return true;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return true;
  if (c >= 0x100 && c <= 0x137) return c % 2 == 0;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 1;
  if (c >= 0x14A && c <= 0x177) return c % 2 == 0;
  if (c == 0x178 || c == 0x179 || c == 0x17B || c == 0x17D) return true;
  if (c >= 0x391 && c <= 0x3A9) return true;
  if (c >= 0x410 && c <= 0x42F) return true;
  return false;
}

bool is_lower(char32_t c) {
  if (c >= U'a' && c <= U'z') return true;
  if (c >= 0xDF && c <= 0xFF && c != 0xF7) return true;
  if (c >= 0x100 && c <= 0x137) return c % 2 == 1;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 0;
  if (c >= 0x14A && c <= 0x177) return c % 2 == 1;
  if (c == 0x17A || c == 0x17C || c == 0x17E) return true;
  if (c >= 0x3B1 && c <= 0x3C9) return true;
  if (c >= 0x430 && c <= 0x44F) return true;
  return false;
}

char32_t first_scalar(std::string_view s) {
  if (s.empty()) return 0;
  auto cps = utf8_decode(utf8_prefix(s, 1));
  return cps.empty() ? 0 : cps.front();
}

bool ends_sentence(std::string_view line) {
  line = trim(line);
  return !line.empty() && line.back() == '.';
}

struct Line {
  std::size_t begin = 0;  // byte offsets into the volume buffer
  std::size_t end = 0;
  int page = 0;
};

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size(); i += sequence_length(text, i)) ++n;
  return n;
}

std::string_view utf8_prefix(std::string_view text, std::size_t scalars) {
  std::size_t i = 0;
  for (std::size_t n = 0; n < scalars && i < text.size(); ++n) {
    i += sequence_length(text, i);
  }
  return text.substr(0, i);
}

std::vector<char32_t> utf8_decode(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t len = sequence_length(text, i);
    const auto lead = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    switch (len) {
      case 1:
        cp = lead < 0x80 ? lead : 0xFFFD;
        break;
      case 2:
        cp = (lead & 0x1F) << 6 | (text[i + 1] & 0x3F);
        break;
      case 3:
        cp = (lead & 0x0F) << 12 | (text[i + 1] & 0x3F) << 6 |
             (text[i + 2] & 0x3F);
        break;
      default:
        cp = (lead & 0x07) << 18 | (text[i + 1] & 0x3F) << 12 |
             (text[i + 2] & 0x3F) << 6 | (text[i + 3] & 0x3F);
        break;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::string truncate_definition(std::string_view text) {
  std::string_view prefix = utf8_prefix(text, kDefinitionLimit);
  const auto period = prefix.rfind('.');
  if (period != std::string_view::npos) prefix = prefix.substr(0, period + 1);
  return std::string(prefix);
}

std::string extract_headword(std::string_view raw_text) {
  std::string_view text = trim(raw_text);
  if (text.empty()) throw std::invalid_argument("entry text is blank");
  std::string_view token = text.substr(
      0, std::find_if(text.begin(), text.end(), is_space) - text.begin());
  if (auto bracket = token.find('['); bracket != std::string_view::npos) {
    token = token.substr(0, bracket);
  }
  while (!token.empty() && std::string_view(",.:;").find(token.back()) !=
                               std::string_view::npos) {
    token.remove_suffix(1);
  }
  if (token.empty()) {
    throw std::invalid_argument("entry has no usable headword: " +
                                std::string(utf8_prefix(text, 40)));
  }
  return std::string(token);
}

std::string clean_ocr_text(std::string_view text) {
  std::string joined;
  joined.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '-' && i > 0 && !is_space(text[i - 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' ||
                                 text[j] == '\r')) {
        ++j;
      }
      if (j < text.size() && text[j] == '\n') {
        std::size_t k = j + 1;
        while (k < text.size() && is_space(text[k]) && text[k] != '\n') ++k;
        if (k < text.size() && is_lower(first_scalar(text.substr(k)))) {
          i = k - 1;
          continue;
        }
      }
    }
    joined += text[i];
  }

  std::string out;
  out.reserve(joined.size());
  bool pending_space = false;
  for (char c : joined) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

bool looks_like_entry_start(std::string_view line) {
  line = trim(line);
  if (!is_upper(first_scalar(line))) return false;
  const std::string_view window = utf8_prefix(line, 40);
  return window.find_first_of(",.") != std::string_view::npos;
}

std::vector<Entry> segment_pages(const std::vector<RawPage>& pages) {
  std::vector<Entry> entries;
  std::size_t first = 0;
  while (first < pages.size()) {
    // Entries never cross a volume boundary.
    std::size_t last = first;
    while (last < pages.size() && pages[last].volume == pages[first].volume) {
      ++last;
    }
    const int volume = pages[first].volume;

    std::string buffer;
    std::vector<Line> lines;
    for (std::size_t p = first; p < last; ++p) {
      if (!buffer.empty() && buffer.back() != '\n') buffer += '\n';
      const std::string& text = pages[p].text;
      std::size_t start = 0;
      while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        lines.push_back(
            {buffer.size() + start, buffer.size() + nl, pages[p].page_no});
        start = nl + 1;
      }
      buffer += text;
    }

    struct Open {
      std::size_t begin;
      std::size_t end;
      int page;
    };
    std::vector<Open> spans;
    bool previous_closed = true;  // previous non-blank line ended a sentence
    bool saw_blank = true;
    for (const Line& line : lines) {
      const std::string_view view(buffer.data() + line.begin,
                                  line.end - line.begin);
      if (trim(view).empty()) {
        saw_blank = true;
        continue;
      }
      const bool boundary_ok = spans.empty() || previous_closed || saw_blank;
      if (boundary_ok && looks_like_entry_start(view)) {
        spans.push_back({line.begin, line.end, line.page});
      } else if (!spans.empty()) {
        spans.back().end = line.end;
      }
      previous_closed = ends_sentence(view);
      saw_blank = false;
    }

    std::map<int, int> ordinal;
    for (const Open& span : spans) {
      const std::string_view raw =
          trim(std::string_view(buffer).substr(span.begin,
                                               span.end - span.begin));
      Entry e;
      e.volume = volume;
      e.page = span.page;
      e.id = std::to_string(volume) + ":" + std::to_string(span.page) + ":" +
             std::to_string(++ordinal[span.page]);
      e.raw_text = std::string(raw);
      e.headword = extract_headword(raw);
      e.definition = truncate_definition(clean_ocr_text(raw));
      entries.push_back(std::move(e));
    }
    first = last;
  }
  return entries;
}

CorpusStats corpus_stats(const std::vector<Entry>& entries) {
  CorpusStats stats;
  stats.entry_count = entries.size();
  if (entries.empty()) return stats;
  double words = 0;
  double chars = 0;
  for (const Entry& e : entries) {
    std::istringstream in(e.raw_text);
    std::string token;
    while (in >> token) ++words;
    chars += static_cast<double>(utf8_length(e.raw_text));
  }
  stats.mean_words_per_entry = words / static_cast<double>(entries.size());
  stats.mean_chars_per_entry = chars / static_cast<double>(entries.size());
  return stats;
}

std::vector<std::vector<PageFile>> index_raw_pages(
    const std::filesystem::path& raw_dir, std::string_view pattern) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(raw_dir)) {
    throw ParseError("raw directory not found: " + raw_dir.string());
  }

  // Placeholder positions decide capture-group order.
  const std::size_t vpos = pattern.find("{volume}");
  const std::size_t ppos = pattern.find("{page}");
  if (vpos == std::string_view::npos || ppos == std::string_view::npos) {
    throw ParseError("page pattern needs {volume} and {page}: " +
                     std::string(pattern));
  }
  std::string re;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.substr(i).starts_with("{volume}")) {
      re += "([0-9]+)";
      i += 8;
    } else if (pattern.substr(i).starts_with("{page}")) {
      re += "([0-9]+)";
      i += 6;
    } else {
      if (std::string_view(R"(\^$.|?*+()[]{})").find(pattern[i]) !=
          std::string_view::npos) {
        re += '\\';
      }
      re += pattern[i++];
    }
  }
  const std::regex matcher(re);
  const int volume_group = vpos < ppos ? 1 : 2;
  const int page_group = vpos < ppos ? 2 : 1;

  std::map<int, std::map<int, fs::path>> found;
  for (const auto& item : fs::recursive_directory_iterator(raw_dir)) {
    if (!item.is_regular_file()) continue;
    const std::string rel = item.path().lexically_relative(raw_dir)
                                .generic_string();
    std::smatch m;
    if (!std::regex_match(rel, m, matcher)) continue;
    const int volume = std::stoi(m[volume_group].str());
    const int page = std::stoi(m[page_group].str());
    if (volume <= 0 || page <= 0) {
      throw ParseError("volume and page numbers must be positive: " + rel);
    }
    auto [it, inserted] = found[volume].emplace(page, item.path());
    if (!inserted) {
      throw ParseError("duplicate page " + std::to_string(volume) + "/" +
                       std::to_string(page) + ": " + it->second.string() +
                       " and " + item.path().string());
    }
  }

  std::vector<std::vector<PageFile>> volumes;
  for (const auto& [volume, pages] : found) {
    auto& group = volumes.emplace_back();
    for (const auto& [page, path] : pages) group.push_back({volume, page, path});
  }
  return volumes;
}

std::vector<RawPage> read_pages(const std::vector<PageFile>& files) {
  std::vector<RawPage> pages;
  pages.reserve(files.size());
  for (const PageFile& f : files) {
    std::ifstream in(f.path, std::ios::binary);
    if (!in) throw ParseError("cannot read page file " + f.path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    text.erase(std::remove(text.begin(), text.end(), '\r'), text.end());
    if (trim(text).empty()) continue;
    pages.push_back({f.volume, f.page_no, std::move(text)});
  }
  return pages;
}

}  // namespace gazetteer
