#include "gazetteer/http.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>
#include <strings.h>
#include <unistd.h>

#include "gazetteer/errors.hpp"
#include "gazetteer/hashing.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gazetteer {

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(text.size() * 3);
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out += ch;
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

std::string canonical_request(const HttpRequest& request) {
  std::string url = request.url;
  const auto q = url.find('?');
  if (q != std::string::npos) {
    std::vector<std::string> params;
    std::stringstream ss(url.substr(q + 1));
    std::string p;
    while (std::getline(ss, p, '&')) {
      if (!p.empty()) params.push_back(p);
    }
    std::stable_sort(params.begin(), params.end(),
                     [](const std::string& a, const std::string& b) {
                       return a.substr(0, a.find('=')) <
                              b.substr(0, b.find('='));
                     });
    url.resize(q);
    for (std::size_t i = 0; i < params.size(); ++i) {
      url += (i == 0 ? '?' : '&');
      url += params[i];
    }
  }
  std::string method = request.method;
  std::transform(method.begin(), method.end(), method.begin(), ::toupper);
  return method + "\n" + url + "\n" + sha256_hex(request.body);
}

std::string cache_key(const HttpRequest& request) {
  return sha256_hex(canonical_request(request));
}

HttpTransport::HttpTransport(std::chrono::milliseconds timeout)
    : timeout_(timeout) {}

HttpResponse HttpTransport::send(const HttpRequest& request) {
  const auto scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ProtocolError("URL without scheme: " + request.url);
  }
  auto path_start = request.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) path_start = request.url.size();
  const std::string origin = request.url.substr(0, path_start);
  std::string path = request.url.substr(path_start);
  if (path.empty()) path = "/";

  httplib::Client client(origin);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  client.set_follow_location(true);

  httplib::Headers headers;
  std::string content_type = "application/octet-stream";
  for (const auto& [k, v] : request.headers) {
    if (strcasecmp(k.c_str(), "Content-Type") == 0) {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }

  httplib::Result res;
  if (request.method == "GET") {
    res = client.Get(path, headers);
  } else if (request.method == "POST") {
    res = client.Post(path, headers, request.body, content_type);
  } else {
    throw ProtocolError("unsupported HTTP method " + request.method);
  }
  if (!res) {
    throw TransportError(request.method + " " + request.url + ": " +
                         httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

PoliteTransport::PoliteTransport(Transport& inner,
                                 std::chrono::milliseconds min_interval,
                                 RetryPolicy retry, Sleeper backoff_sleep)
    : inner_(inner),
      min_interval_(min_interval),
      retry_(retry),
      backoff_sleep_(std::move(backoff_sleep)) {
  if (!backoff_sleep_) {
    backoff_sleep_ = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  }
}

void PoliteTransport::wait_for_slot() {
  std::chrono::steady_clock::time_point start;
  {
    std::lock_guard lock(mu_);
    start = std::chrono::steady_clock::now();
    if (last_start_ && start < *last_start_ + min_interval_) {
      start = *last_start_ + min_interval_;
    }
    last_start_ = start;
  }
  std::this_thread::sleep_until(start);
}

HttpResponse PoliteTransport::send(const HttpRequest& request) {
  auto delay = retry_.base_delay;
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt >= retry_.max_retries;
    wait_for_slot();
    try {
      HttpResponse res = inner_.send(request);
      if (!retryable_status(res.status)) return res;
      if (last) {
        throw TransportError(request.url + ": HTTP " +
                             std::to_string(res.status) + " after " +
                             std::to_string(attempt + 1) + " attempts");
      }
    } catch (const TransportError&) {
      if (last) throw;
    }
    backoff_sleep_(delay);
    delay *= 2;
  }
}

CacheMode parse_cache_mode(std::string_view text) {
  if (text == "live") return CacheMode::kLive;
  if (text == "record") return CacheMode::kRecord;
  if (text == "replay") return CacheMode::kReplay;
  throw std::invalid_argument("cache mode must be live, record or replay: " +
                              std::string(text));
}

std::string to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::kLive:
      return "live";
    case CacheMode::kRecord:
      return "record";
    case CacheMode::kReplay:
      return "replay";
  }
  return "?";
}

CachingTransport::CachingTransport(CacheMode mode, std::filesystem::path dir,
                                   Transport* inner)
    : mode_(mode), dir_(std::move(dir)), inner_(inner) {
  if (mode_ != CacheMode::kReplay && inner_ == nullptr) {
    throw std::invalid_argument("live and record modes need a transport");
  }
}

std::filesystem::path CachingTransport::path_for(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<HttpResponse> CachingTransport::lookup(
    const HttpRequest& request) const {
  std::ifstream in(path_for(cache_key(request)));
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return HttpResponse{j.at("status").get<int>(),
                        j.at("body").get<std::string>()};
  } catch (const nlohmann::json::exception& err) {
    throw ProtocolError("corrupt cache entry for " + request.url + ": " +
                        err.what());
  }
}

void CachingTransport::store(const HttpRequest& request,
                             const HttpResponse& response) {
  nlohmann::ordered_json j;
  j["method"] = request.method;
  j["url"] = request.url;
  j["body_sha256"] = sha256_hex(request.body);
  j["status"] = response.status;
  j["body"] = response.body;
  j["fetched_at"] = utc_timestamp();

  std::lock_guard lock(write_mu_);
  std::filesystem::create_directories(dir_);
  const auto target = path_for(cache_key(request));
  auto tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

HttpResponse CachingTransport::send(const HttpRequest& request) {
  if (mode_ != CacheMode::kLive) {
    if (auto hit = lookup(request)) {
      ++cache_hits_;
      return *hit;
    }
    if (mode_ == CacheMode::kReplay) {
      throw ProtocolError("replay cache miss: " + request.method + " " +
                          request.url);
    }
  }
  ++network_calls_;
  HttpResponse res = inner_->send(request);
  if (mode_ == CacheMode::kRecord && res.status == 200) store(request, res);
  return res;
}

}  // namespace gazetteer
