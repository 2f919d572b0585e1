#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gazetteer {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Sends one request. Implementations throw TransportError when no response
// was received; any HTTP status is returned as-is.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string url_encode(std::string_view text);

// "METHOD\nURL-with-sorted-query\nsha256(body)"; the cache key is its hash.
std::string canonical_request(const HttpRequest& request);
std::string cache_key(const HttpRequest& request);

// Network transport over cpp-httplib, http and https.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::milliseconds timeout =
                             std::chrono::seconds(30));
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::chrono::milliseconds timeout_;
};

struct RetryPolicy {
  int max_retries = 3;                          // after the first attempt
  std::chrono::milliseconds base_delay{1000};   // doubled on each retry
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Spaces request starts at least `min_interval` apart (shared by all
// threads using this instance) and retries transport errors and HTTP
// 429/5xx with exponential backoff.
class PoliteTransport final : public Transport {
 public:
  PoliteTransport(Transport& inner,
                  std::chrono::milliseconds min_interval =
                      std::chrono::milliseconds(100),
                  RetryPolicy retry = {}, Sleeper backoff_sleep = {});
  HttpResponse send(const HttpRequest& request) override;

 private:
  void wait_for_slot();

  Transport& inner_;
  std::chrono::milliseconds min_interval_;
  RetryPolicy retry_;
  Sleeper backoff_sleep_;
  std::mutex mu_;
  std::optional<std::chrono::steady_clock::time_point> last_start_;
};

enum class CacheMode { kLive, kRecord, kReplay };

CacheMode parse_cache_mode(std::string_view text);
std::string to_string(CacheMode mode);

// Record/replay layer. One JSON file per request key below `dir`.
//   live:   pass through, cache untouched;
//   record: serve cached responses, fetch and store misses (200 only);
//   replay: serve cached responses, a miss is a ProtocolError; the inner
//           transport is never called.
class CachingTransport final : public Transport {
 public:
  CachingTransport(CacheMode mode, std::filesystem::path dir,
                   Transport* inner);
  HttpResponse send(const HttpRequest& request) override;

  CacheMode mode() const { return mode_; }
  std::size_t network_calls() const { return network_calls_; }
  std::size_t cache_hits() const { return cache_hits_; }

  // Stores a response as if it had been recorded.
  void store(const HttpRequest& request, const HttpResponse& response);
  std::optional<HttpResponse> lookup(const HttpRequest& request) const;

 private:
  std::filesystem::path path_for(const std::string& key) const;

  CacheMode mode_;
  std::filesystem::path dir_;
  Transport* inner_;
  std::mutex write_mu_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace gazetteer
