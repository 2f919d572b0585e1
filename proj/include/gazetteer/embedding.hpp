#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gazetteer {

inline constexpr std::size_t kDefaultEmbeddingDim = 384;

// Fixed-length vector of finite reals. Construction rejects NaN/Inf and empty
// input.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);
  static EmbeddingVector zeros(std::size_t dim);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  bool is_zero() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);

// Unit-length copy of v; the zero vector maps to itself.
EmbeddingVector l2_normalize(const EmbeddingVector& v);

// (a.b)/(|a||b|), clamped to [-1, 1]. Zero when either side is the zero
// vector. Throws std::invalid_argument on dimension mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;

  // Providers backed by a service override this to batch requests.
  virtual std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts);
};

// Character-trigram feature hashing. Trigrams are taken over Unicode scalar
// values of the text as given (no case folding); each trigram's UTF-8 bytes
// are hashed with FNV-1a 64 into `dim` buckets, counts are accumulated as
// term frequencies and the result is L2-normalized. Text shorter than three
// scalar values is hashed as one gram; empty text gives the zero vector.
class LocalTrigramEmbedder final : public EmbeddingProvider {
 public:
  explicit LocalTrigramEmbedder(std::size_t dim = kDefaultEmbeddingDim);

  std::string name() const override { return "local-trigram"; }
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) override;

 private:
  std::size_t dim_;
};

struct RemoteEmbedderOptions {
  std::string url;  // full endpoint URL, e.g. http://localhost:8080/embed
  std::size_t dim = kDefaultEmbeddingDim;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 32;
};

// Client for an embedding service: POST {"texts": [...]} and expect
// {"vectors": [[...], ...]}. Returned vectors are L2-normalized on receipt.
// Connection failures, timeouts and HTTP 429/5xx raise TransportError; any
// other non-200 status or a malformed body raises ProtocolError.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderOptions options);

  std::string name() const override { return "remote:" + options_.url; }
  std::size_t dim() const override { return options_.dim; }
  EmbeddingVector embed(std::string_view text) override;
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override;

 private:
  std::vector<EmbeddingVector> request(const std::vector<std::string>& texts);

  RemoteEmbedderOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

// Wraps a provider with an on-disk cache keyed by SHA-256 of the text. The
// cache file holds one {"sha256", "vector"} record per line and is appended
// to as new texts are embedded.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  CachingEmbedder(std::unique_ptr<EmbeddingProvider> inner,
                  std::filesystem::path cache_file);

  std::string name() const override { return inner_->name(); }
  std::size_t dim() const override { return inner_->dim(); }
  EmbeddingVector embed(std::string_view text) override;
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override;

  std::size_t cached_count() const;

 private:
  void store(const std::string& key, const EmbeddingVector& v);

  std::unique_ptr<EmbeddingProvider> inner_;
  std::filesystem::path cache_file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

}  // namespace gazetteer
