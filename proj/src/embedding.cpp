#include "gazetteer/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "gazetteer/corpus.hpp"
#include "gazetteer/errors.hpp"
#include "gazetteer/hashing.hpp"
#include "json.hpp"

namespace gazetteer {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw std::invalid_argument("embedding dimension must be positive");
  }
  for (double x : values_) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("embedding has a non-finite component");
    }
  }
}

EmbeddingVector EmbeddingVector::zeros(std::size_t dim) {
  return EmbeddingVector(std::vector<double>(dim, 0.0));
}

bool EmbeddingVector::is_zero() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double x) { return x == 0.0; });
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dimension mismatch: " +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(const EmbeddingVector& v) {
  double sum = 0.0;
  for (double x : v.values()) sum += x * x;
  return std::sqrt(sum);
}

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
  const double n = l2_norm(v);
  if (n == 0.0) return v;
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double d = dot(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

LocalTrigramEmbedder::LocalTrigramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
}

EmbeddingVector LocalTrigramEmbedder::embed(std::string_view text) {
  std::vector<double> counts(dim_, 0.0);
  if (text.empty()) return EmbeddingVector(std::move(counts));

  const std::vector<char32_t> cps = utf8_decode(text);
  auto add = [&](std::size_t first, std::size_t n) {
    std::string gram;
    for (std::size_t k = first; k < first + n; ++k) gram += utf8_encode(cps[k]);
    counts[fnv1a64(gram) % dim_] += 1.0;
  };
  if (cps.size() < 3) {
    add(0, cps.size());
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add(i, 3);
  }
  return l2_normalize(EmbeddingVector(std::move(counts)));
}

CachingEmbedder::CachingEmbedder(std::unique_ptr<EmbeddingProvider> inner,
                                 std::filesystem::path cache_file)
    : inner_(std::move(inner)), cache_file_(std::move(cache_file)) {
  std::ifstream in(cache_file_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EmbeddingVector v(j.at("vector").get<std::vector<double>>());
      if (v.dim() != inner_->dim()) {
        throw ParseError("cached vector has dim " + std::to_string(v.dim()),
                         line_no);
      }
      cache_.insert_or_assign(j.at("sha256").get<std::string>(), std::move(v));
    } catch (const nlohmann::json::exception& err) {
      throw ParseError(std::string("embedding cache: ") + err.what(), line_no);
    }
  }
}

std::size_t CachingEmbedder::cached_count() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

void CachingEmbedder::store(const std::string& key, const EmbeddingVector& v) {
  std::lock_guard lock(mu_);
  if (!cache_.emplace(key, v).second) return;
  if (cache_file_.has_parent_path()) {
    std::filesystem::create_directories(cache_file_.parent_path());
  }
  std::ofstream out(cache_file_, std::ios::app);
  nlohmann::json j;
  j["sha256"] = key;
  j["vector"] = std::vector<double>(v.values().begin(), v.values().end());
  out << j.dump() << '\n';
}

EmbeddingVector CachingEmbedder::embed(std::string_view text) {
  const std::string key = sha256_hex(text);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  EmbeddingVector v = inner_->embed(text);
  store(key, v);
  return v;
}

std::vector<EmbeddingVector> CachingEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::string> keys;
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      keys.push_back(sha256_hex(texts[i]));
      if (auto it = cache_.find(keys.back()); it != cache_.end()) {
        slots[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_->embed_batch(missing);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      store(keys[missing_at[k]], fresh[k]);
      slots[missing_at[k]] = std::move(fresh[k]);
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace gazetteer
