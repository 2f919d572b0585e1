#include <future>
#include <stdexcept>

#include "gazetteer/embedding.hpp"
#include "gazetteer/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gazetteer {

namespace {

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("embedding URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderOptions options)
    : options_(std::move(options)) {
  if (options_.dim == 0) throw std::invalid_argument("dim must be positive");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  if (options_.batch_size == 0) options_.batch_size = 1;
  std::tie(scheme_host_port_, path_) = split_url(options_.url);
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) {
  return embed_batch({std::string(text)}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  std::vector<std::vector<std::string>> chunks;
  std::vector<std::vector<std::size_t>> chunk_at;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      slots[i] = EmbeddingVector::zeros(options_.dim);
      continue;
    }
    if (chunks.empty() || chunks.back().size() == options_.batch_size) {
      chunks.emplace_back();
      chunk_at.emplace_back();
    }
    chunks.back().push_back(texts[i]);
    chunk_at.back().push_back(i);
  }

  // At most max_in_flight requests run at once.
  for (std::size_t wave = 0; wave < chunks.size();
       wave += options_.max_in_flight) {
    const std::size_t end =
        std::min(chunks.size(), wave + options_.max_in_flight);
    std::vector<std::future<std::vector<EmbeddingVector>>> pending;
    for (std::size_t c = wave; c < end; ++c) {
      pending.push_back(std::async(std::launch::async,
                                   [this, &chunks, c] {
                                     return request(chunks[c]);
                                   }));
    }
    for (std::size_t c = wave; c < end; ++c) {
      auto vectors = pending[c - wave].get();
      for (std::size_t k = 0; k < vectors.size(); ++k) {
        slots[chunk_at[c][k]] = std::move(vectors[k]);
      }
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::request(
    const std::vector<std::string>& texts) {
  httplib::Client client(scheme_host_port_);
  const auto secs = options_.timeout.count() / 1000;
  const auto usecs = (options_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  nlohmann::json body;
  body["texts"] = texts;
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw TransportError("embedding service " + options_.url + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("embedding service returned HTTP " +
                         std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError("embedding service returned HTTP " +
                        std::to_string(res->status));
  }

  std::vector<EmbeddingVector> out;
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& vectors = j.at("vectors");
    if (!vectors.is_array() || vectors.size() != texts.size()) {
      throw ProtocolError("embedding service returned " +
                          std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts");
    }
    for (const auto& v : vectors) {
      auto values = v.get<std::vector<double>>();
      if (values.size() != options_.dim) {
        throw ProtocolError("embedding service returned dim " +
                            std::to_string(values.size()) + ", expected " +
                            std::to_string(options_.dim));
      }
      out.push_back(l2_normalize(EmbeddingVector(std::move(values))));
    }
  } catch (const nlohmann::json::exception& err) {
    throw ProtocolError(std::string("malformed embedding response: ") +
                        err.what());
  } catch (const std::invalid_argument& err) {
    throw ProtocolError(std::string("bad embedding vector: ") + err.what());
  }
  return out;
}

}  // namespace gazetteer
