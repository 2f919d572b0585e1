#include "gazetteer/linker.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

#include "gazetteer/errors.hpp"

namespace gazetteer {

std::vector<ScoredCandidate> rank_candidates(
    const EmbeddingVector& entry_vec,
    const std::vector<std::pair<WikidataCandidate, EmbeddingVector>>&
        candidates) {
  std::vector<ScoredCandidate> scored;
  scored.reserve(candidates.size());
  for (const auto& [candidate, vec] : candidates) {
    scored.push_back({candidate, cosine_similarity(entry_vec, vec)});
  }
  std::sort(scored.begin(), scored.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.similarity != b.similarity) {
                return a.similarity > b.similarity;
              }
              return a.candidate.qid < b.candidate.qid;
            });
  return scored;
}

LinkResult link_entry(const Entry& entry, EmbeddingProvider& provider,
                      WikidataClient& client, const LinkOptions& options) {
  LinkResult result;
  result.entry_id = entry.id;

  std::vector<WikidataCandidate> candidates;
  std::map<Qid, std::optional<std::string>> descriptions;
  try {
    const std::string headword =
        entry.headword.empty() ? extract_headword(entry.raw_text)
                               : entry.headword;
    candidates = client.search_candidates(headword, kCandidateLimit);
    if (candidates.empty()) {
      result.status = LinkStatus::kNoCandidates;
      return result;
    }
    std::vector<Qid> qids;
    for (const auto& c : candidates) qids.push_back(c.qid);
    descriptions = client.fetch_descriptions(qids);
  } catch (const TransportError& err) {
    throw TransportError("entry " + entry.id + ": " + err.what());
  } catch (const ProtocolError& err) {
    throw ProtocolError("entry " + entry.id + ": " + err.what());
  }

  for (auto& c : candidates) {
    if (auto it = descriptions.find(c.qid); it != descriptions.end()) {
      c.description_sv = it->second;
    }
  }

  std::vector<std::pair<WikidataCandidate, EmbeddingVector>> embedded;
  try {
    std::vector<std::string> texts{entry.definition};
    for (const auto& c : candidates) {
      texts.push_back(c.description_sv.value_or(""));
    }
    auto vectors = provider.embed_batch(texts);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      embedded.emplace_back(candidates[i], vectors[i + 1]);
    }
    result.considered = rank_candidates(vectors[0], embedded);
  } catch (const std::exception& err) {
    result.status = LinkStatus::kEmbeddingFailed;
    result.note = std::string("embedding failed: ") + err.what();
    return result;
  }

  const ScoredCandidate& best = result.considered.front();
  result.similarity = best.similarity;
  if (best.similarity < options.min_similarity) {
    result.status = LinkStatus::kBelowMinSimilarity;
    result.note = "best similarity below floor";
    return result;
  }
  result.chosen = best.candidate.qid;
  result.status = LinkStatus::kLinked;
  return result;
}

std::vector<LinkResult> link_batch(const std::vector<Entry>& entries,
                                   EmbeddingProvider& provider,
                                   WikidataClient& client,
                                   const LinkOptions& options) {
  std::vector<LinkResult> results(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        results[i] = link_entry(entries[i], provider, client, options);
      } catch (const std::exception& err) {
        results[i] = LinkResult{};
        results[i].entry_id = entries[i].id;
        results[i].status = LinkStatus::kClientFailed;
        results[i].note = err.what();
      }
    }
  };
  const std::size_t n =
      std::max<std::size_t>(1, std::min(options.concurrency, entries.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace gazetteer
