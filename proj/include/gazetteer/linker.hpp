#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gazetteer/corpus.hpp"
#include "gazetteer/embedding.hpp"
#include "gazetteer/wikidata.hpp"

namespace gazetteer {

inline constexpr int kCandidateLimit = 5;

struct ScoredCandidate {
  WikidataCandidate candidate;
  double similarity = 0.0;
};

enum class LinkStatus {
  kLinked,
  kNoCandidates,
  kBelowMinSimilarity,
  kEmbeddingFailed,  // recorded on the entry, the batch continues
  kClientFailed,     // transport or protocol error from the Wikidata client
};

struct LinkResult {
  std::string entry_id;
  std::optional<Qid> chosen;
  double similarity = 0.0;
  std::vector<ScoredCandidate> considered;  // best first
  LinkStatus status = LinkStatus::kNoCandidates;
  std::string note;
};

// Orders by similarity (descending), then numeric QID (ascending). Throws
// std::invalid_argument when any vector's dim differs from entry_vec's.
std::vector<ScoredCandidate> rank_candidates(
    const EmbeddingVector& entry_vec,
    const std::vector<std::pair<WikidataCandidate, EmbeddingVector>>& candidates);

struct LinkOptions {
  double min_similarity = -1.0;  // -1 disables the floor
  std::size_t concurrency = 4;
};

// headword -> search (5 candidates) -> Swedish descriptions -> embed entry
// definition and each description -> rank -> pick the head. Client errors
// are rethrown with the entry id in the message; embedding errors produce a
// kEmbeddingFailed result.
LinkResult link_entry(const Entry& entry, EmbeddingProvider& provider,
                      WikidataClient& client, const LinkOptions& options = {});

// Order-preserving; never throws for per-entry failures, which are reported
// through LinkResult::status and note.
std::vector<LinkResult> link_batch(const std::vector<Entry>& entries,
                                   EmbeddingProvider& provider,
                                   WikidataClient& client,
                                   const LinkOptions& options = {});

}  // namespace gazetteer
