#pragma once

// Embedding index over segmented instances and nearest-neighbor batch
// labeling. Search is an exact brute-force cosine scan.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "folioseg/corpus.hpp"
#include "folioseg/provider.hpp"

namespace folioseg::suggest {

struct IndexEntry {
  std::string id;
  provider::Embedding embedding;
  std::optional<std::string> label;
  geometry::BinaryMask mask;  // what the embedding was computed from
  bool labeled() const noexcept { return label.has_value(); }
};

struct Neighbor {
  std::string id;
  double similarity = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct SyncReport {
  std::size_t added = 0;
  std::size_t updated = 0;
  std::size_t removed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // annotation id, message
};

using Embedder = std::function<provider::Embedding(const corpus::Annotation&)>;

/// Embeds through a provider; `input_for` maps a folio id to its image.
Embedder provider_embedder(provider::Provider& provider,
                           std::function<provider::ImageInput(const std::string& folio_id)> input_for);

class SegmentIndex {
 public:
  /// Brings the index in line with the project: every masked, non-rejected
  /// annotation gets an entry; entries are re-embedded only when their mask
  /// changed. Embedding failures skip the entry and are reported.
  SyncReport sync(const corpus::Project& project, const Embedder& embed);

  /// Direct insertion, for callers that already hold embeddings.
  void upsert(IndexEntry entry);
  void erase(const std::string& id);

  std::size_t size() const noexcept { return entries_.size(); }
  const IndexEntry* find(const std::string& id) const;
  const std::map<std::string, IndexEntry>& entries() const noexcept { return entries_; }

  /// Top-k unlabeled entries other than the query by cosine similarity,
  /// ties by id ascending.
  std::vector<Neighbor> knn_unlabeled(const std::string& query_id, std::size_t k) const;

  /// One suggestion per unlabeled entry whose best similarity to any seed is
  /// >= threshold; the best seed (lower id on ties) is cited. Ordered by
  /// similarity descending, then target id. Ids are left empty.
  std::vector<corpus::Suggestion> propose_batch(const std::vector<std::string>& seed_ids, double threshold) const;

 private:
  std::map<std::string, IndexEntry> entries_;
};

SegmentIndex build_index(const corpus::Project& project, const Embedder& embed, SyncReport* report = nullptr);

}  // namespace folioseg::suggest
