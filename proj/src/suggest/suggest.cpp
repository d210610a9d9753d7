#include "folioseg/suggest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "folioseg/error.hpp"

namespace folioseg::suggest {

Embedder provider_embedder(provider::Provider& provider,
                           std::function<provider::ImageInput(const std::string& folio_id)> input_for) {
  return [&provider, input_for = std::move(input_for)](const corpus::Annotation& a) {
    provider::require_capability(provider.describe(), provider::Capability::Embedding);
    return provider.embed_segment(input_for(a.folio_id), *a.mask);
  };
}

SyncReport SegmentIndex::sync(const corpus::Project& project, const Embedder& embed) {
  SyncReport report;
  std::set<std::string> live;
  for (const auto& [id, a] : project.annotations()) {
    if (!a.has_mask() || a.status == corpus::Status::Rejected) continue;
    live.insert(id);
    const auto it = entries_.find(id);
    if (it != entries_.end() && it->second.mask == *a.mask) {
      it->second.label = a.label;
      continue;
    }
    try {
      auto e = embed(a);
      require(!e.vector.empty(), ErrorCode::ProviderError, "empty embedding");
      double norm = 0.0;
      for (const double v : e.vector) norm += v * v;
      require(std::abs(std::sqrt(norm) - 1.0) <= 1e-6, ErrorCode::ProviderError, "embedding is not L2-normalized");
      const bool existed = it != entries_.end();
      entries_.insert_or_assign(id, IndexEntry{id, std::move(e), a.label, *a.mask});
      ++(existed ? report.updated : report.added);
    } catch (const Error& e) {
      if (it != entries_.end()) entries_.erase(it);
      live.erase(id);
      report.failures.emplace_back(id, e.what());
    }
  }
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (live.count(it->first)) {
      ++it;
    } else {
      it = entries_.erase(it);
      ++report.removed;
    }
  }
  return report;
}

void SegmentIndex::upsert(IndexEntry entry) {
  const auto id = entry.id;
  entries_.insert_or_assign(id, std::move(entry));
}

void SegmentIndex::erase(const std::string& id) { entries_.erase(id); }

const IndexEntry* SegmentIndex::find(const std::string& id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Neighbor> SegmentIndex::knn_unlabeled(const std::string& query_id, std::size_t k) const {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
  const auto* query = find(query_id);
  require(query != nullptr, ErrorCode::NotFound, "annotation " + query_id + " is not indexed");
  std::vector<Neighbor> all;
  for (const auto& [id, e] : entries_) {
    if (id == query_id || e.labeled()) continue;
    all.push_back({id, provider::cosine(query->embedding, e.embedding)});
  }
  const auto order = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  };
  if (all.size() > k) {
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), order);
    all.erase(all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  } else {
    std::sort(all.begin(), all.end(), order);
  }
  return all;
}

std::vector<corpus::Suggestion> SegmentIndex::propose_batch(const std::vector<std::string>& seed_ids,
                                                            double threshold) const {
  require(std::isfinite(threshold) && threshold >= -1.0 && threshold <= 1.0, ErrorCode::InvalidArgument,
          "similarity threshold must be in [-1, 1]");
  require(!seed_ids.empty(), ErrorCode::InvalidArgument, "at least one seed is required");
  std::set<std::string> seeds(seed_ids.begin(), seed_ids.end());
  std::optional<std::string> label;
  for (const auto& id : seeds) {
    const auto* e = find(id);
    require(e != nullptr, ErrorCode::NotFound, "seed " + id + " is not indexed");
    require(e->labeled(), ErrorCode::InvalidArgument, "seed " + id + " is unlabeled");
    require(!label || *label == *e->label, ErrorCode::InvalidArgument, "seeds carry different labels");
    label = e->label;
  }
  std::vector<corpus::Suggestion> out;
  for (const auto& [id, e] : entries_) {
    if (e.labeled() || seeds.count(id)) continue;
    double best = -INFINITY;
    std::string best_seed;
    for (const auto& s : seeds) {  // ascending ids: strict > keeps the lower id on ties
      const double sim = provider::cosine(entries_.at(s).embedding, e.embedding);
      if (sim > best) {
        best = sim;
        best_seed = s;
      }
    }
    if (best >= threshold) out.push_back({"", id, *label, best, best_seed, corpus::SuggestionState::Pending});
  }
  std::stable_sort(out.begin(), out.end(), [](const corpus::Suggestion& a, const corpus::Suggestion& b) {
    return a.similarity > b.similarity;
  });
  return out;
}

SegmentIndex build_index(const corpus::Project& project, const Embedder& embed, SyncReport* report) {
  SegmentIndex index;
  auto r = index.sync(project, embed);
  if (report) *report = std::move(r);
  return index;
}

}  // namespace folioseg::suggest
