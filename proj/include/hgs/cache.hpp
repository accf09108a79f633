#pragma once

#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "hgs/graph.hpp"

namespace hgs {

struct FetchStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bytes_transferred = 0;

  double hit_rate() const noexcept {
    const auto n = hits + misses;
    return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  }
  FetchStats& operator+=(const FetchStats& o) noexcept {
    hits += o.hits;
    misses += o.misses;
    bytes_transferred += o.bytes_transferred;
    return *this;
  }
  friend bool operator==(const FetchStats&, const FetchStats&) = default;
};

/// Device-resident LRU store of node feature rows.
///
/// A hit copies the cached row and promotes it; a miss reads the row from the
/// graph, charges its bytes, and inserts it (evicting the least recent entry
/// when full). Capacity 0 disables caching. Not thread-safe: one instance per
/// device worker.
class FeatureCache {
public:
  explicit FeatureCache(std::size_t capacity) : capacity_(capacity) {}

  struct Result {
    Matrix features;
    FetchStats delta;
  };

  // Rows aligned with input_nodes. Throws RangeError on an unknown id.
  Result fetch(const Graph& g, std::span<const NodeId> input_nodes);

  // Touches one id without copying features; true on a hit.
  bool access(NodeId id, const Graph& g);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return index_.size(); }
  bool contains(NodeId id) const { return index_.contains(id); }
  const FetchStats& stats() const noexcept { return stats_; }
  // Cached ids, most recent first.
  std::vector<NodeId> recency() const;

private:
  struct Entry {
    NodeId id;
    std::vector<float> row;
  };

  const Entry* lookup(NodeId id, const Graph& g, bool& hit);

  std::size_t capacity_;
  std::list<Entry> order_;  // front = most recent
  std::unordered_map<NodeId, std::list<Entry>::iterator> index_;
  FetchStats stats_;
};

/// Fetch with no cache in between: every row crosses the link.
FeatureCache::Result fetch_uncached(const Graph& g, std::span<const NodeId> input_nodes);

}  // namespace hgs
