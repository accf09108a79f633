#include "hgs/cache.hpp"

#include "hgs/error.hpp"

namespace hgs {

namespace {

void check_id(const Graph& g, NodeId id) {
  if (id >= g.num_nodes()) throw RangeError("feature fetch of unknown node " + std::to_string(id));
}

}  // namespace

const FeatureCache::Entry* FeatureCache::lookup(NodeId id, const Graph& g, bool& hit) {
  check_id(g, id);
  if (auto it = index_.find(id); it != index_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    ++stats_.hits;
    hit = true;
    return &order_.front();
  }
  hit = false;
  ++stats_.misses;
  stats_.bytes_transferred += g.feature_bytes();
  if (capacity_ == 0) return nullptr;
  if (index_.size() == capacity_) {
    index_.erase(order_.back().id);
    order_.pop_back();
  }
  const auto src = g.features().row(id);
  order_.push_front(Entry{id, std::vector<float>(src.data(), src.data() + src.size())});
  index_.emplace(id, order_.begin());
  return &order_.front();
}

bool FeatureCache::access(NodeId id, const Graph& g) {
  bool hit = false;
  lookup(id, g, hit);
  return hit;
}

FeatureCache::Result FeatureCache::fetch(const Graph& g, std::span<const NodeId> input_nodes) {
  const FetchStats before = stats_;
  Result res;
  res.features.resize(static_cast<Eigen::Index>(input_nodes.size()),
                      static_cast<Eigen::Index>(g.num_features()));
  for (std::size_t i = 0; i < input_nodes.size(); ++i) {
    bool hit = false;
    const Entry* e = lookup(input_nodes[i], g, hit);
    auto dst = res.features.row(static_cast<Eigen::Index>(i));
    if (e) {
      std::copy(e->row.begin(), e->row.end(), dst.data());
    } else {
      dst = g.features().row(input_nodes[i]);
    }
  }
  res.delta.hits = stats_.hits - before.hits;
  res.delta.misses = stats_.misses - before.misses;
  res.delta.bytes_transferred = stats_.bytes_transferred - before.bytes_transferred;
  return res;
}

std::vector<NodeId> FeatureCache::recency() const {
  std::vector<NodeId> ids;
  ids.reserve(order_.size());
  for (const auto& e : order_) ids.push_back(e.id);
  return ids;
}

FeatureCache::Result fetch_uncached(const Graph& g, std::span<const NodeId> input_nodes) {
  FeatureCache none(0);
  return none.fetch(g, input_nodes);
}

}  // namespace hgs
