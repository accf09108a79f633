#include <doctest.h>

#include <cstring>
#include <numeric>
#include <random>

#include "hgs/cache.hpp"
#include "hgs/error.hpp"
#include "oracles.hpp"

using namespace hgs;

namespace {

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("capacity zero misses everything") {
  const Graph g = testing::random_graph(20, 40, 1, 6);
  FeatureCache cache(0);
  const std::vector<NodeId> ids{3, 3, 7, 1, 3};
  const auto res = cache.fetch(g, ids);
  CHECK(res.delta.hits == 0);
  CHECK(res.delta.misses == 5);
  CHECK(res.delta.bytes_transferred == 5 * 6 * 4);
  CHECK(cache.size() == 0);
}

TEST_CASE("capacity two on a b a c b") {
  const Graph g = testing::random_graph(10, 20, 2);
  FeatureCache cache(2);
  const NodeId a = 4, b = 7, c = 9;
  std::vector<bool> hits;
  for (NodeId id : {a, b, a, c, b}) hits.push_back(cache.access(id, g));
  CHECK(hits == std::vector<bool>{false, false, true, false, false});
  CHECK(cache.stats().hits == 1);
  CHECK(cache.stats().misses == 4);
  CHECK(cache.recency() == std::vector<NodeId>{b, c});
}

TEST_CASE("a cache holding every node hits on the second pass") {
  const Graph g = testing::random_graph(50, 100, 3);
  FeatureCache cache(g.num_nodes());
  std::vector<NodeId> all(g.num_nodes());
  std::iota(all.begin(), all.end(), 0u);
  cache.fetch(g, all);
  const auto second = cache.fetch(g, all);
  CHECK(second.delta.hit_rate() == 1.0);
  CHECK(second.delta.bytes_transferred == 0);
}

TEST_CASE("hit/miss trace equals the reference LRU on random traces") {
  const Graph g = testing::random_graph(64, 100, 4, 5);
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t capacity = gen() % 12;
    const std::size_t universe = 1 + gen() % 40;
    std::vector<NodeId> trace(1 + gen() % 200);
    for (auto& id : trace) id = static_cast<NodeId>(gen() % universe);

    FeatureCache cache(capacity);
    // Split the trace over several fetch calls to exercise per-call deltas.
    FetchStats summed;
    std::size_t pos = 0;
    while (pos < trace.size()) {
      const std::size_t len = std::min<std::size_t>(1 + gen() % 30, trace.size() - pos);
      const std::span<const NodeId> part(trace.data() + pos, len);
      const FetchStats before = cache.stats();
      const auto res = cache.fetch(g, part);
      summed += res.delta;
      const auto& now = cache.stats();
      CHECK(res.delta.hits == now.hits - before.hits);
      pos += len;
    }
    const auto want = testing::lru_trace(capacity, trace);
    const auto want_hits = static_cast<std::uint64_t>(std::count(want.begin(), want.end(), true));
    CHECK(summed.hits == want_hits);
    CHECK(summed.misses == trace.size() - want_hits);
    CHECK(summed.bytes_transferred == summed.misses * g.num_features() * 4);
    CHECK(cache.size() <= capacity);

    // Element-wise comparison through the single-access path.
    FeatureCache again(capacity);
    std::vector<bool> each;
    for (NodeId id : trace) each.push_back(again.access(id, g));
    CHECK(each == want);
    const auto rec = again.recency();
    CHECK(rec.size() == again.size());
    for (NodeId id : rec) CHECK(again.contains(id));
  }
}

TEST_CASE("cached rows are bitwise identical to direct reads") {
  const Graph g = testing::random_graph(100, 300, 6, 16);
  std::mt19937_64 gen(8);
  FeatureCache cache(17);
  for (int round = 0; round < 50; ++round) {
    std::vector<NodeId> ids(1 + gen() % 40);
    for (auto& id : ids) id = static_cast<NodeId>(gen() % 60);
    const auto cached = cache.fetch(g, ids);
    const auto direct = fetch_uncached(g, ids);
    CHECK(same_bits(cached.features, direct.features));
    CHECK(direct.delta.bytes_transferred == ids.size() * 16 * 4);
  }
}

TEST_CASE("unknown ids are range errors") {
  const Graph g = testing::random_graph(10, 10, 1);
  FeatureCache cache(4);
  const std::vector<NodeId> ids{1, 10};
  CHECK_THROWS_AS(cache.fetch(g, ids), RangeError);
  CHECK_THROWS_AS(cache.access(42, g), RangeError);
}
