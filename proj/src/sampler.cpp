#include "hgs/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "hgs/error.hpp"
#include "hgs/rng.hpp"

namespace hgs {

std::size_t MiniBatch::num_edges() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.edges.size();
  return n;
}

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::neighbor ? "neighbor" : "shadow";
}

SamplerKind parse_sampler_kind(std::string_view s) {
  if (s == "neighbor") return SamplerKind::neighbor;
  if (s == "shadow") return SamplerKind::shadow;
  throw ContractError("unknown sampler \"" + std::string(s) + "\"");
}

void SamplerConfig::validate() const {
  if (fanouts.empty()) throw ContractError("fanouts must be non-empty");
  for (auto f : fanouts) {
    if (f == 0) throw ContractError("every fanout must be >= 1");
  }
  if (kind == SamplerKind::shadow && model_depth == 0) {
    throw ContractError("model_depth must be >= 1");
  }
}

std::vector<std::vector<NodeId>> partition_seeds(std::span<const NodeId> train_ids,
                                                 std::size_t batch_size,
                                                 std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ContractError("batch_size must be >= 1");
  std::vector<NodeId> ids(train_ids.begin(), train_ids.end());
  CounterRng rng(epoch_seed, {0x5eed5});
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.below(i)]);
  }
  std::vector<std::vector<NodeId>> chunks;
  for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
    const std::size_t end = std::min(ids.size(), begin + batch_size);
    chunks.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                        ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return chunks;
}

namespace {

void check_fanouts(std::span<const std::size_t> fanouts) {
  if (fanouts.empty()) throw ContractError("fanouts must be non-empty");
  for (auto f : fanouts) {
    if (f == 0) throw ContractError("every fanout must be >= 1");
  }
}

// Distinct neighbors of v, ascending. All of them when the budget is not binding.
void draw_neighbors(const Graph& g, NodeId v, std::size_t fanout, std::uint64_t seed,
                    std::size_t hop, std::vector<NodeId>& out) {
  const auto nbrs = g.neighbors(v);
  out.clear();
  if (nbrs.size() <= fanout) {
    out.assign(nbrs.begin(), nbrs.end());
    return;
  }
  // Floyd's algorithm over positions; the fanouts are small so a linear
  // membership check beats hashing.
  CounterRng rng(seed, {0x6e62, hop, v});
  std::vector<std::size_t> pos;
  pos.reserve(fanout);
  for (std::size_t j = nbrs.size() - fanout; j < nbrs.size(); ++j) {
    const std::size_t t = rng.below(j + 1);
    pos.push_back(std::find(pos.begin(), pos.end(), t) != pos.end() ? j : t);
  }
  std::sort(pos.begin(), pos.end());
  for (auto p : pos) out.push_back(nbrs[p]);
}

std::vector<std::int32_t> seed_labels(const Graph& g, std::span<const NodeId> seeds) {
  std::vector<std::int32_t> y;
  y.reserve(seeds.size());
  for (auto s : seeds) y.push_back(g.label(s));
  return y;
}

}  // namespace

MiniBatch neighbor_sample(const Graph& g, std::span<const NodeId> seeds,
                          std::span<const std::size_t> fanouts, std::uint64_t seed) {
  check_fanouts(fanouts);
  const std::size_t layers = fanouts.size();
  MiniBatch mb;
  mb.seeds.assign(seeds.begin(), seeds.end());
  mb.labels = seed_labels(g, seeds);
  mb.blocks.resize(layers);

  std::vector<NodeId> frontier(seeds.begin(), seeds.end());
  std::vector<NodeId> picked;
  for (std::size_t hop = 0; hop < layers; ++hop) {
    const std::size_t layer = layers - 1 - hop;
    Block& block = mb.blocks[layer];
    block.num_dst = frontier.size();
    block.src_nodes = frontier;

    std::unordered_map<NodeId, std::uint32_t> index;
    index.reserve(frontier.size() * (fanouts[layer] + 1));
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      index.try_emplace(frontier[i], static_cast<std::uint32_t>(i));
    }
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      draw_neighbors(g, frontier[i], fanouts[layer], seed, hop, picked);
      const std::size_t first_edge = block.edges.size();
      for (NodeId u : picked) {
        auto [it, fresh] = index.try_emplace(u, static_cast<std::uint32_t>(block.src_nodes.size()));
        if (fresh) block.src_nodes.push_back(u);
        block.edges.push_back({it->second, static_cast<std::uint32_t>(i)});
      }
      std::sort(block.edges.begin() + static_cast<std::ptrdiff_t>(first_edge), block.edges.end(),
                [](const Edge& a, const Edge& b) { return a.src < b.src; });
    }
    frontier = block.src_nodes;
  }
  return mb;
}

MiniBatch shadow_sample(const Graph& g, std::span<const NodeId> seeds,
                        std::span<const std::size_t> fanouts, std::size_t model_depth,
                        std::uint64_t seed) {
  check_fanouts(fanouts);
  if (model_depth == 0) throw ContractError("model_depth must be >= 1");
  const std::size_t hops = fanouts.size();

  std::vector<NodeId> nodes;
  std::unordered_map<NodeId, std::uint32_t> index;
  for (NodeId s : seeds) {
    g.neighbors(s);  // range check
    if (!index.try_emplace(s, static_cast<std::uint32_t>(nodes.size())).second) {
      throw ContractError("shadow sampling needs distinct seeds");
    }
    nodes.push_back(s);
  }
  std::vector<NodeId> picked;
  for (std::size_t hop = 0; hop < hops; ++hop) {
    const std::size_t fanout = fanouts[hops - 1 - hop];
    const std::size_t frontier = nodes.size();
    for (std::size_t i = 0; i < frontier; ++i) {
      draw_neighbors(g, nodes[i], fanout, seed, hop, picked);
      for (NodeId u : picked) {
        if (index.try_emplace(u, static_cast<std::uint32_t>(nodes.size())).second) {
          nodes.push_back(u);
        }
      }
    }
  }

  Block block;
  block.src_nodes = nodes;
  block.num_dst = nodes.size();
  std::vector<std::uint32_t> srcs;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    srcs.clear();
    for (NodeId u : g.neighbors(nodes[j])) {
      if (auto it = index.find(u); it != index.end()) srcs.push_back(it->second);
    }
    std::sort(srcs.begin(), srcs.end());
    for (auto s : srcs) block.edges.push_back({s, static_cast<std::uint32_t>(j)});
  }

  MiniBatch mb;
  mb.seeds.assign(seeds.begin(), seeds.end());
  mb.labels = seed_labels(g, seeds);
  mb.blocks.assign(model_depth, block);
  return mb;
}

MiniBatch sample(const Graph& g, std::span<const NodeId> seeds, const SamplerConfig& cfg,
                 std::uint64_t seed) {
  cfg.validate();
  return cfg.kind == SamplerKind::neighbor
             ? neighbor_sample(g, seeds, cfg.fanouts, seed)
             : shadow_sample(g, seeds, cfg.fanouts, cfg.model_depth, seed);
}

MiniBatch merge_batches(std::span<const MiniBatch> parts, BatchId batch_id) {
  MiniBatch out;
  out.batch_id = batch_id;
  if (parts.empty()) return out;
  const std::size_t layers = parts.front().num_layers();
  for (const auto& p : parts) {
    if (p.num_layers() != layers) throw ContractError("merged batches must have equal depth");
    out.seeds.insert(out.seeds.end(), p.seeds.begin(), p.seeds.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  out.blocks.resize(layers);

  // (part, local row) for every output row of the current layer, in merged
  // order. All seed rows lead so the loss rows stay a prefix.
  std::vector<std::pair<std::size_t, std::uint32_t>> dst_order;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto n = static_cast<std::uint32_t>(parts[p].seeds.size());
    for (std::uint32_t i = 0; i < n; ++i) dst_order.emplace_back(p, i);
  }
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& last = parts[p].blocks.back();
    for (auto i = static_cast<std::uint32_t>(parts[p].seeds.size()); i < last.num_dst; ++i) {
      dst_order.emplace_back(p, i);
    }
  }
  for (std::size_t l = layers; l-- > 0;) {
    Block& merged = out.blocks[l];
    std::vector<std::vector<std::uint32_t>> remap(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
      remap[p].assign(parts[p].blocks[l].num_src(), 0);
    }
    std::vector<std::pair<std::size_t, std::uint32_t>> src_order = dst_order;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const Block& b = parts[p].blocks[l];
      for (auto i = static_cast<std::uint32_t>(b.num_dst); i < b.num_src(); ++i) {
        src_order.emplace_back(p, i);
      }
    }
    merged.num_dst = dst_order.size();
    merged.src_nodes.reserve(src_order.size());
    for (std::size_t k = 0; k < src_order.size(); ++k) {
      auto [p, i] = src_order[k];
      remap[p][i] = static_cast<std::uint32_t>(k);
      merged.src_nodes.push_back(parts[p].blocks[l].src_nodes[i]);
    }
    for (std::size_t p = 0; p < parts.size(); ++p) {
      for (const Edge& e : parts[p].blocks[l].edges) {
        merged.edges.push_back({remap[p][e.src], remap[p][e.dst]});
      }
    }
    std::sort(merged.edges.begin(), merged.edges.end(), [](const Edge& a, const Edge& b) {
      return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
    });
    dst_order = std::move(src_order);
  }
  return out;
}

void validate_batch(const MiniBatch& batch) {
  if (batch.blocks.empty()) throw ContractError("batch has no blocks");
  if (batch.labels.size() != batch.seeds.size()) {
    throw ContractError("labels must align with seeds");
  }
  for (std::size_t l = 0; l < batch.blocks.size(); ++l) {
    const Block& b = batch.blocks[l];
    const std::string where = "block " + std::to_string(l) + ": ";
    if (b.num_dst > b.num_src()) throw ContractError(where + "more dst than src rows");
    for (std::size_t k = 0; k < b.edges.size(); ++k) {
      const Edge& e = b.edges[k];
      if (e.src >= b.num_src() || e.dst >= b.num_dst) {
        throw ContractError(where + "edge index out of range");
      }
      if (k > 0) {
        const Edge& prev = b.edges[k - 1];
        if (std::tie(prev.dst, prev.src) >= std::tie(e.dst, e.src)) {
          throw ContractError(where + "edges must be sorted by (dst, src) and unique");
        }
      }
    }
    if (l + 1 < batch.blocks.size()) {
      const Block& next = batch.blocks[l + 1];
      if (!std::equal(b.dst_nodes().begin(), b.dst_nodes().end(), next.src_nodes.begin(),
                      next.src_nodes.end())) {
        throw ContractError(where + "dst rows must equal the next block's src rows");
      }
    }
  }
  const Block& last = batch.blocks.back();
  if (batch.seeds.size() > last.num_dst ||
      !std::equal(batch.seeds.begin(), batch.seeds.end(), last.src_nodes.begin())) {
    throw ContractError("seeds must lead the last block's dst rows");
  }
}

}  // namespace hgs
