#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hgs/graph.hpp"

namespace hgs {

using BatchId = std::uint32_t;

// One message: row `src` of the layer input feeds row `dst` of the output.
struct Edge {
  std::uint32_t src;
  std::uint32_t dst;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One layer of a sampled computational graph.
///
/// The first `num_dst` entries of `src_nodes` are the output rows, so a dst
/// row always has its own input at the same index. Edges are sorted by
/// (dst, src) and unique.
struct Block {
  std::vector<NodeId> src_nodes;
  std::size_t num_dst = 0;
  std::vector<Edge> edges;

  std::size_t num_src() const noexcept { return src_nodes.size(); }
  std::span<const NodeId> dst_nodes() const noexcept {
    return std::span<const NodeId>(src_nodes).first(num_dst);
  }

  friend bool operator==(const Block&, const Block&) = default;
};

/// A sampled mini-batch. Blocks are input-layer-first; the loss rows are the
/// first `seeds.size()` outputs of the last block.
struct MiniBatch {
  BatchId batch_id = 0;
  std::vector<NodeId> seeds;
  std::vector<Block> blocks;
  std::vector<std::int32_t> labels;

  std::size_t num_layers() const noexcept { return blocks.size(); }
  // Rows whose features the first layer reads.
  std::span<const NodeId> input_nodes() const noexcept {
    return blocks.empty() ? std::span<const NodeId>(seeds)
                          : std::span<const NodeId>(blocks.front().src_nodes);
  }
  std::size_t num_edges() const noexcept;

  friend bool operator==(const MiniBatch&, const MiniBatch&) = default;
};

enum class SamplerKind { neighbor, shadow };

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::neighbor;
  // Listed input-layer-first: the seed hop uses the last entry.
  std::vector<std::size_t> fanouts{15, 10, 5};
  // Model layers for shadow sampling; neighbor sampling uses fanouts.size().
  std::size_t model_depth = 5;

  // Throws ContractError on an empty fanout list, a zero fanout or depth.
  void validate() const;
  std::size_t num_layers() const noexcept {
    return kind == SamplerKind::neighbor ? fanouts.size() : model_depth;
  }

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// Shuffles train_ids with a seeded Fisher-Yates pass and cuts the result into
/// chunks of batch_size (the last may be short).
std::vector<std::vector<NodeId>> partition_seeds(std::span<const NodeId> train_ids,
                                                 std::size_t batch_size,
                                                 std::uint64_t epoch_seed);

/// Layer-wise uniform neighbor sampling without replacement.
///
/// Each frontier node draws min(degree, fanout) distinct neighbors from a
/// stream keyed by (seed, hop, node), so a node's draw does not depend on
/// which other nodes share the frontier. New nodes are appended to the
/// frontier once, in first-seen order.
MiniBatch neighbor_sample(const Graph& g, std::span<const NodeId> seeds,
                          std::span<const std::size_t> fanouts, std::uint64_t seed);

/// ShaDow-style sampling: gather the node set reached by fanouts.size() hops
/// of neighbor sampling, induce all graph edges inside it, and emit
/// model_depth identical blocks over the induced subgraph. Seeds lead the
/// node set. Seeds must be distinct.
MiniBatch shadow_sample(const Graph& g, std::span<const NodeId> seeds,
                        std::span<const std::size_t> fanouts, std::size_t model_depth,
                        std::uint64_t seed);

// Dispatches on cfg.kind.
MiniBatch sample(const Graph& g, std::span<const NodeId> seeds, const SamplerConfig& cfg,
                 std::uint64_t seed);

/// Disjoint union of batches with the same depth: every part keeps its own
/// rows, so the merged batch computes exactly what the parts compute
/// separately. Seeds and labels are concatenated in part order.
MiniBatch merge_batches(std::span<const MiniBatch> parts, BatchId batch_id = 0);

// Throws ContractError naming the first broken structural invariant.
void validate_batch(const MiniBatch& batch);

}  // namespace hgs
