#pragma once

#include <cstdint>
#include <span>

#include "hgs/model.hpp"
#include "hgs/sampler.hpp"

namespace hgs {

// Pre-computed cost of one mini-batch.
struct WorkloadEstimate {
  BatchId batch_id = 0;
  // Accumulate terms over all blocks; the balancer's sort key.
  std::uint64_t aggregations = 0;
  // Aggregation terms times feature width plus dense multiply-adds.
  std::uint64_t flops = 0;
  // Rows of input features the first layer reads.
  std::uint64_t input_rows = 0;
  // Edges the sampler emitted.
  std::uint64_t sampled_edges = 0;

  friend bool operator==(const WorkloadEstimate&, const WorkloadEstimate&) = default;
};

/// Counts the work the forward pass will do on `batch`: per layer, one
/// aggregation per edge plus (GCN only) one self term per dst row, and
/// num_dst * in_dim * out_dim multiply-adds per weight matrix.
WorkloadEstimate estimate(const MiniBatch& batch, std::span<const std::size_t> layer_dims,
                          ModelKind kind);

}  // namespace hgs
