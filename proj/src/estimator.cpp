#include "hgs/estimator.hpp"

#include <string>

#include "hgs/error.hpp"

namespace hgs {

WorkloadEstimate estimate(const MiniBatch& batch, std::span<const std::size_t> layer_dims,
                          ModelKind kind) {
  if (layer_dims.size() != batch.blocks.size() + 1) {
    throw ContractError("layer dims do not match the batch depth (" +
                        std::to_string(batch.blocks.size()) + " blocks)");
  }
  WorkloadEstimate est;
  est.batch_id = batch.batch_id;
  est.input_rows = batch.input_nodes().size();
  const std::uint64_t mats = matrices_per_layer(kind);
  for (std::size_t l = 0; l < batch.blocks.size(); ++l) {
    const Block& b = batch.blocks[l];
    const std::uint64_t in = layer_dims[l];
    const std::uint64_t out = layer_dims[l + 1];
    std::uint64_t agg = b.edges.size();
    if (kind == ModelKind::gcn) agg += b.num_dst;
    est.aggregations += agg;
    est.sampled_edges += b.edges.size();
    est.flops += agg * in + static_cast<std::uint64_t>(b.num_dst) * in * out * mats;
  }
  return est;
}

}  // namespace hgs
