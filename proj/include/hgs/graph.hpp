#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hgs/tensor.hpp"

namespace hgs {

using NodeId = std::uint32_t;

/// Immutable CSR graph with dense node features and class labels.
///
/// Row v of the adjacency lists the nodes v aggregates from. Rows are sorted
/// ascending and duplicate-free; self-loops are never stored. Feature rows are
/// 32-bit reals, so one node costs `feature_bytes()` to move.
class Graph {
public:
  Graph() = default;

  // Validates every invariant; throws ParameterError on violation.
  Graph(std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx, Matrix features,
        std::vector<std::int32_t> labels, std::size_t num_classes);

  std::size_t num_nodes() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t num_edges() const noexcept { return col_idx_.size(); }
  std::size_t num_features() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t feature_bytes() const noexcept { return num_features() * sizeof(float); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const NodeId> col_idx() const noexcept { return col_idx_; }
  const Matrix& features() const noexcept { return features_; }
  std::span<const std::int32_t> labels() const noexcept { return labels_; }

  // Throws RangeError when v >= num_nodes().
  std::span<const NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const { return neighbors(v).size(); }
  std::int32_t label(NodeId v) const;

  friend bool operator==(const Graph& a, const Graph& b);

private:
  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_idx_;
  Matrix features_;
  std::vector<std::int32_t> labels_;
  std::size_t num_classes_ = 0;
};

// Builds sorted, deduplicated CSR rows from (src, dst) pairs. Self-loops are
// dropped. Every id must be < num_nodes.
void build_csr(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
               std::vector<std::size_t>& row_ptr, std::vector<NodeId>& col_idx);

// Uniform [-1, 1] features and uniform labels, a pure function of seed.
Matrix random_features(std::size_t num_nodes, std::size_t num_features, std::uint64_t seed);
std::vector<std::int32_t> random_labels(std::size_t num_nodes, std::size_t num_classes,
                                        std::uint64_t seed);

struct EdgeListOptions {
  // When unset, the node count is max id + 1.
  std::optional<std::size_t> num_nodes;
  std::size_t num_features = 16;
  std::size_t num_classes = 4;
  std::uint64_t seed = 0;
  // Row-major little-endian float32, num_nodes x num_features.
  std::optional<std::filesystem::path> feature_file;
};

/// Reads "src dst" pairs, one per line. Blank lines and lines starting with
/// '#' are skipped. Throws ParseError (with line number), RangeError or IoError.
Graph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& opts);

// Same as load_edge_list, from an in-memory buffer.
Graph parse_edge_list(std::string_view text, const EdgeListOptions& opts);

Matrix load_feature_file(const std::filesystem::path& path, std::size_t num_nodes,
                         std::size_t num_features);
void save_feature_file(const std::filesystem::path& path, const Matrix& features);

enum class SyntheticKind { uniform, power_law };

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view s);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::uniform;
  std::size_t num_nodes = 1000;
  std::size_t avg_degree = 10;
  std::size_t num_features = 16;
  std::size_t num_classes = 4;
  std::uint64_t seed = 0;
};

// Exponent of the power-law degree distribution.
inline constexpr double kPowerLawExponent = 2.1;

/// uniform: every node has exactly avg_degree distinct out-neighbors.
/// power_law: degrees follow P(k) ~ k^-2.1 on [1, n-1], rescaled so the mean
/// is close to avg_degree, then capped at n-1. Neighbors are drawn uniformly.
/// Throws ParameterError unless num_nodes >= 1 and avg_degree < num_nodes.
Graph generate_synthetic(const SyntheticSpec& spec);

}  // namespace hgs
