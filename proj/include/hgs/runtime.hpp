#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hgs/balancer.hpp"
#include "hgs/cache.hpp"
#include "hgs/estimator.hpp"
#include "hgs/graph.hpp"
#include "hgs/model.hpp"
#include "hgs/sampler.hpp"

namespace hgs {

enum class DeviceKind { host, accelerator };
enum class Protocol { standard, unified };
enum class ClockMode { simulated, wallclock };

std::string_view to_string(DeviceKind kind);
std::string_view to_string(Protocol p);
std::string_view to_string(ClockMode m);
DeviceKind parse_device_kind(std::string_view s);
Protocol parse_protocol(std::string_view s);
ClockMode parse_clock_mode(std::string_view s);

/// Abstract training device. Throughputs price the simulated clock; the host
/// link models main memory, the accelerator link models PCIe.
struct DeviceProfile {
  DeviceKind kind = DeviceKind::host;
  double aggregation_throughput = 1e8;  // aggregations / s
  double flop_throughput = 1e10;        // multiply-adds / s
  double fetch_bandwidth = 1e10;        // bytes / s
  std::size_t processes = 1;
  // Accelerators only; unset means cache_fraction * |V|.
  std::optional<std::size_t> cache_capacity;
  // Wall-clock mode: accelerator phase times are divided by this.
  double emulation_speedup = 1.0;

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

struct ProtocolConfig {
  Protocol protocol = Protocol::unified;
  BalancerKind balancer = BalancerKind::dynamic;
  bool cache_enabled = true;
  double cache_fraction = 0.1;
  ClockMode mode = ClockMode::simulated;
  std::size_t epochs = 1;
  std::size_t batch_size = 4096;
  double lr = 0.01;
  OptimizerKind optimizer = OptimizerKind::sgd;
  SamplerConfig sampler;
  ModelKind model = ModelKind::gcn;
  std::size_t hidden_dim = 128;
  std::vector<DeviceProfile> devices;
  std::uint64_t seed = 0;
  double imbalance_threshold = kDefaultImbalanceThreshold;
  double sample_cost_coefficient = 0.1;
  // Leading fraction of a seeded node permutation used as training seeds.
  double train_fraction = 1.0;
  // When false the ratio from epoch 0 is kept for every epoch.
  bool rebalance = true;

  // Throws ConfigError on a contradiction.
  void validate() const;
  std::size_t num_accelerators() const noexcept;

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct DeviceEpochStats {
  double share = 0.0;
  double sample_time = 0.0;
  double fetch_time = 0.0;
  double compute_time = 0.0;
  double total_time = 0.0;
  std::uint64_t processed_workload = 0;
  std::size_t batches = 0;
  FetchStats fetch;  // this epoch only
  FetchStats cache;  // cumulative cache counters at epoch end

  friend bool operator==(const DeviceEpochStats&, const DeviceEpochStats&) = default;
};

// What the host role collects at the end of an epoch.
struct EpochProfile {
  std::size_t epoch = 0;
  std::vector<DeviceEpochStats> devices;
  double loss = 0.0;
  WorkloadRatio ratio;
  Assignment assignment;

  // Devices run concurrently: the slowest one bounds the epoch.
  double epoch_time() const noexcept;
  // max/min total time over devices that processed work; 1 with fewer than two.
  double imbalance() const noexcept;
};

struct DeviceTimes {
  double sample_time = 0.0;
  double fetch_time = 0.0;
  double compute_time = 0.0;
  double total_time = 0.0;
};

struct SimulationParams {
  double sample_cost_coefficient = 0.1;
  // Price every device as a single serialized process.
  bool serialize = false;
};

/// Simulated clock. Per device: compute = sum flops / flop_throughput,
/// fetch = sum fetch_bytes / fetch_bandwidth, sample = sum aggregations *
/// coefficient / aggregation_throughput. One process serializes the phases;
/// two or more overlap fetch with compute. estimates and fetch_bytes are
/// indexed by batch id.
std::vector<DeviceTimes> simulate_times(const Assignment& assignment,
                                        std::span<const WorkloadEstimate> estimates,
                                        std::span<const DeviceProfile> devices,
                                        std::span<const std::uint64_t> fetch_bytes,
                                        const SimulationParams& params = {});

// Ratio the protocol actually uses: standard splits evenly over accelerators.
WorkloadRatio effective_ratio(const ProtocolConfig& cfg, const WorkloadRatio& requested);

/// Rebalances from a profile. Devices that received no batch keep their share
/// and the others are updated among themselves.
WorkloadRatio update_ratio(const WorkloadRatio& old, const EpochProfile& profile,
                           double imbalance_threshold = kDefaultImbalanceThreshold);

struct EpochResult {
  ModelParams params;
  EpochProfile profile;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochProfile> profiles;
};

/// Owns the state that lives across epochs (device caches, optimizer) and
/// runs the synchronous rounds of the unified or standard protocol.
class Trainer {
public:
  Trainer(ProtocolConfig cfg, const Graph& graph);

  const ProtocolConfig& config() const noexcept { return cfg_; }
  std::span<const NodeId> train_ids() const noexcept { return train_ids_; }
  std::span<const std::size_t> layer_dims() const noexcept { return dims_; }
  ModelParams initial_params() const;
  std::uint64_t batch_seed(std::size_t epoch, BatchId batch) const;
  std::uint64_t epoch_seed(std::size_t epoch) const;
  // The epoch's sampled batches, indexed by batch id.
  std::vector<MiniBatch> sample_epoch(std::size_t epoch) const;
  const FeatureCache* cache(std::size_t device) const;

  /// Partition, estimate, assign, then synchronous rounds: each device with
  /// work left trains one batch, the round's gradients are averaged weighted
  /// by seed count in device order, and one optimizer step is applied.
  EpochResult run_epoch(const ModelParams& params, const WorkloadRatio& ratio, std::size_t epoch);

  /// Epoch 0 runs at equal shares; later epochs use the ratio rebalanced from
  /// the previous profile.
  TrainResult train();

private:
  struct BatchOutcome;

  BatchOutcome process_batch(std::size_t device, const MiniBatch& batch,
                             const ModelParams& params);

  EpochResult run_simulated(const ModelParams& params, const WorkloadRatio& ratio,
                            std::size_t epoch, std::vector<MiniBatch> batches,
                            std::vector<WorkloadEstimate> estimates, Assignment assignment);
  EpochResult run_wallclock(const ModelParams& params, const WorkloadRatio& ratio,
                            std::size_t epoch, std::vector<MiniBatch> batches,
                            std::vector<WorkloadEstimate> estimates, Assignment assignment);

  ProtocolConfig cfg_;
  const Graph& graph_;
  std::vector<std::size_t> dims_;
  std::vector<NodeId> train_ids_;
  std::vector<std::unique_ptr<FeatureCache>> caches_;
  std::unique_ptr<Optimizer> optimizer_;
};

TrainResult train(const ProtocolConfig& cfg, const Graph& graph);

}  // namespace hgs
