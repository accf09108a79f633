#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hgs/estimator.hpp"
#include "hgs/sampler.hpp"

namespace hgs {

enum class BalancerKind { static_, dynamic };

std::string_view to_string(BalancerKind kind);
BalancerKind parse_balancer_kind(std::string_view s);

inline constexpr double kDefaultImbalanceThreshold = 1.10;

/// Per-device share of the epoch's work. Shares are non-negative and sum to 1.
class WorkloadRatio {
public:
  WorkloadRatio() = default;
  // Throws ContractError unless shares are >= 0 and sum to 1 within 1e-9.
  explicit WorkloadRatio(std::vector<double> shares);

  static WorkloadRatio equal(std::size_t devices);
  // Normalizes non-negative weights with a positive sum.
  static WorkloadRatio from_weights(std::span<const double> weights);

  std::size_t size() const noexcept { return shares_.size(); }
  double operator[](std::size_t i) const { return shares_.at(i); }
  std::span<const double> shares() const noexcept { return shares_; }

  friend bool operator==(const WorkloadRatio&, const WorkloadRatio&) = default;

private:
  std::vector<double> shares_;
};

struct Assignment {
  // Per device, batch ids in the order the device trains them.
  std::vector<std::vector<BatchId>> batches;
  // Per device, summed workload of its batches (batch count when no
  // workloads were supplied).
  std::vector<std::uint64_t> assigned_workload;

  std::size_t num_devices() const noexcept { return batches.size(); }
  std::size_t num_rounds() const noexcept;
};

// True when every id in `all` appears on exactly one device and nothing else does.
bool is_partition(const Assignment& a, std::span<const BatchId> all);

/// Batch counts proportional to the shares (largest-remainder rounding, ties
/// to the lower device), dealt as consecutive runs in the given order.
/// `workloads`, when non-empty, is aligned with batch_ids.
Assignment static_assign(std::span<const BatchId> batch_ids, const WorkloadRatio& ratio,
                         std::span<const std::uint64_t> workloads = {});

/// Heaviest batch first (ties by lower batch id), each to the device with the
/// largest remaining quota share_i * total; ties go to the larger share, then
/// the lower device. Every device ends within one max batch of its quota.
Assignment dynamic_assign(std::span<const WorkloadEstimate> estimates, const WorkloadRatio& ratio);

struct DeviceFeedback {
  double total_time = 0.0;
  double workload = 0.0;
};

/// Keeps `old` when max/min device time <= threshold; otherwise shares become
/// proportional to measured throughput workload/time. Throws MeasurementError
/// when a time is not positive.
WorkloadRatio update_ratio(const WorkloadRatio& old, std::span<const DeviceFeedback> feedback,
                           double imbalance_threshold = kDefaultImbalanceThreshold);

}  // namespace hgs
