#include "hgs/balancer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hgs/error.hpp"

namespace hgs {

std::string_view to_string(BalancerKind kind) {
  return kind == BalancerKind::static_ ? "static" : "dynamic";
}

BalancerKind parse_balancer_kind(std::string_view s) {
  if (s == "static") return BalancerKind::static_;
  if (s == "dynamic") return BalancerKind::dynamic;
  throw ContractError("unknown balancer \"" + std::string(s) + "\"");
}

WorkloadRatio::WorkloadRatio(std::vector<double> shares) : shares_(std::move(shares)) {
  if (shares_.empty()) throw ContractError("a ratio needs at least one device");
  double sum = 0.0;
  for (double s : shares_) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ContractError("shares must be finite and >= 0");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractError("shares must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

WorkloadRatio WorkloadRatio::equal(std::size_t devices) {
  if (devices == 0) throw ContractError("a ratio needs at least one device");
  return WorkloadRatio(std::vector<double>(devices, 1.0 / static_cast<double>(devices)));
}

WorkloadRatio WorkloadRatio::from_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw ContractError("weights must have a positive sum");
  std::vector<double> shares;
  for (double w : weights) shares.push_back(w / sum);
  return WorkloadRatio(std::move(shares));
}

std::size_t Assignment::num_rounds() const noexcept {
  std::size_t r = 0;
  for (const auto& q : batches) r = std::max(r, q.size());
  return r;
}

bool is_partition(const Assignment& a, std::span<const BatchId> all) {
  std::vector<BatchId> seen;
  for (const auto& q : a.batches) seen.insert(seen.end(), q.begin(), q.end());
  std::vector<BatchId> want(all.begin(), all.end());
  std::sort(seen.begin(), seen.end());
  std::sort(want.begin(), want.end());
  return seen == want && std::adjacent_find(seen.begin(), seen.end()) == seen.end();
}

Assignment static_assign(std::span<const BatchId> batch_ids, const WorkloadRatio& ratio,
                         std::span<const std::uint64_t> workloads) {
  if (!workloads.empty() && workloads.size() != batch_ids.size()) {
    throw ContractError("workloads must align with batch ids");
  }
  const std::size_t k = ratio.size();
  const std::size_t n = batch_ids.size();
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = ratio[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
    given += counts[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; given < n; ++j, ++given) ++counts[remainders[j % k].second];
  // Rounding noise on the floors can overshoot; take back from the end.
  for (std::size_t i = k; given > n && i-- > 0;) {
    while (given > n && counts[i] > 0) {
      --counts[i];
      --given;
    }
  }

  Assignment a;
  a.batches.resize(k);
  a.assigned_workload.assign(k, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t c = 0; c < counts[i]; ++c, ++pos) {
      a.batches[i].push_back(batch_ids[pos]);
      a.assigned_workload[i] += workloads.empty() ? 1 : workloads[pos];
    }
  }
  return a;
}

Assignment dynamic_assign(std::span<const WorkloadEstimate> estimates, const WorkloadRatio& ratio) {
  const std::size_t k = ratio.size();
  std::vector<const WorkloadEstimate*> order;
  order.reserve(estimates.size());
  double total = 0.0;
  for (const auto& e : estimates) {
    order.push_back(&e);
    total += static_cast<double>(e.aggregations);
  }
  std::sort(order.begin(), order.end(), [](const WorkloadEstimate* a, const WorkloadEstimate* b) {
    return a->aggregations != b->aggregations ? a->aggregations > b->aggregations
                                              : a->batch_id < b->batch_id;
  });

  std::vector<double> remaining(k);
  for (std::size_t i = 0; i < k; ++i) remaining[i] = ratio[i] * total;

  Assignment a;
  a.batches.resize(k);
  a.assigned_workload.assign(k, 0);
  for (const WorkloadEstimate* e : order) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (remaining[i] > remaining[best] ||
          (remaining[i] == remaining[best] && ratio[i] > ratio[best])) {
        best = i;
      }
    }
    a.batches[best].push_back(e->batch_id);
    a.assigned_workload[best] += e->aggregations;
    remaining[best] -= static_cast<double>(e->aggregations);
  }
  return a;
}

WorkloadRatio update_ratio(const WorkloadRatio& old, std::span<const DeviceFeedback> feedback,
                           double imbalance_threshold) {
  if (feedback.size() != old.size()) {
    throw ContractError("feedback must cover every device of the ratio");
  }
  double t_min = 0.0;
  double t_max = 0.0;
  for (std::size_t i = 0; i < feedback.size(); ++i) {
    const double t = feedback[i].total_time;
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw MeasurementError("device " + std::to_string(i) + " reported non-positive time " +
                             std::to_string(t));
    }
    if (feedback[i].workload < 0.0) {
      throw MeasurementError("device " + std::to_string(i) + " reported negative workload");
    }
    t_min = i == 0 ? t : std::min(t_min, t);
    t_max = i == 0 ? t : std::max(t_max, t);
  }
  if (t_max / t_min <= imbalance_threshold) return old;
  std::vector<double> throughput;
  for (const auto& f : feedback) throughput.push_back(f.workload / f.total_time);
  return WorkloadRatio::from_weights(throughput);
}

}  // namespace hgs
