#include "hgs/runtime.hpp"

#include <algorithm>
#include <string>

#include "hgs/error.hpp"

namespace hgs {

std::string_view to_string(DeviceKind kind) {
  return kind == DeviceKind::host ? "host" : "accelerator";
}
std::string_view to_string(Protocol p) { return p == Protocol::standard ? "standard" : "unified"; }
std::string_view to_string(ClockMode m) {
  return m == ClockMode::simulated ? "simulated" : "wallclock";
}

DeviceKind parse_device_kind(std::string_view s) {
  if (s == "host") return DeviceKind::host;
  if (s == "accelerator") return DeviceKind::accelerator;
  throw ConfigError("kind", "unknown device kind \"" + std::string(s) + "\"");
}

Protocol parse_protocol(std::string_view s) {
  if (s == "standard") return Protocol::standard;
  if (s == "unified") return Protocol::unified;
  throw ConfigError("protocol", "unknown protocol \"" + std::string(s) + "\"");
}

ClockMode parse_clock_mode(std::string_view s) {
  if (s == "simulated") return ClockMode::simulated;
  if (s == "wallclock") return ClockMode::wallclock;
  throw ConfigError("mode", "unknown mode \"" + std::string(s) + "\"");
}

double EpochProfile::epoch_time() const noexcept {
  double t = 0.0;
  for (const auto& d : devices) t = std::max(t, d.total_time);
  return t;
}

double EpochProfile::imbalance() const noexcept {
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (const auto& d : devices) {
    if (d.batches == 0) continue;
    lo = any ? std::min(lo, d.total_time) : d.total_time;
    hi = any ? std::max(hi, d.total_time) : d.total_time;
    any = true;
  }
  return any && lo > 0.0 ? hi / lo : 1.0;
}

std::vector<DeviceTimes> simulate_times(const Assignment& assignment,
                                        std::span<const WorkloadEstimate> estimates,
                                        std::span<const DeviceProfile> devices,
                                        std::span<const std::uint64_t> fetch_bytes,
                                        const SimulationParams& params) {
  if (assignment.num_devices() != devices.size()) {
    throw ContractError("assignment and device list disagree");
  }
  std::vector<DeviceTimes> out(devices.size());
  for (std::size_t d = 0; d < devices.size(); ++d) {
    const DeviceProfile& dev = devices[d];
    double aggs = 0.0;
    double flops = 0.0;
    double bytes = 0.0;
    for (BatchId b : assignment.batches[d]) {
      if (b >= estimates.size() || b >= fetch_bytes.size()) {
        throw ContractError("batch " + std::to_string(b) + " has no cost entry");
      }
      aggs += static_cast<double>(estimates[b].aggregations);
      flops += static_cast<double>(estimates[b].flops);
      bytes += static_cast<double>(fetch_bytes[b]);
    }
    DeviceTimes& t = out[d];
    if (assignment.batches[d].empty()) continue;
    t.compute_time = flops / dev.flop_throughput;
    t.fetch_time = bytes / dev.fetch_bandwidth;
    t.sample_time = aggs * params.sample_cost_coefficient / dev.aggregation_throughput;
    const bool overlap = dev.processes >= 2 && !params.serialize;
    t.total_time = overlap ? std::max(t.compute_time, t.fetch_time) + t.sample_time
                           : t.sample_time + t.fetch_time + t.compute_time;
  }
  return out;
}

WorkloadRatio effective_ratio(const ProtocolConfig& cfg, const WorkloadRatio& requested) {
  if (requested.size() != cfg.devices.size()) {
    throw ContractError("ratio must cover every configured device");
  }
  if (cfg.protocol == Protocol::unified) return requested;
  std::vector<double> w;
  for (const auto& d : cfg.devices) w.push_back(d.kind == DeviceKind::accelerator ? 1.0 : 0.0);
  return WorkloadRatio::from_weights(w);
}

WorkloadRatio update_ratio(const WorkloadRatio& old, const EpochProfile& profile,
                           double imbalance_threshold) {
  if (profile.devices.size() != old.size()) {
    throw ContractError("profile must cover every device of the ratio");
  }
  std::vector<std::size_t> active;
  std::vector<DeviceFeedback> feedback;
  std::vector<double> sub_shares;
  double mass = 0.0;
  for (std::size_t d = 0; d < old.size(); ++d) {
    if (profile.devices[d].batches == 0) continue;
    active.push_back(d);
    feedback.push_back({profile.devices[d].total_time,
                        static_cast<double>(profile.devices[d].processed_workload)});
    sub_shares.push_back(old[d]);
    mass += old[d];
  }
  if (active.size() < 2 || !(mass > 0.0)) return old;
  // Validates the measurements even when nothing changes.
  const WorkloadRatio base = WorkloadRatio::from_weights(sub_shares);
  const WorkloadRatio sub = update_ratio(base, feedback, imbalance_threshold);
  if (sub == base) return old;
  std::vector<double> shares(old.shares().begin(), old.shares().end());
  for (std::size_t k = 0; k < active.size(); ++k) shares[active[k]] = sub[k] * mass;
  return WorkloadRatio::from_weights(shares);
}

}  // namespace hgs
