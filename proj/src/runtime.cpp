#include "hgs/runtime.hpp"

#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <future>
#include <numeric>
#include <string>
#include <thread>

#include <spdlog/spdlog.h>

#include "hgs/error.hpp"
#include "hgs/logging.hpp"
#include "hgs/rng.hpp"

namespace hgs {

void ProtocolConfig::validate() const {
  if (devices.empty()) throw ConfigError("devices", "at least one device is required");
  if (protocol == Protocol::standard && num_accelerators() == 0) {
    throw ConfigError("protocol", "the standard protocol needs at least one accelerator device");
  }
  for (std::size_t d = 0; d < devices.size(); ++d) {
    const auto& dev = devices[d];
    const std::string key = "devices[" + std::to_string(d) + "]";
    if (!(dev.aggregation_throughput > 0.0) || !(dev.flop_throughput > 0.0) ||
        !(dev.fetch_bandwidth > 0.0)) {
      throw ConfigError(key, "throughputs and bandwidth must be > 0");
    }
    if (dev.processes == 0) throw ConfigError(key, "processes must be >= 1");
    if (!(dev.emulation_speedup > 0.0)) throw ConfigError(key, "emulation_speedup must be > 0");
  }
  if (epochs == 0) throw ConfigError("epochs", "must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr", "must be >= 0");
  if (!(cache_fraction >= 0.0 && cache_fraction <= 1.0)) {
    throw ConfigError("cache_fraction", "must lie in [0, 1]");
  }
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction", "must lie in (0, 1]");
  }
  if (!(imbalance_threshold >= 1.0)) throw ConfigError("imbalance_threshold", "must be >= 1");
  if (!(sample_cost_coefficient >= 0.0)) {
    throw ConfigError("sample_cost_coefficient", "must be >= 0");
  }
  if (hidden_dim == 0) throw ConfigError("hidden_dim", "must be >= 1");
  try {
    sampler.validate();
  } catch (const ContractError& e) {
    throw ConfigError("sampler", e.what());
  }
}

std::size_t ProtocolConfig::num_accelerators() const noexcept {
  return static_cast<std::size_t>(std::count_if(devices.begin(), devices.end(), [](const auto& d) {
    return d.kind == DeviceKind::accelerator;
  }));
}

struct Trainer::BatchOutcome {
  double loss = 0.0;
  Gradients grads;
  FetchStats fetch;
  double sample_time = 0.0;
  double fetch_time = 0.0;
  double compute_time = 0.0;
};

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Trainer::Trainer(ProtocolConfig cfg, const Graph& graph) : cfg_(std::move(cfg)), graph_(graph) {
  init_logging();
  cfg_.validate();
  if (graph_.num_nodes() == 0) throw ConfigError("dataset", "graph has no nodes");
  dims_ = model_dims(graph_.num_features(), cfg_.hidden_dim, graph_.num_classes(),
                     cfg_.sampler.num_layers());

  train_ids_.resize(graph_.num_nodes());
  std::iota(train_ids_.begin(), train_ids_.end(), NodeId{0});
  if (cfg_.train_fraction < 1.0) {
    CounterRng rng(cfg_.seed, {0x7a1e});
    for (std::size_t i = train_ids_.size(); i > 1; --i) {
      std::swap(train_ids_[i - 1], train_ids_[rng.below(i)]);
    }
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg_.train_fraction *
                                                 static_cast<double>(train_ids_.size()))));
    train_ids_.resize(keep);
    std::sort(train_ids_.begin(), train_ids_.end());
  }

  for (const auto& dev : cfg_.devices) {
    if (cfg_.cache_enabled && dev.kind == DeviceKind::accelerator) {
      const std::size_t cap =
          dev.cache_capacity.value_or(static_cast<std::size_t>(
              std::floor(cfg_.cache_fraction * static_cast<double>(graph_.num_nodes()))));
      caches_.push_back(std::make_unique<FeatureCache>(cap));
    } else {
      caches_.push_back(nullptr);
    }
  }
  optimizer_ = make_optimizer(cfg_.optimizer, cfg_.lr);
}

ModelParams Trainer::initial_params() const {
  return init_params(cfg_.model, dims_, derive_key(cfg_.seed, {0x30de1}));
}

std::uint64_t Trainer::epoch_seed(std::size_t epoch) const {
  return derive_key(cfg_.seed, {0xe90c, epoch});
}

std::uint64_t Trainer::batch_seed(std::size_t epoch, BatchId batch) const {
  return derive_key(cfg_.seed, {0xba7c, epoch, batch});
}

std::vector<MiniBatch> Trainer::sample_epoch(std::size_t epoch) const {
  const auto chunks = partition_seeds(train_ids_, cfg_.batch_size, epoch_seed(epoch));
  std::vector<MiniBatch> batches;
  batches.reserve(chunks.size());
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    const auto id = static_cast<BatchId>(b);
    auto& mb = batches.emplace_back(sample(graph_, chunks[b], cfg_.sampler, batch_seed(epoch, id)));
    mb.batch_id = id;
  }
  return batches;
}

const FeatureCache* Trainer::cache(std::size_t device) const { return caches_.at(device).get(); }

Trainer::BatchOutcome Trainer::process_batch(std::size_t device, const MiniBatch& batch,
                                             const ModelParams& params) {
  BatchOutcome out;
  auto t0 = Clock::now();
  FeatureCache::Result fetched = caches_[device] ? caches_[device]->fetch(graph_, batch.input_nodes())
                                                 : fetch_uncached(graph_, batch.input_nodes());
  out.fetch_time = seconds_since(t0);
  out.fetch = fetched.delta;
  t0 = Clock::now();
  const Activations acts = forward(params, batch, fetched.features);
  auto lg = loss_and_grad(params, acts, batch);
  out.compute_time = seconds_since(t0);
  out.loss = lg.loss;
  out.grads = std::move(lg.grads);
  return out;
}

EpochResult Trainer::run_epoch(const ModelParams& params, const WorkloadRatio& ratio,
                               std::size_t epoch) {
  std::vector<MiniBatch> batches = sample_epoch(epoch);
  std::vector<WorkloadEstimate> estimates;
  estimates.reserve(batches.size());
  std::vector<std::uint64_t> workloads;
  std::vector<BatchId> ids;
  for (const auto& mb : batches) {
    estimates.push_back(estimate(mb, dims_, cfg_.model));
    workloads.push_back(estimates.back().aggregations);
    ids.push_back(mb.batch_id);
  }
  const WorkloadRatio eff = effective_ratio(cfg_, ratio);
  Assignment assignment = cfg_.balancer == BalancerKind::dynamic
                              ? dynamic_assign(estimates, eff)
                              : static_assign(ids, eff, workloads);
  spdlog::debug("epoch {}: {} batches over {} rounds", epoch, batches.size(),
                assignment.num_rounds());
  EpochResult res =
      cfg_.mode == ClockMode::simulated
          ? run_simulated(params, eff, epoch, std::move(batches), std::move(estimates),
                          std::move(assignment))
          : run_wallclock(params, eff, epoch, std::move(batches), std::move(estimates),
                          std::move(assignment));
  for (std::size_t d = 0; d < caches_.size(); ++d) {
    if (caches_[d]) res.profile.devices[d].cache = caches_[d]->stats();
  }
  return res;
}

namespace {

struct RoundMerge {
  double loss_sum = 0.0;
  std::size_t samples = 0;
};

EpochProfile make_profile(std::size_t epoch, const WorkloadRatio& ratio, const Assignment& a,
                          std::span<const WorkloadEstimate> estimates) {
  EpochProfile p;
  p.epoch = epoch;
  p.ratio = ratio;
  p.assignment = a;
  p.devices.resize(a.num_devices());
  for (std::size_t d = 0; d < a.num_devices(); ++d) {
    auto& s = p.devices[d];
    s.share = ratio[d];
    s.batches = a.batches[d].size();
    for (BatchId b : a.batches[d]) s.processed_workload += estimates[b].aggregations;
  }
  return p;
}

}  // namespace

EpochResult Trainer::run_simulated(const ModelParams& params, const WorkloadRatio& ratio,
                                   std::size_t epoch, std::vector<MiniBatch> batches,
                                   std::vector<WorkloadEstimate> estimates,
                                   Assignment assignment) {
  EpochResult res{params, make_profile(epoch, ratio, assignment, estimates)};
  std::vector<std::uint64_t> fetch_bytes(batches.size(), 0);
  RoundMerge total;
  const std::size_t rounds = assignment.num_rounds();
  std::vector<Gradients> round_grads;
  for (std::size_t r = 0; r < rounds; ++r) {
    round_grads.clear();
    for (std::size_t d = 0; d < assignment.num_devices(); ++d) {
      if (r >= assignment.batches[d].size()) continue;
      const MiniBatch& mb = batches[assignment.batches[d][r]];
      BatchOutcome o = process_batch(d, mb, res.params);
      fetch_bytes[mb.batch_id] = o.fetch.bytes_transferred;
      res.profile.devices[d].fetch += o.fetch;
      total.loss_sum += o.loss * static_cast<double>(o.grads.sample_count);
      total.samples += o.grads.sample_count;
      round_grads.push_back(std::move(o.grads));
    }
    res.params = optimizer_->step(res.params, average_gradients(round_grads));
  }
  res.profile.loss = total.samples ? total.loss_sum / static_cast<double>(total.samples) : 0.0;

  const auto times = simulate_times(assignment, estimates, cfg_.devices, fetch_bytes,
                                    {cfg_.sample_cost_coefficient,
                                     cfg_.protocol == Protocol::standard});
  for (std::size_t d = 0; d < times.size(); ++d) {
    auto& s = res.profile.devices[d];
    s.sample_time = times[d].sample_time;
    s.fetch_time = times[d].fetch_time;
    s.compute_time = times[d].compute_time;
    s.total_time = times[d].total_time;
  }
  return res;
}

EpochResult Trainer::run_wallclock(const ModelParams& params, const WorkloadRatio& ratio,
                                   std::size_t epoch, std::vector<MiniBatch> batches,
                                   std::vector<WorkloadEstimate> estimates,
                                   Assignment assignment) {
  EpochResult res{params, make_profile(epoch, ratio, assignment, estimates)};
  const std::size_t devices = assignment.num_devices();
  const std::size_t rounds = assignment.num_rounds();

  // Published by the host between the two barriers of every round.
  const ModelParams* current = &res.params;
  std::vector<std::optional<BatchOutcome>> outcomes(devices);
  std::vector<std::exception_ptr> errors(devices);
  std::vector<double> busy(devices, 0.0);
  std::barrier sync(static_cast<std::ptrdiff_t>(devices + 1));

  auto worker = [&](std::size_t d) {
    const DeviceProfile& dev = cfg_.devices[d];
    const double scale = dev.kind == DeviceKind::accelerator ? 1.0 / dev.emulation_speedup : 1.0;
    const auto& queue = assignment.batches[d];
    const bool overlap = dev.processes >= 2 && cfg_.protocol == Protocol::unified;
    auto& stats = res.profile.devices[d];

    struct Prepared {
      MiniBatch batch;
      FeatureCache::Result fetched;
      double sample_time = 0.0;
      double fetch_time = 0.0;
    };
    auto prepare = [&](BatchId b) {
      Prepared p;
      auto t0 = Clock::now();
      p.batch = sample(graph_, batches[b].seeds, cfg_.sampler, batch_seed(epoch, b));
      p.batch.batch_id = b;
      p.sample_time = seconds_since(t0);
      t0 = Clock::now();
      p.fetched = caches_[d] ? caches_[d]->fetch(graph_, p.batch.input_nodes())
                             : fetch_uncached(graph_, p.batch.input_nodes());
      p.fetch_time = seconds_since(t0);
      return p;
    };

    std::future<Prepared> next;
    for (std::size_t r = 0; r < rounds; ++r) {
      sync.arrive_and_wait();
      if (r < queue.size() && !errors[d]) {
        try {
          const auto round_start = Clock::now();
          Prepared p = overlap && next.valid() ? next.get() : prepare(queue[r]);
          if (overlap && r + 1 < queue.size()) {
            next = std::async(std::launch::async, prepare, queue[r + 1]);
          }
          const auto t0 = Clock::now();
          const Activations acts = forward(*current, p.batch, p.fetched.features);
          auto lg = loss_and_grad(*current, acts, p.batch);
          const double compute = seconds_since(t0);

          BatchOutcome o;
          o.loss = lg.loss;
          o.grads = std::move(lg.grads);
          o.fetch = p.fetched.delta;
          outcomes[d] = std::move(o);
          stats.sample_time += p.sample_time * scale;
          stats.fetch_time += p.fetch_time * scale;
          stats.compute_time += compute * scale;
          stats.fetch += p.fetched.delta;
          busy[d] += seconds_since(round_start) * scale;
        } catch (...) {
          errors[d] = std::current_exception();
        }
      }
      sync.arrive_and_wait();
    }
    if (next.valid()) next.wait();
  };

  std::vector<std::jthread> workers;
  for (std::size_t d = 0; d < devices; ++d) workers.emplace_back(worker, d);

  RoundMerge total;
  std::exception_ptr failure;
  for (std::size_t r = 0; r < rounds; ++r) {
    sync.arrive_and_wait();  // params for round r are visible
    sync.arrive_and_wait();  // every active device has its outcome
    for (auto& e : errors) {
      if (e && !failure) failure = e;
    }
    if (failure) continue;
    std::vector<Gradients> round_grads;
    for (std::size_t d = 0; d < devices; ++d) {
      if (!outcomes[d]) continue;
      total.loss_sum += outcomes[d]->loss * static_cast<double>(outcomes[d]->grads.sample_count);
      total.samples += outcomes[d]->grads.sample_count;
      round_grads.push_back(std::move(outcomes[d]->grads));
      outcomes[d].reset();
    }
    res.params = optimizer_->step(res.params, average_gradients(round_grads));
    current = &res.params;
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);

  res.profile.loss = total.samples ? total.loss_sum / static_cast<double>(total.samples) : 0.0;
  for (std::size_t d = 0; d < devices; ++d) res.profile.devices[d].total_time = busy[d];
  return res;
}

TrainResult Trainer::train() {
  TrainResult out{initial_params(), {}};
  WorkloadRatio ratio = WorkloadRatio::equal(cfg_.devices.size());
  for (std::size_t e = 0; e < cfg_.epochs; ++e) {
    EpochResult er = run_epoch(out.params, ratio, e);
    spdlog::info("epoch {} loss {:.6f} time {:.6g}s imbalance {:.3f}", e, er.profile.loss,
                 er.profile.epoch_time(), er.profile.imbalance());
    out.params = std::move(er.params);
    if (cfg_.rebalance && cfg_.protocol == Protocol::unified) {
      ratio = update_ratio(er.profile.ratio, er.profile, cfg_.imbalance_threshold);
    }
    out.profiles.push_back(std::move(er.profile));
  }
  return out;
}

TrainResult train(const ProtocolConfig& cfg, const Graph& graph) {
  Trainer t(cfg, graph);
  return t.train();
}

}  // namespace hgs
