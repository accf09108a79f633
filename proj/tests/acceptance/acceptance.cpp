// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "hgs/experiment.hpp"
#include "hgs/runtime.hpp"
#include "oracles.hpp"

using namespace hgs;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr double kGradientTolerance = 1e-4;
constexpr std::size_t kMinGradientBatches = 20;
constexpr double kDenseTolerance = 1e-5;
constexpr std::size_t kDenseMaxNodes = 32;
constexpr double kSyncSgdTolerance = 1e-5;
constexpr std::size_t kSyncSgdEpochs = 5;
constexpr std::size_t kSyncSgdNodes = 1000;
constexpr std::size_t kConvergenceEpoch = 2;
constexpr std::size_t kSkewTrials = 20;
constexpr double kSkewWinFraction = 0.95;
constexpr double kSkewMinCv = 0.5;
constexpr std::size_t kCacheTraces = 1000;
constexpr double kCacheTransparency = 1e-12;
constexpr double kRuntimeBudgetSeconds = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Graph synthetic(SyntheticKind kind, std::size_t n, std::size_t deg, std::uint64_t seed,
                std::size_t features = 8, std::size_t classes = 4) {
  SyntheticSpec s;
  s.kind = kind;
  s.num_nodes = n;
  s.avg_degree = deg;
  s.num_features = features;
  s.num_classes = classes;
  s.seed = seed;
  return generate_synthetic(s);
}

MiniBatch tiny_batch(const Graph& g, SamplerKind kind, std::uint64_t seed) {
  std::vector<NodeId> ids(g.num_nodes());
  std::iota(ids.begin(), ids.end(), 0u);
  const auto seeds = partition_seeds(ids, 3, seed).front();
  SamplerConfig cfg;
  cfg.kind = kind;
  cfg.fanouts = {3, 2};
  cfg.model_depth = 2;
  return sample(g, seeds, cfg, seed);
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t batches = 0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Graph g = testing::random_graph(24, 80, 1000 + seed, 5, 3);
    for (auto kind : {ModelKind::gcn, ModelKind::sage}) {
      for (auto sk : {SamplerKind::neighbor, SamplerKind::shadow}) {
        const MiniBatch mb = tiny_batch(g, sk, seed);
        const auto p = init_params(kind, model_dims(5, 6, 3, 2), seed).cast<double>();
        const auto x = testing::gather_features(g, mb.input_nodes());
        const auto r = testing::finite_difference_check(p, mb, x);
        worst = std::max(worst, r.max_rel_error);
        coords += r.checked;
        ++batches;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradientTolerance && batches >= kMinGradientBatches && coords > 0 &&
              secs < kRuntimeBudgetSeconds,
          fmt("%zu batches, %zu coordinates, max rel error %.3g (< %.0e), %.2fs", batches, coords,
              worst, kGradientTolerance, secs)};
}

Outcome dense_oracle() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 8 + seed % (kDenseMaxNodes - 7);
    const Graph g = testing::random_graph(n, 3 * n, 2000 + seed, 6, 4);
    for (auto kind : {ModelKind::gcn, ModelKind::sage}) {
      for (auto sk : {SamplerKind::neighbor, SamplerKind::shadow}) {
        const MiniBatch mb = tiny_batch(g, sk, seed);
        const ModelParams p = init_params(kind, model_dims(6, 8, 4, 2), seed);
        const Matrix x = testing::gather_features(g, mb.input_nodes()).cast<float>();
        const MatrixT<double> got = forward(p, mb, x).logits().cast<double>();
        const auto want = testing::dense_forward(p.cast<double>(), mb, x.cast<double>());
        const double scale = std::max(1e-6, want.cwiseAbs().maxCoeff());
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff() / scale);
        ++cases;
      }
    }
  }
  return {worst < kDenseTolerance,
          fmt("%zu batches on graphs of <= %zu nodes, max rel error %.3g (< %.0e)", cases,
              kDenseMaxNodes, worst, kDenseTolerance)};
}

ProtocolConfig base_config(std::vector<DeviceProfile> devices) {
  ProtocolConfig cfg;
  cfg.devices = std::move(devices);
  cfg.batch_size = 32;
  cfg.hidden_dim = 16;
  cfg.lr = 0.05;
  cfg.sampler.fanouts = {5, 4};
  cfg.sampler.model_depth = 2;
  cfg.seed = 42;
  return cfg;
}

DeviceProfile device(DeviceKind kind, double speed, std::size_t processes = 1) {
  DeviceProfile d;
  d.kind = kind;
  d.aggregation_throughput = 1e7 * speed;
  d.flop_throughput = 1e9 * speed;
  d.fetch_bandwidth = 1e9 * speed;
  d.processes = processes;
  return d;
}

Outcome sync_sgd_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const Graph g = synthetic(SyntheticKind::uniform, kSyncSgdNodes, 8, 7);
  double worst = 0.0;
  for (std::size_t k : {2u, 3u}) {
    for (auto kind : {ModelKind::gcn, ModelKind::sage}) {
      for (auto sk : {SamplerKind::neighbor, SamplerKind::shadow}) {
        auto cfg = base_config(std::vector<DeviceProfile>(k, device(DeviceKind::accelerator, 1.0)));
        cfg.model = kind;
        cfg.sampler.kind = sk;
        cfg.balancer = BalancerKind::static_;
        cfg.rebalance = false;
        cfg.epochs = kSyncSgdEpochs;
        const auto run = train(cfg, g);
        const auto oracle = testing::merged_batch_replay(cfg, g, run.profiles);
        worst = std::max(worst, testing::relative_distance(run.params, oracle));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kSyncSgdTolerance && secs < kRuntimeBudgetSeconds,
          fmt("K in {2,3} x {gcn,sage} x {neighbor,shadow}, %zu epochs, %zu nodes: max rel "
              "distance %.3g (< %.0e), %.2fs",
              kSyncSgdEpochs, kSyncSgdNodes, worst, kSyncSgdTolerance, secs)};
}

Outcome balancer_convergence() {
  const Graph g = synthetic(SyntheticKind::uniform, 2000, 8, 11);
  auto cfg = base_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 2.0)});
  cfg.cache_enabled = false;
  cfg.epochs = 6;
  cfg.batch_size = 25;
  const auto run = train(cfg, g);
  Trainer t(cfg, g);
  bool ok = true;
  double worst_share_gap = 0.0;
  double worst_imbalance = 0.0;
  for (std::size_t e = kConvergenceEpoch; e < run.profiles.size(); ++e) {
    const auto& prof = run.profiles[e];
    std::uint64_t total = 0;
    std::uint64_t heaviest = 0;
    for (const auto& mb : t.sample_epoch(e)) {
      const auto w = estimate(mb, t.layer_dims(), cfg.model).aggregations;
      total += w;
      heaviest = std::max(heaviest, w);
    }
    const double granularity = static_cast<double>(heaviest) / static_cast<double>(total);
    const double gap = std::abs(prof.ratio[0] - 1.0 / 3.0);
    worst_share_gap = std::max(worst_share_gap, gap / granularity);
    worst_imbalance = std::max(worst_imbalance, prof.imbalance());
    ok = ok && gap <= granularity && prof.imbalance() <= cfg.imbalance_threshold;
  }
  const auto& at = run.profiles[kConvergenceEpoch].ratio;
  return {ok, fmt("epoch %zu shares (%.4f, %.4f), worst share gap %.2f batches, worst time "
                  "ratio %.4f (<= %.2f) over epochs %zu..%zu",
                  kConvergenceEpoch, at[0], at[1], worst_share_gap, worst_imbalance,
                  cfg.imbalance_threshold, kConvergenceEpoch, run.profiles.size() - 1)};
}

double coefficient_of_variation(const std::vector<WorkloadEstimate>& est) {
  double mean = 0.0;
  for (const auto& e : est) mean += static_cast<double>(e.aggregations);
  mean /= static_cast<double>(est.size());
  double var = 0.0;
  for (const auto& e : est) var += std::pow(static_cast<double>(e.aggregations) - mean, 2);
  var /= static_cast<double>(est.size());
  return std::sqrt(var) / mean;
}

Outcome dynamic_vs_static() {
  std::size_t wins = 0;
  double min_cv = 1e300;
  double static_sum = 0.0;
  double dynamic_sum = 0.0;
  const std::vector<DeviceProfile> devices{device(DeviceKind::host, 1.0),
                                           device(DeviceKind::accelerator, 2.0)};
  const WorkloadRatio ratio({1.0 / 3.0, 2.0 / 3.0});
  for (std::size_t trial = 0; trial < kSkewTrials; ++trial) {
    // Seeds keep their full neighborhood (seed-hop fanout 1000), so a batch
    // holding a hub is many times heavier than one of leaves. Few seeds per
    // batch and a small training set keep the epoch at about 60 batches.
    const Graph g = synthetic(SyntheticKind::power_law, 8000, 16, 300 + trial);
    auto cfg = base_config(devices);
    cfg.seed = 500 + trial;
    cfg.batch_size = 4;
    cfg.train_fraction = 0.03;
    cfg.sampler.fanouts = {2, 1000};
    cfg.cache_enabled = false;
    Trainer t(cfg, g);
    const auto batches = t.sample_epoch(0);
    std::vector<WorkloadEstimate> est;
    std::vector<std::uint64_t> workloads, bytes;
    std::vector<BatchId> ids;
    for (const auto& mb : batches) {
      est.push_back(estimate(mb, t.layer_dims(), cfg.model));
      workloads.push_back(est.back().aggregations);
      bytes.push_back(est.back().input_rows * g.feature_bytes());
      ids.push_back(mb.batch_id);
    }
    min_cv = std::min(min_cv, coefficient_of_variation(est));
    const SimulationParams sim{cfg.sample_cost_coefficient, false};
    auto imbalance = [&](const Assignment& a) {
      const auto times = simulate_times(a, est, devices, bytes, sim);
      return std::max(times[0].total_time, times[1].total_time) /
             std::min(times[0].total_time, times[1].total_time);
    };
    const double s = imbalance(static_assign(ids, ratio, workloads));
    const double d = imbalance(dynamic_assign(est, ratio));
    static_sum += s;
    dynamic_sum += d;
    if (d < s) ++wins;
  }
  const double fraction = static_cast<double>(wins) / static_cast<double>(kSkewTrials);
  return {min_cv >= kSkewMinCv && fraction >= kSkewWinFraction,
          fmt("dynamic lower in %zu/%zu trials (>= %.0f%%), min workload CV %.3f (>= %.1f), mean "
              "time ratio static %.4f vs dynamic %.4f",
              wins, kSkewTrials, 100 * kSkewWinFraction, min_cv, kSkewMinCv,
              static_sum / kSkewTrials, dynamic_sum / kSkewTrials)};
}

Outcome cache_correctness() {
  const Graph g = testing::random_graph(80, 100, 5, 12);
  std::mt19937_64 gen(77);
  std::size_t trace_mismatch = 0;
  std::size_t byte_mismatch = 0;
  for (std::size_t trial = 0; trial < kCacheTraces; ++trial) {
    const std::size_t capacity = gen() % 16;
    const std::size_t universe = 1 + gen() % 60;
    std::vector<NodeId> trace(1 + gen() % 300);
    for (auto& id : trace) id = static_cast<NodeId>(gen() % universe);
    FeatureCache cache(capacity);
    std::vector<bool> got;
    for (NodeId id : trace) got.push_back(cache.access(id, g));
    if (got != testing::lru_trace(capacity, trace)) ++trace_mismatch;
    FeatureCache batched(capacity);
    const auto res = batched.fetch(g, trace);
    if (res.delta.bytes_transferred != res.delta.misses * g.num_features() * 4 ||
        res.delta.hits != cache.stats().hits) {
      ++byte_mismatch;
    }
  }

  const Graph tg = synthetic(SyntheticKind::power_law, 1000, 8, 13);
  auto cfg = base_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 3.0, 2)});
  cfg.epochs = 3;
  cfg.rebalance = false;
  cfg.cache_fraction = 0.3;
  double worst = 0.0;
  std::uint64_t hits = 0;
  for (auto balancer : {BalancerKind::static_, BalancerKind::dynamic}) {
    cfg.balancer = balancer;
    cfg.cache_enabled = true;
    const auto on = train(cfg, tg);
    cfg.cache_enabled = false;
    const auto off = train(cfg, tg);
    worst = std::max(worst, testing::relative_distance(on.params, off.params));
    hits += on.profiles.back().devices[1].cache.hits;
  }
  return {trace_mismatch == 0 && byte_mismatch == 0 && worst <= kCacheTransparency && hits > 0,
          fmt("%zu traces: %zu trace mismatches, %zu byte mismatches; cache on vs off param "
              "distance %.3g (<= %.0e) with %llu hits",
              kCacheTraces, trace_mismatch, byte_mismatch, worst, kCacheTransparency,
              static_cast<unsigned long long>(hits))};
}

Outcome protocol_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const Graph g = synthetic(SyntheticKind::power_law, 4000, 10, 17, 64, 16);
  std::vector<double> speedups;
  bool all_above_one = true;
  for (double host_fraction : {1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0}) {
    auto devices = default_devices();
    devices[0].aggregation_throughput = devices[1].aggregation_throughput * host_fraction;
    devices[0].flop_throughput = devices[1].flop_throughput * host_fraction;
    auto cfg = base_config(devices);
    cfg.batch_size = 128;
    cfg.hidden_dim = 64;
    cfg.sampler.fanouts = {10, 5};
    cfg.epochs = 4;
    cfg.protocol = Protocol::standard;
    cfg.balancer = BalancerKind::static_;
    cfg.cache_enabled = false;
    const double standard = train(cfg, g).profiles.back().epoch_time();
    cfg.protocol = Protocol::unified;
    cfg.balancer = BalancerKind::dynamic;
    cfg.cache_enabled = true;
    const double unified = train(cfg, g).profiles.back().epoch_time();
    speedups.push_back(standard / unified);
    all_above_one = all_above_one && standard / unified > 1.0;
  }
  const bool monotone = speedups[0] <= speedups[1] && speedups[1] <= speedups[2];
  const double secs = seconds_since(t0);
  return {all_above_one && monotone && secs < kRuntimeBudgetSeconds,
          fmt("steady-state speedup at host:accelerator 1:8 %.4f, 1:4 %.4f, 1:2 %.4f "
              "(all > 1, non-decreasing), %.2fs",
              speedups[0], speedups[1], speedups[2], secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "hgs_acceptance_determinism";
  fs::remove_all(root);
  ExperimentSpec spec = default_spec();
  spec.synthetic = "power_law:1500:8";
  spec.num_features = 16;
  spec.num_classes = 8;
  spec.config.epochs = 4;
  spec.config.batch_size = 64;
  spec.config.hidden_dim = 32;
  spec.config.sampler.fanouts = {8, 4};
  spec.config.sampler.model_depth = 2;
  spec.config.seed = 99;
  spec.ablation = true;

  std::size_t files = 0;
  std::size_t differing = 0;
  for (auto sk : {SamplerKind::neighbor, SamplerKind::shadow}) {
    spec.config.sampler.kind = sk;
    spec.out_dir = root / "a";
    const auto a = run_experiment(spec);
    spec.out_dir = root / "b";
    const auto b = run_experiment(spec);
    for (std::size_t r = 0; r < a.runs.size(); ++r) {
      for (std::size_t f = 0; f < a.runs[r].csv_files.size(); ++f) {
        ++files;
        if (slurp(a.runs[r].csv_files[f]) != slurp(b.runs[r].csv_files[f])) ++differing;
      }
    }
  }
  fs::remove_all(root);
  return {files == 8 && differing == 0,
          fmt("%zu CSV pairs from repeated ablation runs, %zu differ", files, differing)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"1 gradient correctness", gradient_correctness},
      {"2 dense-oracle equivalence", dense_oracle},
      {"3 sync-SGD equivalence", sync_sgd_equivalence},
      {"4 balancer convergence", balancer_convergence},
      {"5 dynamic beats static under skew", dynamic_vs_static},
      {"6 cache correctness", cache_correctness},
      {"7 protocol speedup trend", protocol_trend},
      {"8 determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
