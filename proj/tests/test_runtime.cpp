#include <doctest.h>

#include <cmath>

#include "hgs/error.hpp"
#include "hgs/runtime.hpp"
#include "oracles.hpp"

using namespace hgs;

namespace {

DeviceProfile device(DeviceKind kind, double speed, std::size_t processes = 1) {
  DeviceProfile d;
  d.kind = kind;
  d.aggregation_throughput = 1e7 * speed;
  d.flop_throughput = 1e9 * speed;
  d.fetch_bandwidth = 1e9 * speed;
  d.processes = processes;
  return d;
}

ProtocolConfig small_config(std::vector<DeviceProfile> devices) {
  ProtocolConfig cfg;
  cfg.devices = std::move(devices);
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.lr = 0.1;
  cfg.hidden_dim = 8;
  cfg.sampler.fanouts = {4, 3};
  cfg.sampler.model_depth = 2;
  cfg.seed = 21;
  return cfg;
}

Graph uniform_graph(std::size_t n, std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::uniform;
  s.num_nodes = n;
  s.avg_degree = 8;
  s.num_features = 6;
  s.num_classes = 4;
  s.seed = seed;
  return generate_synthetic(s);
}

bool same_profiles(const std::vector<EpochProfile>& a, const std::vector<EpochProfile>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t e = 0; e < a.size(); ++e) {
    if (a[e].devices != b[e].devices || a[e].ratio != b[e].ratio ||
        a[e].assignment.batches != b[e].assignment.batches || a[e].loss != b[e].loss) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("simulate_times") {
  DeviceProfile d;
  d.aggregation_throughput = 1.0;
  d.flop_throughput = 1.0;
  d.fetch_bandwidth = 1.0;
  const std::vector<WorkloadEstimate> est{{0, 10, 5, 0, 0}};
  const std::vector<std::uint64_t> bytes{3};
  Assignment a;
  a.batches = {{0}};
  a.assigned_workload = {10};
  const SimulationParams params{0.1, false};

  SUBCASE("one process serializes") {
    const std::vector<DeviceProfile> devs{d};
    const auto t = simulate_times(a, est, devs, bytes, params);
    CHECK(t[0].sample_time == doctest::Approx(1.0));
    CHECK(t[0].fetch_time == 3.0);
    CHECK(t[0].compute_time == 5.0);
    CHECK(t[0].total_time == doctest::Approx(9.0));
  }
  SUBCASE("two processes overlap fetch with compute") {
    d.processes = 2;
    const std::vector<DeviceProfile> devs{d};
    CHECK(simulate_times(a, est, devs, bytes, params)[0].total_time == doctest::Approx(6.0));
    CHECK(simulate_times(a, est, devs, bytes, {0.1, true})[0].total_time == doctest::Approx(9.0));
  }
  SUBCASE("zero batches") {
    Assignment empty;
    empty.batches = {{}};
    empty.assigned_workload = {0};
    const std::vector<DeviceProfile> devs{d};
    const auto t = simulate_times(empty, est, devs, bytes, params);
    CHECK(t[0].total_time == 0.0);
    CHECK(t[0].fetch_time == 0.0);
  }
  SUBCASE("doubling bandwidth halves fetch time") {
    DeviceProfile fast = d;
    fast.fetch_bandwidth = 2.0;
    const std::vector<DeviceProfile> slow_devs{d};
    const std::vector<DeviceProfile> fast_devs{fast};
    CHECK(simulate_times(a, est, fast_devs, bytes, params)[0].fetch_time ==
          simulate_times(a, est, slow_devs, bytes, params)[0].fetch_time / 2.0);
  }
}

TEST_CASE("one device: unified and standard coincide") {
  const Graph g = uniform_graph(200, 1);
  auto cfg = small_config({device(DeviceKind::accelerator, 1.0)});
  const auto unified = train(cfg, g);
  cfg.protocol = Protocol::standard;
  const auto standard = train(cfg, g);
  CHECK(testing::bitwise_equal(unified.params, standard.params));
  CHECK(unified.profiles.back().loss == standard.profiles.back().loss);
}

TEST_CASE("two identical devices equal single-device training on concatenated rounds") {
  const Graph g = uniform_graph(300, 2);
  for (auto kind : {ModelKind::gcn, ModelKind::sage}) {
    for (auto sk : {SamplerKind::neighbor, SamplerKind::shadow}) {
      auto cfg = small_config(
          {device(DeviceKind::accelerator, 1.0), device(DeviceKind::accelerator, 1.0)});
      cfg.model = kind;
      cfg.sampler.kind = sk;
      cfg.epochs = 3;
      const auto run = train(cfg, g);
      const auto oracle = testing::merged_batch_replay(cfg, g, run.profiles);
      CHECK(testing::relative_distance(run.params, oracle) < 1e-5);
      CHECK_FALSE(testing::bitwise_equal(run.params, Trainer(cfg, g).initial_params()));
    }
  }
}

TEST_CASE("uneven queues: idle devices contribute no weight") {
  const Graph g = uniform_graph(250, 3);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 3.0)});
  cfg.epochs = 3;
  const auto run = train(cfg, g);
  // Rebalancing makes later epochs uneven.
  const auto& last = run.profiles.back().assignment;
  CHECK(last.batches[0].size() != last.batches[1].size());
  const auto oracle = testing::merged_batch_replay(cfg, g, run.profiles);
  CHECK(testing::relative_distance(run.params, oracle) < 1e-5);
}

TEST_CASE("epochs = 1 never rebalances") {
  const Graph g = uniform_graph(200, 4);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 4.0)});
  cfg.epochs = 1;
  const auto run = train(cfg, g);
  REQUIRE(run.profiles.size() == 1);
  CHECK(run.profiles[0].ratio == WorkloadRatio::equal(2));
}

TEST_CASE("shares converge to throughput ratio 1:2") {
  const Graph g = uniform_graph(1200, 5);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 2.0)});
  cfg.cache_enabled = false;
  cfg.epochs = 5;
  cfg.batch_size = 20;
  const auto run = train(cfg, g);
  for (std::size_t e = 2; e < run.profiles.size(); ++e) {
    const auto& prof = run.profiles[e];
    std::uint64_t total = 0;
    std::uint64_t max_batch = 0;
    for (const auto& d : prof.devices) total += d.processed_workload;
    Trainer t(cfg, g);
    for (const auto& mb : t.sample_epoch(e)) {
      max_batch = std::max(max_batch, estimate(mb, t.layer_dims(), cfg.model).aggregations);
    }
    const double granularity = static_cast<double>(max_batch) / static_cast<double>(total);
    CHECK(std::abs(prof.ratio[0] - 1.0 / 3.0) <= granularity);
    CHECK(prof.imbalance() <= cfg.imbalance_threshold);
  }
}

TEST_CASE("standard protocol leaves host devices idle") {
  const Graph g = uniform_graph(200, 6);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 2.0),
                           device(DeviceKind::accelerator, 2.0)});
  cfg.protocol = Protocol::standard;
  cfg.epochs = 3;
  const auto run = train(cfg, g);
  for (const auto& prof : run.profiles) {
    CHECK(prof.devices[0].processed_workload == 0);
    CHECK(prof.devices[0].total_time == 0.0);
    CHECK(prof.devices[1].processed_workload > 0);
    CHECK(prof.ratio[1] == 0.5);
  }
}

TEST_CASE("converged unified epoch is no slower than standard") {
  const Graph g = uniform_graph(1000, 7);
  auto cfg = small_config({device(DeviceKind::host, 0.5), device(DeviceKind::accelerator, 2.0, 2)});
  cfg.epochs = 4;
  cfg.batch_size = 25;
  const auto unified = train(cfg, g);
  cfg.protocol = Protocol::standard;
  cfg.balancer = BalancerKind::static_;
  cfg.cache_enabled = false;
  const auto standard = train(cfg, g);
  CHECK(unified.profiles.back().epoch_time() <= standard.profiles.back().epoch_time());
}

TEST_CASE("simulated mode is bitwise deterministic") {
  const Graph g = uniform_graph(300, 8);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 3.0, 2)});
  cfg.epochs = 3;
  cfg.optimizer = OptimizerKind::adam;
  cfg.lr = 0.01;
  const auto a = train(cfg, g);
  const auto b = train(cfg, g);
  CHECK(testing::bitwise_equal(a.params, b.params));
  CHECK(same_profiles(a.profiles, b.profiles));
}

TEST_CASE("cache on or off trains identical parameters for identical rounds") {
  const Graph g = uniform_graph(300, 9);
  auto cfg = small_config({device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 3.0)});
  cfg.epochs = 3;
  cfg.rebalance = false;
  cfg.cache_fraction = 0.5;
  const auto cached = train(cfg, g);
  cfg.cache_enabled = false;
  const auto plain = train(cfg, g);
  CHECK(testing::bitwise_equal(cached.params, plain.params));
  CHECK(cached.profiles.back().devices[1].cache.hits > 0);
  CHECK(cached.profiles.back().devices[1].fetch.bytes_transferred <
        plain.profiles.back().devices[1].fetch.bytes_transferred);
}

TEST_CASE("wall-clock mode trains the same parameters as the simulated clock") {
  const Graph g = uniform_graph(300, 10);
  for (std::size_t processes : {1u, 2u}) {
    auto cfg = small_config(
        {device(DeviceKind::host, 1.0), device(DeviceKind::accelerator, 3.0, processes)});
    cfg.epochs = 1;
    const auto sim = train(cfg, g);
    cfg.mode = ClockMode::wallclock;
    cfg.devices[1].emulation_speedup = 4.0;
    const auto wall = train(cfg, g);
    CHECK(testing::bitwise_equal(sim.params, wall.params));
    CHECK(sim.profiles[0].loss == wall.profiles[0].loss);
    for (const auto& d : wall.profiles[0].devices) {
      if (d.batches) CHECK(d.total_time > 0.0);
    }
    CHECK(wall.profiles[0].devices[1].fetch == sim.profiles[0].devices[1].fetch);
  }
}

TEST_CASE("configuration errors") {
  const Graph g = uniform_graph(50, 11);
  auto cfg = small_config({device(DeviceKind::accelerator, 1.0)});
  cfg.devices[0].flop_throughput = 0.0;
  CHECK_THROWS_AS(Trainer(cfg, g), ConfigError);

  cfg = small_config({device(DeviceKind::host, 1.0)});
  cfg.protocol = Protocol::standard;
  try {
    Trainer t(cfg, g);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "protocol");
  }

  cfg = small_config({device(DeviceKind::host, 1.0)});
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epochs = 1;
  cfg.devices[0].processes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  CHECK_THROWS_AS(parse_protocol("sync"), ConfigError);
  CHECK(parse_clock_mode("wallclock") == ClockMode::wallclock);
}

TEST_CASE("profile-based update keeps idle devices' shares") {
  EpochProfile p;
  p.ratio = WorkloadRatio({0.2, 0.4, 0.4});
  p.devices.resize(3);
  p.devices[0] = {};
  p.devices[1].batches = 3;
  p.devices[1].total_time = 2.0;
  p.devices[1].processed_workload = 30;
  p.devices[2].batches = 3;
  p.devices[2].total_time = 1.0;
  p.devices[2].processed_workload = 30;
  const auto r = update_ratio(p.ratio, p);
  CHECK(r[0] == doctest::Approx(0.2));
  CHECK(r[1] == doctest::Approx(0.8 / 3.0));
  CHECK(r[2] == doctest::Approx(1.6 / 3.0));

  p.devices[1].total_time = 0.0;
  CHECK_THROWS_AS(update_ratio(p.ratio, p), MeasurementError);
}
