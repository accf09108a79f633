#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgs/graph.hpp"
#include "hgs/runtime.hpp"

namespace hgs {

/// Everything one invocation of the driver needs: the protocol configuration,
/// exactly one dataset source, and where to write metrics.
struct ExperimentSpec {
  ProtocolConfig config;

  // Dataset: an edge list, or a synthetic spec "kind:nodes:avg_degree".
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> feature_file;
  std::optional<std::size_t> dataset_nodes;
  std::optional<std::string> synthetic;
  std::size_t num_features = 64;
  std::size_t num_classes = 16;

  std::filesystem::path out_dir = "out";
  std::size_t repetitions = 1;
  // Also run the standard-protocol baseline.
  bool compare = false;
  // Standard, unified+static, unified+dynamic, unified+dynamic+cache.
  bool ablation = false;

  // Throws ConfigError naming the offending key.
  void validate() const;
  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

// One host and one accelerator with an asymmetric but illustrative cost model.
std::vector<DeviceProfile> default_devices();

ExperimentSpec default_spec();

// Unknown keys and bad values raise ConfigError naming the key.
ExperimentSpec spec_from_json(const nlohmann::json& j, ExperimentSpec base = default_spec());
nlohmann::json to_json(const ExperimentSpec& spec);

SyntheticSpec parse_synthetic_source(const std::string& text, std::size_t num_features,
                                     std::size_t num_classes, std::uint64_t seed);

/// Parses command-line arguments (without argv[0]). --config loads a JSON file
/// first; every other flag overrides it. Returns nullopt when --help was
/// printed.
std::optional<ExperimentSpec> parse_command_line(const std::vector<std::string>& args);

Graph load_dataset(const ExperimentSpec& spec);

struct RunSummary {
  std::string name;
  Protocol protocol = Protocol::unified;
  BalancerKind balancer = BalancerKind::dynamic;
  bool cache = false;
  // Sum of per-epoch times, averaged over repetitions.
  double total_time = 0.0;
  // Time of the last epoch (after the balancer had its chance to settle).
  double final_epoch_time = 0.0;
  double final_loss = 0.0;
  // First epoch whose device time ratio is within the threshold.
  std::optional<std::size_t> convergence_epoch;
  std::vector<double> final_shares;
  double cache_hit_rate = 0.0;
  std::vector<std::filesystem::path> csv_files;
};

struct ExperimentReport {
  std::vector<RunSummary> runs;
  // standard total_time / unified total_time, when both ran.
  std::optional<double> speedup;
  std::filesystem::path summary_file;
};

inline constexpr const char* kEpochCsvHeader =
    "epoch,device_id,sample_time,fetch_time,compute_time,total_time,processed_workload,"
    "cache_hit_rate,loss,shares";

std::string epoch_csv(const std::vector<EpochProfile>& profiles);

/// Runs every requested variant and repetition, writing one CSV per run and a
/// summary.json into spec.out_dir. Throws IoError when the directory is not
/// writable.
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace hgs
