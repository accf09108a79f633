#include "hgs/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "hgs/error.hpp"
#include "hgs/logging.hpp"

namespace hgs {

using nlohmann::json;

std::vector<DeviceProfile> default_devices() {
  DeviceProfile host;
  host.kind = DeviceKind::host;
  host.aggregation_throughput = 2.0e8;
  host.flop_throughput = 1.0e11;
  host.fetch_bandwidth = 4.0e10;
  host.processes = 1;

  DeviceProfile accel;
  accel.kind = DeviceKind::accelerator;
  accel.aggregation_throughput = 8.0e8;
  accel.flop_throughput = 4.0e11;
  accel.fetch_bandwidth = 1.2e10;
  accel.processes = 2;
  return {host, accel};
}

ExperimentSpec default_spec() {
  ExperimentSpec s;
  s.config.devices = default_devices();
  return s;
}

void ExperimentSpec::validate() const {
  const int sources = (dataset ? 1 : 0) + (synthetic ? 1 : 0);
  if (sources == 0) throw ConfigError("dataset", "one of dataset or synthetic is required");
  if (sources == 2) throw ConfigError("synthetic", "conflicts with dataset; give only one source");
  if (synthetic) parse_synthetic_source(*synthetic, num_features, num_classes, config.seed);
  if (feature_file && !dataset) throw ConfigError("feature_file", "only valid with dataset");
  if (repetitions == 0) throw ConfigError("repetitions", "must be >= 1");
  if (num_features == 0) throw ConfigError("num_features", "must be >= 1");
  if (num_classes == 0) throw ConfigError("num_classes", "must be >= 1");
  if (compare && ablation) throw ConfigError("ablation", "conflicts with compare");
  if ((compare || ablation) && config.num_accelerators() == 0) {
    throw ConfigError("devices", "the standard baseline needs an accelerator device");
  }
  config.validate();
}

SyntheticSpec parse_synthetic_source(const std::string& text, std::size_t num_features,
                                     std::size_t num_classes, std::uint64_t seed) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 3) throw ConfigError("synthetic", "expected kind:nodes:avg_degree");
  SyntheticSpec s;
  try {
    s.kind = parse_synthetic_kind(parts[0]);
    std::size_t pos = 0;
    s.num_nodes = std::stoull(parts[1], &pos);
    if (pos != parts[1].size()) throw std::invalid_argument(parts[1]);
    s.avg_degree = std::stoull(parts[2], &pos);
    if (pos != parts[2].size()) throw std::invalid_argument(parts[2]);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("synthetic", std::string("invalid value: ") + e.what());
  }
  if (s.num_nodes == 0) throw ConfigError("synthetic", "nodes must be >= 1");
  if (s.avg_degree >= s.num_nodes) throw ConfigError("synthetic", "avg_degree must be < nodes");
  s.num_features = num_features;
  s.num_classes = num_classes;
  s.seed = seed;
  return s;
}

namespace {

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

template <typename Enum, typename Parse>
Enum get_enum(const json& v, const std::string& key, Parse parse) {
  const auto s = get_as<std::string>(v, key);
  try {
    return parse(s);
  } catch (const Error&) {
    throw ConfigError(key, "invalid value \"" + s + "\"");
  }
}

bool get_switch(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "on") return true;
    if (s == "off") return false;
  }
  throw ConfigError(key, "expected true/false or \"on\"/\"off\"");
}

DeviceProfile device_from_json(const json& j, const std::string& key) {
  if (!j.is_object()) throw ConfigError(key, "expected an object");
  DeviceProfile d;
  for (const auto& [k, v] : j.items()) {
    const std::string where = key + "." + k;
    if (k == "kind") {
      d.kind = get_enum<DeviceKind>(v, where, parse_device_kind);
    } else if (k == "aggregation_throughput") {
      d.aggregation_throughput = get_as<double>(v, where);
    } else if (k == "flop_throughput") {
      d.flop_throughput = get_as<double>(v, where);
    } else if (k == "fetch_bandwidth") {
      d.fetch_bandwidth = get_as<double>(v, where);
    } else if (k == "processes") {
      d.processes = get_as<std::size_t>(v, where);
    } else if (k == "cache_capacity") {
      if (!v.is_null()) d.cache_capacity = get_as<std::size_t>(v, where);
    } else if (k == "emulation_speedup") {
      d.emulation_speedup = get_as<double>(v, where);
    } else {
      throw ConfigError(where, "unknown key");
    }
  }
  return d;
}

json device_to_json(const DeviceProfile& d) {
  json j{{"kind", to_string(d.kind)},
         {"aggregation_throughput", d.aggregation_throughput},
         {"flop_throughput", d.flop_throughput},
         {"fetch_bandwidth", d.fetch_bandwidth},
         {"processes", d.processes},
         {"emulation_speedup", d.emulation_speedup}};
  j["cache_capacity"] = d.cache_capacity ? json(*d.cache_capacity) : json(nullptr);
  return j;
}

}  // namespace

ExperimentSpec spec_from_json(const json& j, ExperimentSpec s) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  bool has_dataset = false;
  bool has_synthetic = false;
  ProtocolConfig& c = s.config;
  for (const auto& [key, v] : j.items()) {
    if (key == "protocol") {
      c.protocol = get_enum<Protocol>(v, key, parse_protocol);
    } else if (key == "balancer") {
      c.balancer = get_enum<BalancerKind>(v, key, parse_balancer_kind);
    } else if (key == "cache") {
      c.cache_enabled = get_switch(v, key);
    } else if (key == "cache_fraction") {
      c.cache_fraction = get_as<double>(v, key);
    } else if (key == "mode") {
      c.mode = get_enum<ClockMode>(v, key, parse_clock_mode);
    } else if (key == "epochs") {
      c.epochs = get_as<std::size_t>(v, key);
    } else if (key == "batch_size") {
      c.batch_size = get_as<std::size_t>(v, key);
    } else if (key == "lr") {
      c.lr = get_as<double>(v, key);
    } else if (key == "optimizer") {
      c.optimizer = get_enum<OptimizerKind>(v, key, parse_optimizer_kind);
    } else if (key == "sampler") {
      c.sampler.kind = get_enum<SamplerKind>(v, key, parse_sampler_kind);
    } else if (key == "fanouts") {
      c.sampler.fanouts = get_as<std::vector<std::size_t>>(v, key);
    } else if (key == "model_depth") {
      c.sampler.model_depth = get_as<std::size_t>(v, key);
    } else if (key == "model") {
      c.model = get_enum<ModelKind>(v, key, parse_model_kind);
    } else if (key == "hidden_dim") {
      c.hidden_dim = get_as<std::size_t>(v, key);
    } else if (key == "devices") {
      if (!v.is_array()) throw ConfigError(key, "expected an array");
      c.devices.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        c.devices.push_back(device_from_json(v[i], key + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "seed") {
      c.seed = get_as<std::uint64_t>(v, key);
    } else if (key == "imbalance_threshold") {
      c.imbalance_threshold = get_as<double>(v, key);
    } else if (key == "sample_cost_coefficient") {
      c.sample_cost_coefficient = get_as<double>(v, key);
    } else if (key == "train_fraction") {
      c.train_fraction = get_as<double>(v, key);
    } else if (key == "rebalance") {
      c.rebalance = get_as<bool>(v, key);
    } else if (key == "dataset") {
      has_dataset = !v.is_null();
      s.dataset = v.is_null() ? std::nullopt
                              : std::optional<std::filesystem::path>(get_as<std::string>(v, key));
    } else if (key == "feature_file") {
      s.feature_file = v.is_null()
                           ? std::nullopt
                           : std::optional<std::filesystem::path>(get_as<std::string>(v, key));
    } else if (key == "dataset_nodes") {
      s.dataset_nodes =
          v.is_null() ? std::nullopt : std::optional<std::size_t>(get_as<std::size_t>(v, key));
    } else if (key == "synthetic") {
      has_synthetic = !v.is_null();
      s.synthetic =
          v.is_null() ? std::nullopt : std::optional<std::string>(get_as<std::string>(v, key));
    } else if (key == "num_features") {
      s.num_features = get_as<std::size_t>(v, key);
    } else if (key == "num_classes") {
      s.num_classes = get_as<std::size_t>(v, key);
    } else if (key == "out") {
      s.out_dir = get_as<std::string>(v, key);
    } else if (key == "repetitions") {
      s.repetitions = get_as<std::size_t>(v, key);
    } else if (key == "compare") {
      s.compare = get_as<bool>(v, key);
    } else if (key == "ablation") {
      s.ablation = get_as<bool>(v, key);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (has_dataset && has_synthetic) {
    throw ConfigError("synthetic", "conflicts with dataset; give only one source");
  }
  if (has_dataset) s.synthetic.reset();
  if (has_synthetic) s.dataset.reset();
  return s;
}

json to_json(const ExperimentSpec& s) {
  const ProtocolConfig& c = s.config;
  json devices = json::array();
  for (const auto& d : c.devices) devices.push_back(device_to_json(d));
  auto opt_path = [](const auto& p) { return p ? json(p->string()) : json(nullptr); };
  return json{
      {"protocol", to_string(c.protocol)},
      {"balancer", to_string(c.balancer)},
      {"cache", c.cache_enabled},
      {"cache_fraction", c.cache_fraction},
      {"mode", to_string(c.mode)},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"optimizer", to_string(c.optimizer)},
      {"sampler", to_string(c.sampler.kind)},
      {"fanouts", c.sampler.fanouts},
      {"model_depth", c.sampler.model_depth},
      {"model", to_string(c.model)},
      {"hidden_dim", c.hidden_dim},
      {"devices", devices},
      {"seed", c.seed},
      {"imbalance_threshold", c.imbalance_threshold},
      {"sample_cost_coefficient", c.sample_cost_coefficient},
      {"train_fraction", c.train_fraction},
      {"rebalance", c.rebalance},
      {"dataset", opt_path(s.dataset)},
      {"feature_file", opt_path(s.feature_file)},
      {"dataset_nodes", s.dataset_nodes ? json(*s.dataset_nodes) : json(nullptr)},
      {"synthetic", s.synthetic ? json(*s.synthetic) : json(nullptr)},
      {"num_features", s.num_features},
      {"num_classes", s.num_classes},
      {"out", s.out_dir.string()},
      {"repetitions", s.repetitions},
      {"compare", s.compare},
      {"ablation", s.ablation},
  };
}

std::optional<ExperimentSpec> parse_command_line(const std::vector<std::string>& args) {
  CLI::App app{"Heterogeneous mini-batch GNN training engine", "hgs_cli"};
  std::string config_path, dataset, synthetic, sampler, model, protocol, balancer, cache, mode, out;
  std::size_t epochs = 0, batch_size = 0, repetitions = 0;
  std::uint64_t seed = 0;
  bool compare = false, ablation = false, print_config = false;
  app.add_option("--config", config_path, "JSON config file");
  auto* dataset_opt = app.add_option("--dataset", dataset, "edge-list file");
  auto* synthetic_opt = app.add_option("--synthetic", synthetic, "kind:nodes:avg_degree");
  dataset_opt->excludes(synthetic_opt);
  app.add_option("--sampler", sampler, "neighbor|shadow");
  app.add_option("--model", model, "gcn|sage");
  app.add_option("--protocol", protocol, "standard|unified");
  app.add_option("--balancer", balancer, "static|dynamic");
  app.add_option("--cache", cache, "on|off");
  app.add_option("--mode", mode, "simulated|wallclock");
  app.add_option("--epochs", epochs);
  app.add_option("--batch-size", batch_size);
  app.add_option("--seed", seed);
  app.add_option("--out", out, "output directory");
  app.add_option("--repetitions", repetitions);
  app.add_flag("--compare", compare, "also run the standard-protocol baseline");
  app.add_flag("--ablation", ablation, "run the four-row optimization ablation");
  app.add_flag("--print-config", print_config, "print the effective config and exit");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError("", e.what());
  }

  ExperimentSpec spec = default_spec();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config", "cannot open " + config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config", e.what());
    }
    spec = spec_from_json(j, spec);
  }
  json flags = json::object();
  auto set_if = [&](const char* opt, const char* key, const std::string& v) {
    if (app.count(opt)) flags[key] = v;
  };
  set_if("--sampler", "sampler", sampler);
  set_if("--model", "model", model);
  set_if("--protocol", "protocol", protocol);
  set_if("--balancer", "balancer", balancer);
  set_if("--cache", "cache", cache);
  set_if("--mode", "mode", mode);
  set_if("--out", "out", out);
  if (app.count("--epochs")) flags["epochs"] = epochs;
  if (app.count("--batch-size")) flags["batch_size"] = batch_size;
  if (app.count("--seed")) flags["seed"] = seed;
  if (app.count("--repetitions")) flags["repetitions"] = repetitions;
  if (app.count("--compare")) flags["compare"] = compare;
  if (app.count("--ablation")) flags["ablation"] = ablation;
  // A source given on the command line replaces the file's source.
  if (app.count("--dataset")) {
    flags["dataset"] = dataset;
    flags["synthetic"] = nullptr;
  }
  if (app.count("--synthetic")) {
    flags["synthetic"] = synthetic;
    flags["dataset"] = nullptr;
  }
  spec = spec_from_json(flags, spec);
  spec.validate();
  if (print_config) {
    std::cout << to_json(spec).dump(2) << "\n";
    return std::nullopt;
  }
  return spec;
}

Graph load_dataset(const ExperimentSpec& spec) {
  if (spec.synthetic) {
    return generate_synthetic(parse_synthetic_source(*spec.synthetic, spec.num_features,
                                                     spec.num_classes, spec.config.seed));
  }
  if (!spec.dataset) throw ConfigError("dataset", "no dataset source");
  EdgeListOptions opts;
  opts.num_nodes = spec.dataset_nodes;
  opts.num_features = spec.num_features;
  opts.num_classes = spec.num_classes;
  opts.seed = spec.config.seed;
  opts.feature_file = spec.feature_file;
  return load_edge_list(*spec.dataset, opts);
}

std::string epoch_csv(const std::vector<EpochProfile>& profiles) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << kEpochCsvHeader << "\n";
  for (const auto& p : profiles) {
    for (std::size_t d = 0; d < p.devices.size(); ++d) {
      const auto& s = p.devices[d];
      os << p.epoch << "," << d << "," << s.sample_time << "," << s.fetch_time << ","
         << s.compute_time << "," << s.total_time << "," << s.processed_workload << ","
         << s.fetch.hit_rate() << "," << p.loss << "," << s.share << "\n";
    }
  }
  return os.str();
}

namespace {

struct Variant {
  std::string name;
  ProtocolConfig config;
};

std::vector<Variant> variants(const ExperimentSpec& spec) {
  ProtocolConfig standard = spec.config;
  standard.protocol = Protocol::standard;
  standard.balancer = BalancerKind::static_;
  standard.cache_enabled = false;
  if (spec.ablation) {
    ProtocolConfig u_static = spec.config;
    u_static.protocol = Protocol::unified;
    u_static.balancer = BalancerKind::static_;
    u_static.cache_enabled = false;
    ProtocolConfig u_dynamic = u_static;
    u_dynamic.balancer = BalancerKind::dynamic;
    ProtocolConfig u_cache = u_dynamic;
    u_cache.cache_enabled = true;
    return {{"standard", standard},
            {"unified_static", u_static},
            {"unified_dynamic", u_dynamic},
            {"unified_dynamic_cache", u_cache}};
  }
  if (spec.compare) {
    ProtocolConfig unified = spec.config;
    unified.protocol = Protocol::unified;
    return {{"standard", standard}, {"unified", unified}};
  }
  return {{std::string(to_string(spec.config.protocol)), spec.config}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json summary_to_json(const RunSummary& r) {
  json j{{"name", r.name},
         {"protocol", to_string(r.protocol)},
         {"balancer", to_string(r.balancer)},
         {"cache", r.cache},
         {"total_time", r.total_time},
         {"final_epoch_time", r.final_epoch_time},
         {"final_loss", r.final_loss},
         {"final_shares", r.final_shares},
         {"cache_hit_rate", r.cache_hit_rate}};
  j["convergence_epoch"] = r.convergence_epoch ? json(*r.convergence_epoch) : json(nullptr);
  return j;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  init_logging();
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  if (ec || !std::filesystem::is_directory(spec.out_dir)) {
    throw IoError("cannot create output directory " + spec.out_dir.string());
  }
  const Graph graph = load_dataset(spec);
  spdlog::info("graph: {} nodes, {} edges, {} features", graph.num_nodes(), graph.num_edges(),
               graph.num_features());

  ExperimentReport report;
  for (const auto& v : variants(spec)) {
    RunSummary r;
    r.name = v.name;
    r.protocol = v.config.protocol;
    r.balancer = v.config.balancer;
    r.cache = v.config.cache_enabled;
    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
      spdlog::info("run {} repetition {}", v.name, rep);
      const TrainResult tr = train(v.config, graph);
      const auto path = spec.out_dir / (v.name + "_rep" + std::to_string(rep) + ".csv");
      write_file(path, epoch_csv(tr.profiles));
      r.csv_files.push_back(path);
      double total = 0.0;
      for (const auto& p : tr.profiles) total += p.epoch_time();
      r.total_time += total / static_cast<double>(spec.repetitions);
      if (rep == 0) {
        const auto& last = tr.profiles.back();
        r.final_epoch_time = last.epoch_time();
        r.final_loss = last.loss;
        r.final_shares.assign(last.ratio.shares().begin(), last.ratio.shares().end());
        FetchStats f;
        for (const auto& d : last.devices) f += d.fetch;
        r.cache_hit_rate = f.hit_rate();
        for (const auto& p : tr.profiles) {
          if (p.imbalance() <= v.config.imbalance_threshold) {
            r.convergence_epoch = p.epoch;
            break;
          }
        }
      }
    }
    report.runs.push_back(std::move(r));
  }

  json summary;
  summary["runs"] = json::array();
  const RunSummary* standard = nullptr;
  for (const auto& r : report.runs) {
    if (r.protocol == Protocol::standard) standard = &r;
  }
  for (const auto& r : report.runs) {
    json row = summary_to_json(r);
    if (standard && r.protocol == Protocol::unified && r.total_time > 0.0) {
      row["speedup_vs_standard"] = standard->total_time / r.total_time;
    }
    summary["runs"].push_back(row);
  }
  if (standard && report.runs.back().protocol == Protocol::unified &&
      report.runs.back().total_time > 0.0) {
    report.speedup = standard->total_time / report.runs.back().total_time;
    summary["speedup"] = *report.speedup;
  }
  summary["config"] = to_json(spec);
  report.summary_file = spec.out_dir / "summary.json";
  write_file(report.summary_file, summary.dump(2) + "\n");
  return report;
}

}  // namespace hgs
