#include "cfel/config.hpp"

#include <json.hpp>

#include "cfel/io.hpp"

namespace cfel {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  return j.at(key);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for key '") + key + "'");
  }
}

template <typename T>
T get_req(const json& j, const std::string& where, const char* key) {
  const json& v = require(j, where, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": bad value for key '" + key + "'");
  }
}

Weighting weighting_from_string(const std::string& s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "sample_size") return Weighting::sample_size;
  throw ConfigError("unknown weighting: " + s);
}

TauUnit tau_unit_from_string(const std::string& s) {
  if (s == "iterations") return TauUnit::iterations;
  if (s == "epochs") return TauUnit::epochs;
  throw ConfigError("unknown tau_unit: " + s);
}

GradientMode grad_mode_from_string(const std::string& s) {
  if (s == "minibatch") return GradientMode::minibatch;
  if (s == "full_batch") return GradientMode::full_batch;
  if (s == "full_plus_noise") return GradientMode::full_plus_noise;
  throw ConfigError("unknown gradient_mode: " + s);
}

PartitionSpec::Scheme scheme_from_string(const std::string& s) {
  if (s == "iid") return PartitionSpec::Scheme::iid;
  if (s == "dirichlet") return PartitionSpec::Scheme::dirichlet;
  if (s == "cluster_iid_shards") return PartitionSpec::Scheme::cluster_iid_shards;
  if (s == "cluster_noniid_shards") return PartitionSpec::Scheme::cluster_noniid_shards;
  throw ConfigError("unknown partition scheme: " + s);
}

RunConfig parse_run(const json& j) {
  expect_object(j, "run");
  reject_unknown(j, "run",
                 {"algorithm", "tau", "q", "pi", "rounds", "batch_size", "lr", "momentum",
                  "weighting", "tau_unit", "gradient_mode", "noise_sigma", "threads"});
  RunConfig r;
  r.algorithm = algorithm_from_string(get_or<std::string>(j, "algorithm", "ce_fedavg"));
  r.tau = get_req<int>(j, "run", "tau");
  r.q = get_req<int>(j, "run", "q");
  r.pi = get_or<int>(j, "pi", 1);
  r.rounds = get_req<int>(j, "run", "rounds");
  r.batch_size = get_or<int>(j, "batch_size", 1);
  r.lr = get_req<double>(j, "run", "lr");
  r.momentum = get_or<double>(j, "momentum", 0.0);
  r.weighting = weighting_from_string(get_or<std::string>(j, "weighting", "uniform"));
  r.tau_unit = tau_unit_from_string(get_or<std::string>(j, "tau_unit", "iterations"));
  r.grad_mode = grad_mode_from_string(get_or<std::string>(j, "gradient_mode", "minibatch"));
  r.noise_sigma = get_or<double>(j, "noise_sigma", 0.0);
  r.threads = get_or<int>(j, "threads", 1);
  r.validate();
  return r;
}

ModelSpec parse_model(const json& j) {
  expect_object(j, "model");
  reject_unknown(j, "model", {"kind", "dim", "feature_dim", "classes", "hidden"});
  ModelSpec m;
  m.kind = get_req<std::string>(j, "model", "kind");
  if (m.kind != "quadratic" && m.kind != "logistic" && m.kind != "mlp") {
    throw ConfigError("model: unknown kind '" + m.kind + "'");
  }
  m.dim = get_or<int>(j, "dim", m.dim);
  m.feature_dim = get_or<int>(j, "feature_dim", m.feature_dim);
  m.classes = get_or<int>(j, "classes", m.classes);
  m.hidden = get_or<int>(j, "hidden", m.hidden);
  return m;
}

PartitionSpec parse_partition(const json& j) {
  expect_object(j, "data.partition");
  reject_unknown(j, "data.partition", {"scheme", "alpha", "shards_per_device", "shards_per_cluster"});
  PartitionSpec p;
  p.scheme = scheme_from_string(get_req<std::string>(j, "data.partition", "scheme"));
  p.alpha = get_or<double>(j, "alpha", p.alpha);
  p.shards_per_device = get_or<int>(j, "shards_per_device", p.shards_per_device);
  p.shards_per_cluster = get_or<int>(j, "shards_per_cluster", p.shards_per_cluster);
  return p;
}

DataSpec parse_data(const json& j) {
  expect_object(j, "data");
  reject_unknown(j, "data",
                 {"source", "spread", "samples_per_device", "sample_jitter", "samples",
                  "separation", "images", "labels", "max_samples", "train_fraction", "partition"});
  DataSpec d;
  d.source = get_req<std::string>(j, "data", "source");
  if (d.source != "quadratic_fleet" && d.source != "synthetic_classification" &&
      d.source != "idx") {
    throw ConfigError("data: unknown source '" + d.source + "'");
  }
  d.spread = get_or<double>(j, "spread", d.spread);
  d.samples_per_device = get_or<int>(j, "samples_per_device", d.samples_per_device);
  d.sample_jitter = get_or<double>(j, "sample_jitter", d.sample_jitter);
  d.samples = get_or<int>(j, "samples", d.samples);
  d.separation = get_or<double>(j, "separation", d.separation);
  d.images = get_or<std::string>(j, "images", "");
  d.labels = get_or<std::string>(j, "labels", "");
  d.max_samples = get_or<int>(j, "max_samples", d.max_samples);
  d.train_fraction = get_or<double>(j, "train_fraction", d.train_fraction);
  if (j.contains("partition")) d.partition = parse_partition(j.at("partition"));
  return d;
}

TopologySpec parse_topology(const json& j) {
  expect_object(j, "topology");
  reject_unknown(j, "topology",
                 {"devices", "clusters", "graph", "p_edge", "weights", "assignment"});
  TopologySpec t;
  t.devices = get_req<int>(j, "topology", "devices");
  t.clusters = get_req<int>(j, "topology", "clusters");
  t.graph = graph_kind_from_string(get_req<std::string>(j, "topology", "graph"));
  t.p_edge = get_or<double>(j, "p_edge", t.p_edge);
  t.weights = get_or<std::string>(j, "weights", t.weights);
  t.assignment = get_or<std::string>(j, "assignment", t.assignment);
  if (t.weights != "metropolis" && t.weights != "max_degree") {
    throw ConfigError("topology: unknown weights '" + t.weights + "'");
  }
  if (t.assignment != "contiguous" && t.assignment != "random_equal") {
    throw ConfigError("topology: unknown assignment '" + t.assignment + "'");
  }
  return t;
}

SystemProfile parse_profile(const json& j) {
  expect_object(j, "profile");
  if (j.contains("preset")) {
    reject_unknown(j, "profile", {"preset"});
    std::string name = get_req<std::string>(j, "profile", "preset");
    if (name == "femnist-paper") return femnist_paper_profile();
    if (name == "cifar-paper") return cifar_paper_profile();
    throw ConfigError("profile: unknown preset '" + name + "'");
  }
  reject_unknown(j, "profile",
                 {"flops_per_iteration", "device_flops", "model_bits", "uplink_bps",
                  "backhaul_bps", "cloud_bps"});
  SystemProfile p;
  p.flops_per_iteration = get_req<double>(j, "profile", "flops_per_iteration");
  p.device_flops = get_req<std::vector<double>>(j, "profile", "device_flops");
  p.model_bits = get_req<double>(j, "profile", "model_bits");
  p.uplink_bps = get_req<double>(j, "profile", "uplink_bps");
  p.backhaul_bps = get_req<double>(j, "profile", "backhaul_bps");
  p.cloud_bps = get_req<double>(j, "profile", "cloud_bps");
  p.validate();
  return p;
}

SweepSpec parse_sweep(const json& j) {
  expect_object(j, "sweep");
  reject_unknown(j, "sweep", {"qtau", "tau_values", "m_values"});
  SweepSpec s;
  s.qtau = get_or<int>(j, "qtau", s.qtau);
  s.tau_values = get_or<std::vector<int>>(j, "tau_values", s.tau_values);
  s.m_values = get_or<std::vector<int>>(j, "m_values", s.m_values);
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_object(j, "config");
  reject_unknown(j, "config",
                 {"run", "model", "data", "topology", "profile", "output", "seeds", "sweep"});
  ExperimentConfig c;
  c.run = parse_run(require(j, "config", "run"));
  c.model = parse_model(require(j, "config", "model"));
  c.data = parse_data(require(j, "config", "data"));
  c.topology = parse_topology(require(j, "config", "topology"));
  if (j.contains("profile")) c.profile = parse_profile(j.at("profile"));
  if (j.contains("output")) {
    expect_object(j.at("output"), "output");
    reject_unknown(j.at("output"), "output", {"dir"});
    c.out_dir = get_or<std::string>(j.at("output"), "dir", c.out_dir);
  }
  if (j.contains("seeds")) {
    c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", c.seeds);
    if (c.seeds.empty()) throw ConfigError("seeds: must not be empty");
  }
  if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));

  if (c.topology.devices < 1 || c.topology.clusters < 1 ||
      c.topology.clusters > c.topology.devices) {
    throw ConfigError("topology: need 1 <= clusters <= devices");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "desk-quadratic") {
    c.run.tau = 2;
    c.run.q = 2;
    c.run.pi = 2;
    c.run.rounds = 12;
    c.run.batch_size = 2;
    c.run.lr = 0.05;
    c.model.kind = "quadratic";
    c.model.dim = 8;
    c.data.source = "quadratic_fleet";
    c.data.spread = 1.0;
    c.data.samples_per_device = 4;
    c.data.sample_jitter = 0.3;
    c.topology.devices = 16;
    c.topology.clusters = 4;
    c.topology.graph = GraphKind::ring;
    c.profile = femnist_paper_profile();
    c.seeds = {1, 2, 3};
    return c;
  }
  if (name == "desk-logistic") {
    c.run.tau = 2;
    c.run.q = 8;
    c.run.pi = 10;
    c.run.rounds = 15;
    c.run.batch_size = 10;
    c.run.lr = 0.05;
    c.model.kind = "logistic";
    c.model.feature_dim = 16;
    c.model.classes = 8;
    c.data.source = "synthetic_classification";
    c.data.samples = 3200;
    c.data.separation = 2.0;
    c.data.partition.scheme = PartitionSpec::Scheme::cluster_iid_shards;
    c.data.partition.shards_per_device = 2;
    c.topology.devices = 64;
    c.topology.clusters = 8;
    c.topology.graph = GraphKind::ring;
    c.profile = femnist_paper_profile();
    c.seeds = {1, 2, 3, 4, 5};
    return c;
  }
  if (name == "femnist-paper" || name == "cifar-paper") {
    // Paper-shaped system (64 devices, 8 edge servers on a ring, pi = 10,
    // epoch-based local work, momentum, sample-size weighting) over a
    // desk-scale synthetic task.
    c.run.tau = 2;
    c.run.q = 8;
    c.run.pi = 10;
    c.run.rounds = 10;
    c.run.batch_size = 50;
    c.run.lr = 0.03;
    c.run.momentum = 0.9;
    c.run.weighting = Weighting::sample_size;
    c.run.tau_unit = TauUnit::epochs;
    c.model.kind = "mlp";
    c.model.feature_dim = 20;
    c.model.classes = 10;
    c.model.hidden = 32;
    c.data.source = "synthetic_classification";
    c.data.samples = 3200;
    c.data.separation = 2.5;
    c.data.partition.scheme = PartitionSpec::Scheme::dirichlet;
    c.data.partition.alpha = 0.5;
    c.topology.devices = 64;
    c.topology.clusters = 8;
    c.topology.graph = GraphKind::ring;
    c.profile = name == "femnist-paper" ? femnist_paper_profile() : cifar_paper_profile();
    c.seeds = {1, 2, 3, 4, 5};
    return c;
  }
  throw ConfigError("unknown preset: " + name);
}

RunContext build_context(const ExperimentConfig& config, std::uint64_t seed) {
  RunContext ctx;
  const auto& topo = config.topology;

  if (topo.assignment == "random_equal") {
    if (topo.devices % topo.clusters != 0) {
      throw ConfigError("random_equal assignment requires clusters to divide devices");
    }
    ctx.fleet.layout = ClusterLayout::random_equal(topo.devices, topo.clusters, seed);
  } else {
    ctx.fleet.layout = ClusterLayout::contiguous(topo.devices, topo.clusters);
  }

  if (config.run.algorithm == Algorithm::ce_fedavg) {
    auto graph = build_graph(topo.graph, topo.clusters, seed, topo.p_edge);
    ctx.mixing = topo.weights == "metropolis" ? MixingMatrix::metropolis(graph)
                                              : MixingMatrix::max_degree(graph);
  }

  if (config.model.kind == "quadratic") {
    ctx.model = std::make_shared<QuadraticModel>(config.model.dim);
  } else if (config.model.kind == "logistic") {
    ctx.model = std::make_shared<LogisticModel>(config.model.feature_dim, config.model.classes);
  } else {
    ctx.model = std::make_shared<MlpModel>(config.model.feature_dim, config.model.hidden,
                                           config.model.classes);
  }
  ctx.fleet.model = ctx.model.get();

  if (config.data.source == "quadratic_fleet") {
    if (config.model.kind != "quadratic") {
      throw ConfigError("data source quadratic_fleet requires model kind quadratic");
    }
    auto fleet = make_quadratic_fleet(topo.devices, config.model.dim, config.data.spread, seed,
                                      config.data.samples_per_device, config.data.sample_jitter);
    ctx.fleet.train = std::move(fleet.devices);
    ctx.exact_minimizer = std::move(fleet.global_minimizer);
    for (const auto& dev : ctx.fleet.train) {
      ctx.partition_indices.push_back({});
      (void)dev;
    }
  } else {
    DeviceDataset all;
    if (config.data.source == "synthetic_classification") {
      all = make_classification_data(config.data.samples, config.model.feature_dim,
                                     config.model.classes, config.data.separation, seed);
    } else {
      if (config.data.images.empty() || config.data.labels.empty()) {
        throw ConfigError("data: idx source requires 'images' and 'labels' paths");
      }
      all = load_idx_subset(config.data.images, config.data.labels,
                            static_cast<std::size_t>(config.data.max_samples));
    }
    auto parts = partition(all, ctx.fleet.layout, config.data.partition, seed);
    ctx.partition_indices = std::move(parts.indices);
    // Per-device train/test split; the shared test set is the union of the
    // held-out slices.
    ctx.fleet.train.resize(parts.devices.size());
    ctx.fleet.test.feature_dim = all.feature_dim;
    for (std::size_t k = 0; k < parts.devices.size(); ++k) {
      if (config.data.train_fraction >= 1.0 || parts.devices[k].rows() < 2) {
        ctx.fleet.train[k] = std::move(parts.devices[k]);
        continue;
      }
      auto [train, test] = split_train_test(parts.devices[k], config.data.train_fraction, seed);
      ctx.fleet.train[k] = std::move(train);
      for (std::size_t r = 0; r < test.rows(); ++r) {
        ctx.fleet.test.append_row(test.row(r), test.labels[r]);
      }
    }
  }
  ctx.fleet.validate();
  return ctx;
}

}  // namespace cfel
