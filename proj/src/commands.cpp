#include "cfel/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "cfel/analysis.hpp"
#include "cfel/config.hpp"
#include "cfel/io.hpp"
#include "cfel/kernels.hpp"
#include "cfel/verify.hpp"

namespace cfel {

namespace fs = std::filesystem;

namespace {

ExperimentConfig load_config(const CliOptions& options) {
  ExperimentConfig config;
  if (!options.config_path.empty()) {
    config = ExperimentConfig::from_file(options.config_path);
  } else if (!options.preset.empty()) {
    config = ExperimentConfig::preset(options.preset);
  } else {
    throw ConfigError("either --config or --preset is required");
  }
  if (!options.out_dir.empty()) config.out_dir = options.out_dir;
  if (!options.seeds.empty()) config.seeds = options.seeds;
  if (options.threads > 0) config.run.threads = options.threads;
  return config;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metrics(const fs::path& dir, const std::vector<RoundRecord>& records) {
  std::ostringstream csv;
  csv << round_record_csv_header() << "\n";
  std::ostringstream jsonl;
  for (const auto& r : records) {
    csv << round_record_csv_row(r) << "\n";
    jsonl << round_record_json(r) << "\n";
  }
  write_text_file((dir / "metrics.csv").string(), csv.str());
  write_text_file((dir / "metrics.jsonl").string(), jsonl.str());
}

// Probe points: the origin plus up to 16 round-end averaged models, evenly
// thinned across the trajectory.
std::vector<ParamVec> make_probes(const RunContext& ctx, const RunResult& result) {
  std::vector<ParamVec> probes;
  probes.emplace_back(ctx.model->dim(), 0.0);
  const auto& traj = result.round_averages;
  std::size_t want = std::min<std::size_t>(16, traj.size());
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t at = traj.size() <= want ? i : i * traj.size() / want;
    probes.push_back(traj[at]);
  }
  return probes;
}

double objective_at(const RunContext& ctx, const ParamVec& x) {
  double loss = 0.0;
  for (const auto& data : ctx.fleet.train) loss += ctx.model->mean_loss(x, data);
  return loss / static_cast<double>(ctx.fleet.train.size());
}

// Reference objective floor: exact for the quadratic testbed, otherwise the
// loss after a full-batch gradient descent refinement from the run's final
// averaged model.
double estimate_f_inf(const RunContext& ctx, const RunResult& result, double smoothness) {
  if (ctx.exact_minimizer.has_value()) return objective_at(ctx, *ctx.exact_minimizer);
  ParamVec x = result.averaged_model;
  double lr = smoothness > 0.0 ? 1.0 / (2.0 * smoothness) : 0.1;
  double best = objective_at(ctx, x);
  for (int step = 0; step < 200; ++step) {
    ParamVec g(ctx.model->dim(), 0.0);
    for (const auto& data : ctx.fleet.train) {
      ParamVec gk = full_gradient(*ctx.model, x, data);
      kernels::axpy(1.0 / static_cast<double>(ctx.fleet.train.size()), gk.data(), g.data(),
                    g.size());
    }
    kernels::axpy(-lr, g.data(), x.data(), x.size());
    if (!all_finite(x)) break;
    best = std::min(best, objective_at(ctx, x));
  }
  return best;
}

void write_analysis(const fs::path& dir, const ExperimentConfig& config, const RunContext& ctx,
                    const RunResult& result, std::uint64_t seed) {
  auto probes = make_probes(ctx, result);
  auto report = estimate_divergences(*ctx.model, ctx.fleet.train, ctx.fleet.layout, probes);
  write_text_file((dir / "divergence.json").string(), report.to_json() + "\n");

  BoundInputs in;
  in.smoothness = ctx.model->lipschitz().value_or(0.0);
  if (in.smoothness == 0.0) in.smoothness = estimate_lipschitz(*ctx.model, ctx.fleet.train, probes);
  switch (config.run.grad_mode) {
    case GradientMode::minibatch:
      in.sigma_sq = estimate_sigma_sq(*ctx.model, result.averaged_model, ctx.fleet.train,
                                      config.run.batch_size, 16, seed);
      break;
    case GradientMode::full_batch:
      in.sigma_sq = 0.0;
      break;
    case GradientMode::full_plus_noise:
      in.sigma_sq = config.run.noise_sigma * config.run.noise_sigma;
      break;
  }
  in.eps_sq = report.eps_sq;
  in.eps_i_sq = report.eps_i_sq;
  for (const auto& members : ctx.fleet.layout.members) {
    in.cluster_weight.push_back(static_cast<double>(members.size()) /
                                static_cast<double>(ctx.fleet.layout.n));
  }
  in.zeta = ctx.mixing.has_value() ? ctx.mixing->zeta() : 0.0;
  in.pi = config.run.pi;
  in.tau = config.run.tau;
  in.q = config.run.q;
  in.n = ctx.fleet.layout.n;
  in.m = ctx.fleet.layout.m;
  in.eta = config.run.lr;
  in.total_iterations = static_cast<double>(config.run.total_iterations());
  double f1 = objective_at(ctx, ctx.model->init_params(seed));
  in.f1_minus_finf = f1 - estimate_f_inf(ctx, result, in.smoothness);

  auto bound = theorem1_bound(in);
  write_text_file((dir / "bound.json").string(), bound.to_json(in) + "\n");
}

struct CellOutcome {
  std::string name;
  std::vector<double> final_loss;  // per seed
  std::vector<double> final_accuracy;
  std::vector<double> wall_seconds;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mu = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// One seeded run of a fully resolved config, emitting artifacts under dir.
void run_cell_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir,
                   bool with_analysis, CellOutcome* outcome) {
  fs::create_directories(dir);
  RunContext ctx = build_context(config, seed);
  RunConfig rc = config.run;
  rc.seed = seed;
  const MixingMatrix* mixing = ctx.mixing.has_value() ? &*ctx.mixing : nullptr;
  const SystemProfile* profile = config.profile.has_value() ? &*config.profile : nullptr;
  RunResult result = run(rc, ctx.fleet, mixing, profile);

  write_metrics(dir, result.records);
  write_checkpoint((dir / "final.ckpt").string(), result.averaged_model);
  if (!ctx.partition_indices.empty() && !ctx.partition_indices.front().empty()) {
    write_text_file((dir / "partition.json").string(),
                    partition_manifest_json(ctx.partition_indices) + "\n");
  }
  if (with_analysis) write_analysis(dir, config, ctx, result, seed);
  if (outcome != nullptr) {
    outcome->final_loss.push_back(result.records.back().global_loss);
    outcome->final_accuracy.push_back(result.records.back().test_accuracy);
    outcome->wall_seconds.push_back(result.records.back().wall_sim_seconds);
  }
}

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int cmd_run(const CliOptions& options) {
  return guard([&] {
    ExperimentConfig config = load_config(options);
    for (std::uint64_t seed : config.seeds) {
      fs::path dir = fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
      run_cell_seed(config, seed, dir, /*with_analysis=*/true, nullptr);
      std::cout << "seed " << seed << ": wrote " << dir.string() << "\n";
    }
    return 0;
  });
}

int cmd_sweep(const CliOptions& options) {
  return guard([&] {
    ExperimentConfig base = load_config(options);
    std::vector<std::pair<std::string, ExperimentConfig>> cells;

    if (options.sweep_axis == "tau_fixed_qtau") {
      for (int tau : base.sweep.tau_values) {
        if (base.sweep.qtau % tau != 0) {
          throw ConfigError("sweep: qtau " + std::to_string(base.sweep.qtau) +
                            " is not divisible by tau " + std::to_string(tau));
        }
        ExperimentConfig cell = base;
        cell.run.tau = tau;
        cell.run.q = base.sweep.qtau / tau;
        cells.emplace_back("tau_" + std::to_string(tau), std::move(cell));
      }
    } else if (options.sweep_axis == "m") {
      for (int m : base.sweep.m_values) {
        ExperimentConfig cell = base;
        cell.topology.clusters = m;
        cell.topology.assignment = "random_equal";
        cells.emplace_back("m_" + std::to_string(m), std::move(cell));
      }
    } else if (options.sweep_axis == "partition") {
      for (auto scheme : {PartitionSpec::Scheme::cluster_iid_shards,
                          PartitionSpec::Scheme::cluster_noniid_shards}) {
        ExperimentConfig cell = base;
        cell.data.partition.scheme = scheme;
        cells.emplace_back(scheme == PartitionSpec::Scheme::cluster_iid_shards
                               ? "cluster_iid"
                               : "cluster_noniid",
                           std::move(cell));
      }
    } else {
      throw ConfigError("sweep: unknown axis '" + options.sweep_axis +
                        "' (expected tau_fixed_qtau, m, or partition)");
    }

    fs::path root = fs::path(base.out_dir) / options.sweep_axis;
    std::vector<CellOutcome> outcomes(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());

    auto run_cell = [&](std::size_t idx) {
      try {
        const auto& [name, cell] = cells[idx];
        outcomes[idx].name = name;
        for (std::uint64_t seed : cell.seeds) {
          fs::path dir = root / name / ("seed_" + std::to_string(seed));
          run_cell_seed(cell, seed, dir, /*with_analysis=*/false, &outcomes[idx]);
        }
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    };

    if (options.parallel_cells && cells.size() > 1) {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < cells.size(); ++i) pool.emplace_back(run_cell, i);
      for (auto& th : pool) th.join();
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    }
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }

    std::ostringstream summary;
    summary << "cell,seeds,mean_final_loss,stderr_final_loss,mean_final_accuracy,"
               "stderr_final_accuracy,mean_wall_seconds\n";
    for (const auto& oc : outcomes) {
      summary << oc.name << ',' << oc.final_loss.size() << ',' << fmt17(mean(oc.final_loss))
              << ',' << fmt17(stderr_of(oc.final_loss)) << ',' << fmt17(mean(oc.final_accuracy))
              << ',' << fmt17(stderr_of(oc.final_accuracy)) << ','
              << fmt17(mean(oc.wall_seconds)) << "\n";
    }
    fs::create_directories(root);
    write_text_file((root / "summary.csv").string(), summary.str());
    std::cout << "wrote " << (root / "summary.csv").string() << "\n";
    return 0;
  });
}

int cmd_verify() {
  return guard([&] {
    const std::uint64_t seeds[] = {1, 2, 3};
    auto results = run_all_checks(seeds);
    bool all_pass = true;
    for (const auto& r : results) {
      std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name << ": " << r.detail << "\n";
      all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
  });
}

}  // namespace cfel
