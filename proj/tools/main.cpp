#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "ratesched/allocator.hpp"
#include "ratesched/config.hpp"
#include "ratesched/csv.hpp"
#include "ratesched/dual_cost.hpp"
#include "ratesched/heavy_traffic.hpp"
#include "ratesched/queue_sim.hpp"
#include "ratesched/rdrs.hpp"
#include "ratesched/rng.hpp"
#include "ratesched/stats.hpp"

namespace rs = ratesched;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int jobs = 4;
  long long seed = -1;
};

rs::ExperimentConfig load_config(const Options& opt) {
  rs::ExperimentConfig cfg = rs::ExperimentConfig::from_file(opt.config_path);
  cfg.apply_overrides(opt.overrides);
  if (!opt.out_dir.empty()) cfg.apply_override("output.directory=\"" + opt.out_dir + "\"");
  if (opt.seed >= 0) cfg.apply_override("seed=" + std::to_string(opt.seed));
  return cfg;
}

std::string out_dir(const rs::ExperimentConfig& cfg) {
  return cfg.doc().at("output").at("directory").get<std::string>();
}

int run_simulate(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "simulate", cfg);

  const auto gen = cfg.make_generator();
  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();
  const auto traffic = cfg.make_traffic();
  const Eigen::MatrixXd rho = rs::balanced_points(region);
  const auto& sim = cfg.doc().at("simulate");
  const double horizon = sim.at("horizon").get<double>();
  const double grid_step = sim.at("grid_step").get<double>();
  const bool event_log = sim.at("event_log").get<bool>();

  const auto policy = rs::make_policy(sim.at("policy").get<std::string>(), region, utility,
                                      traffic.mu, rho);
  const auto env = rs::sample_path(gen, horizon, cfg.initial_state(), cfg.seed());
  const auto traj =
      rs::simulate(traffic, region, policy, env, horizon, grid_step, cfg.seed(), rho, event_log);

  rs::CsvWriter csv((fs::path(dir) / "trajectory.csv").string());
  std::vector<std::string> cols{"time", "state"};
  for (int j = 0; j < traffic.users(); ++j) cols.push_back("Q_" + std::to_string(j + 1));
  cols.push_back("W");
  cols.push_back("Y");
  for (int j = 0; j < traffic.users(); ++j) cols.push_back("T_" + std::to_string(j + 1));
  csv.header(cols);
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    csv.field(traj.times[r]).field(traj.states[r]);
    for (int j = 0; j < traffic.users(); ++j) csv.field(traj.queue(ri, j));
    csv.field(traj.workload(ri)).field(traj.unused(ri));
    for (int j = 0; j < traffic.users(); ++j) csv.field(traj.service(ri, j));
    csv.end_row();
  }

  if (event_log) {
    std::ofstream events(fs::path(dir) / "events.jsonl");
    for (const auto& ev : traj.events) {
      nlohmann::json line;
      line["t"] = ev.time;
      line["type"] = std::string(1, ev.type);
      line["user"] = ev.user;
      line["state"] = ev.state;
      events << line.dump() << "\n";
    }
  }
  std::cout << "simulate: " << traj.times.size() << " grid rows, " << traj.arrivals.sum()
            << " arrivals, " << traj.departures.sum() << " departures -> " << dir << "\n";
  return 0;
}

int run_sweep_cmd(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "sweep", cfg);

  const auto gen = cfg.make_generator();
  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();

  rs::SweepRequest req;
  req.spec = cfg.make_heavy_spec();
  req.policies = cfg.doc().at("heavy_traffic").at("policies").get<std::vector<std::string>>();
  req.root_seed = cfg.seed();
  req.jobs = opt.jobs;
  req.initial_state = cfg.initial_state();
  const auto rows = rs::run_sweep(req, gen, region, utility);

  rs::CsvWriter csv((fs::path(dir) / "sweep.csv").string());
  csv.header({"r", "seed", "policy", "sup_collapse", "avg_collapse", "avg_w_hat", "sup_fluid"});
  for (const auto& row : rows) {
    csv.field(row.r)
        .field(row.seed_index)
        .field(row.policy)
        .field(row.sup_collapse)
        .field(row.avg_collapse)
        .field(row.avg_w_hat)
        .field(row.sup_fluid);
    csv.end_row();
  }
  std::cout << "sweep: " << rows.size() << " rows -> " << dir << "\n";
  return 0;
}

int run_rdrs_cmd(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "rdrs", cfg);

  const auto gen = cfg.make_generator();
  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();
  const Eigen::MatrixXd rho = rs::balanced_points(region);
  const auto spec = cfg.make_rdrs_spec(rho);
  const auto& rd = cfg.doc().at("rdrs");
  const int ensemble = rd.at("ensemble").get<int>();
  const double t_probe = rd.at("t_probe").get<double>();
  const int export_paths = rd.at("export_paths").get<int>();
  const bool export_lift = rd.at("export_lift").get<bool>();

  const Eigen::VectorXd samples = rs::rdrs_workload_samples(
      spec, gen, cfg.initial_state(), ensemble, t_probe, cfg.seed(), opt.jobs);

  nlohmann::json summary;
  std::vector<double> values(samples.data(), samples.data() + samples.size());
  const auto ms = rs::mean_se(values);
  summary["ensemble"] = ensemble;
  summary["t_probe"] = t_probe;
  summary["mean_w"] = ms.mean;
  summary["se_w"] = ms.se;
  double var = 0.0;
  for (double v : values) var += (v - ms.mean) * (v - ms.mean);
  summary["var_w"] = values.size() > 1 ? var / (values.size() - 1) : 0.0;
  std::ofstream(fs::path(dir) / "rdrs_summary.json") << summary.dump(2) << "\n";

  for (int p = 0; p < export_paths; ++p) {
    const std::uint64_t seed = rs::derive_seed(cfg.seed(), rs::Stream::Replica,
                                               static_cast<std::uint64_t>(p), 7);
    const auto env = rs::sample_path(gen, spec.horizon, cfg.initial_state(), seed);
    auto path = rs::simulate_rdrs(spec, env, seed);
    if (export_lift) rs::lift_to_queues(path, utility, spec.mu, rho);
    rs::CsvWriter csv((fs::path(dir) / ("rdrs_path_" + std::to_string(p) + ".csv")).string());
    std::vector<std::string> cols{"time", "state", "X", "Y", "W"};
    if (export_lift) {
      for (int j = 0; j < cfg.users(); ++j) cols.push_back("Q_" + std::to_string(j + 1));
    }
    csv.header(cols);
    for (std::size_t r = 0; r < path.times.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      csv.field(path.times[r]).field(path.states[r]);
      csv.field(path.x(ri)).field(path.y(ri)).field(path.w(ri));
      if (export_lift) {
        for (int j = 0; j < cfg.users(); ++j) csv.field(path.q(ri, j));
      }
      csv.end_row();
    }
  }
  std::cout << "rdrs: ensemble " << ensemble << ", mean W(" << t_probe << ") = " << ms.mean
            << " -> " << dir << "\n";
  return 0;
}

int run_compare(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "compare", cfg);

  const auto gen = cfg.make_generator();
  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();
  const Eigen::MatrixXd rho = rs::balanced_points(region);
  const auto spec = cfg.make_rdrs_spec(rho);
  const auto& rd = cfg.doc().at("rdrs");
  const double t_probe = rd.at("t_probe").get<double>();
  const int ensemble = rd.at("ensemble").get<int>();
  const double r = cfg.doc().at("compare").at("r").get<double>();
  const int replicas = cfg.doc().at("compare").at("replicas").get<int>();

  rs::SweepRequest req;
  req.spec = cfg.make_heavy_spec();
  req.policies = {"utility-max"};
  req.root_seed = cfg.seed();
  req.jobs = opt.jobs;
  req.initial_state = cfg.initial_state();

  const Eigen::VectorXd sim_samples = rs::sweep_workload_samples(
      req, gen, region, utility, r, "utility-max", t_probe, replicas);
  const Eigen::VectorXd rdrs_samples = rs::rdrs_workload_samples(
      spec, gen, cfg.initial_state(), ensemble, t_probe, cfg.seed(), opt.jobs);

  const auto cmp = rs::compare_to_simulation(
      {rdrs_samples.data(), rdrs_samples.data() + rdrs_samples.size()},
      {sim_samples.data(), sim_samples.data() + sim_samples.size()});

  nlohmann::json report;
  report["r"] = r;
  report["t_probe"] = t_probe;
  report["ks"] = cmp.ks;
  report["critical_5pct"] = cmp.critical_5pct;
  report["critical_1pct"] = cmp.critical_1pct;
  report["below_1pct"] = cmp.below_1pct;
  report["rdrs_mean"] = cmp.first.mean;
  report["rdrs_se"] = cmp.first.se;
  report["sim_mean"] = cmp.second.mean;
  report["sim_se"] = cmp.second.se;
  std::ofstream(fs::path(dir) / "compare.json") << report.dump(2) << "\n";

  std::cout << "compare: KS = " << cmp.ks << " (1% critical " << cmp.critical_1pct << ") "
            << (cmp.below_1pct ? "PASS" : "FAIL") << " -> " << dir << "\n";
  return cmp.below_1pct ? 0 : 3;
}

int run_capacity_trace(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "capacity-trace", cfg);

  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();
  const int nu_grid = cfg.doc().at("capacity_trace").at("nu_grid").get<int>();
  const int users = cfg.users();

  rs::CsvWriter csv((fs::path(dir) / "boundary.csv").string());
  std::vector<std::string> cols{"state"};
  for (int j = 0; j < users; ++j) cols.push_back("nu_" + std::to_string(j + 1));
  for (int j = 0; j < users; ++j) cols.push_back("c_" + std::to_string(j + 1));
  cols.push_back("active_residual");
  csv.header(cols);

  // trace the surface with the utility-side solver: maximize nu . c
  int rows = 0;
  for (int i = 0; i < region.states(); ++i) {
    for (int g = 0; g < nu_grid; ++g) {
      double t = nu_grid == 1 ? 0.5 : static_cast<double>(g) / (nu_grid - 1);
      t = std::min(0.98, std::max(0.02, t));  // extreme priorities leave the argmax unique
      Eigen::VectorXd nu(users);
      if (users == 1) {
        nu(0) = 1.0;
      } else if (users == 2) {
        nu << t, 1.0 - t;
      } else {
        // coarse diagonal sweep for more users
        for (int j = 0; j < users; ++j) nu(j) = 1.0 + t * j;
        nu /= nu.sum();
      }
      const auto res = rs::maximize_on_region(region, i, rs::linear_objective(nu));
      double active = -1e300;
      for (const auto& f : region.facets(i)) active = std::max(active, f.value(res.c));
      csv.field(i);
      for (int j = 0; j < users; ++j) csv.field(nu(j));
      for (int j = 0; j < users; ++j) csv.field(res.c(j));
      csv.field(std::abs(active));
      csv.end_row();
      ++rows;
    }
  }
  std::cout << "capacity-trace: " << rows << " boundary points -> " << dir << "\n";
  return 0;
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

int run_verify(const Options& opt) {
  auto cfg = load_config(opt);
  const auto dir = out_dir(cfg);
  rs::write_manifest(dir, "verify", cfg);

  const auto region = cfg.make_region();
  const auto utility = cfg.make_utility();
  const auto traffic = cfg.make_traffic();
  const auto& ver = cfg.doc().at("verify");
  const int kkt_instances = ver.at("kkt_instances").get<int>();
  const int random_points = ver.at("random_points").get<int>();
  const int homogeneity_trials = ver.at("homogeneity_trials").get<int>();
  const int continuity_trials = ver.at("continuity_trials").get<int>();
  const auto workloads = ver.at("workloads").get<std::vector<double>>();

  std::vector<CheckResult> results;
  auto eng = rs::make_engine(cfg.seed(), rs::Stream::Probe);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> qdist(0.05, 8.0);
  const int users = cfg.users();

  auto random_feasible = [&](int state) {
    Eigen::VectorXd d(users);
    for (int j = 0; j < users; ++j) d(j) = unif(eng) + 1e-3;
    return (unif(eng) * rs::boundary_scale(region, state, d)) * d;
  };

  // region properties
  {
    bool convex = true, monotone = true;
    double worst_chord = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const int i = t % region.states();
      const Eigen::VectorXd a = random_feasible(i);
      const Eigen::VectorXd b = random_feasible(i);
      const double lam = unif(eng);
      const Eigen::VectorXd mid = lam * a + (1 - lam) * b;
      if (region.membership(i, mid) == rs::Membership::Outside) convex = false;
      for (const auto& f : region.facets(i)) {
        worst_chord = std::max(worst_chord,
                               f.value(mid) - (lam * f.value(a) + (1 - lam) * f.value(b)));
      }
      Eigen::VectorXd down = mid;
      for (int j = 0; j < users; ++j) down(j) *= unif(eng);
      if (region.membership(i, down) == rs::Membership::Outside) monotone = false;
    }
    results.push_back({"region-convexity", convex && worst_chord < 1e-9,
                       "max chord violation " + std::to_string(worst_chord)});
    results.push_back({"region-free-disposal", monotone, "1000 random downscalings"});
  }
  {
    bool ok = true;
    std::string detail;
    try {
      for (int i = 0; i < region.states(); ++i) {
        const auto bp = rs::balanced_point(region, i);
        if (region.membership(i, bp.rho) != rs::Membership::Boundary) ok = false;
        if (std::abs(bp.rho.sum() - bp.sum_capacity) > 1e-8) ok = false;
      }
      detail = "equal split on the sum-capacity facet";
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    results.push_back({"balanced-point", ok, detail});
  }
  results.push_back({"facet-count",
                     rs::facet_count(2) == 5 && rs::interior_facet_count(2) == 3 &&
                         rs::facet_count(3) == 16,
                     "L(2)=5, B(2)=3, L(3)=16"});

  // allocator properties
  {
    double worst_res = 0.0;
    bool dominance = true;
    for (int t = 0; t < kkt_instances; ++t) {
      const int i = t % region.states();
      Eigen::VectorXd q(users);
      for (int j = 0; j < users; ++j) q(j) = qdist(eng);
      const auto alloc = rs::allocate(region, i, q, utility);
      worst_res = std::max(worst_res, alloc.kkt_residual);
      double best = -1e300;
      for (int s = 0; s < random_points; ++s) {
        const Eigen::VectorXd c = random_feasible(i);
        double v = 0.0;
        for (int j = 0; j < users; ++j) v += utility.utility(j, q(j), c(j));
        best = std::max(best, v);
      }
      double va = 0.0;
      for (int j = 0; j < users; ++j) va += utility.utility(j, q(j), alloc.rates(j));
      if (va < best - 1e-9) dominance = false;
    }
    results.push_back({"allocator-kkt", worst_res < 1e-7,
                       "worst residual " + std::to_string(worst_res)});
    results.push_back({"allocator-dominance", dominance,
                       std::to_string(kkt_instances) + "x" + std::to_string(random_points) +
                           " random feasible points"});
  }
  {
    double worst = 0.0;
    for (int t = 0; t < homogeneity_trials; ++t) {
      const int i = t % region.states();
      Eigen::VectorXd q(users);
      for (int j = 0; j < users; ++j) q(j) = qdist(eng);
      const double a = 0.25 + 8.0 * unif(eng);
      worst = std::max(worst,
                       rs::is_radially_homogeneous(region, i, utility, q, a).discrepancy);
    }
    results.push_back({"allocator-homogeneity", worst < 1e-6,
                       "worst |Lambda(aq)-Lambda(q)| = " + std::to_string(worst)});
  }
  {
    double worst = 0.0;
    for (int t = 0; t < continuity_trials; ++t) {
      const int i = t % region.states();
      Eigen::VectorXd q(users);
      for (int j = 0; j < users; ++j) q(j) = 0.2 + qdist(eng);
      Eigen::VectorXd d(users);
      for (int j = 0; j < users; ++j) d(j) = 2.0 * unif(eng) - 1.0;
      const auto base = rs::allocate(region, i, q, utility).rates;
      const auto moved = rs::allocate(region, i, (q + 1e-6 * d).eval(), utility).rates;
      worst = std::max(worst, (moved - base).lpNorm<1>());
    }
    results.push_back({"allocator-continuity", worst < 1e-4,
                       "worst drift " + std::to_string(worst) + " at distance 1e-6"});
  }

  // dual-cost properties
  {
    double worst = 0.0;
    std::string detail;
    bool ok = true;
    try {
      for (double w : workloads) {
        for (int i = 0; i < region.states(); ++i) {
          worst = std::max(worst, rs::duality_roundtrip(region, i, utility, traffic.mu, w));
        }
      }
      detail = "worst roundtrip " + std::to_string(worst);
      ok = worst < 1e-6;
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    results.push_back({"duality-roundtrip", ok, detail});
  }
  {
    bool ok = true;
    std::string detail;
    try {
      const double w = ver.at("utilization_workload").get<double>();
      const double sigma = ver.at("utilization_sigma_frac").get<double>() * w;
      const int samples = ver.at("utilization_samples").get<int>();
      double worst = 0.0;
      for (int i = 0; i < region.states(); ++i) {
        worst = std::max(worst, rs::full_utilization_check(region, i, utility, traffic.mu, w,
                                                           sigma, samples, cfg.seed())
                                    .worst_gap);
      }
      ok = worst < 1e-4;
      detail = "worst sum-rate gap " + std::to_string(worst);
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    results.push_back({"full-utilization", ok, detail});
  }
  {
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const double q = 0.05 + 8.0 * unif(eng);
      const double c = 0.05 + 3.0 * unif(eng);
      const int j = t % users;
      const double lhs = rs::user_cost_q_derivative(utility, traffic.mu, j, q, c);
      const double rhs = utility.marginal(j, q, c) / traffic.mu(j);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    results.push_back({"marginal-identity", worst < 1e-10, "worst gap " + std::to_string(worst)});
  }
  {
    bool ok = true;
    for (double w : workloads) {
      const auto bp = rs::balanced_point(region, 0);
      const auto fp = rs::fixed_point(utility, traffic.mu, w, bp.rho);
      if (std::abs(fp.workload - w) > 1e-8 * std::max(1.0, w)) ok = false;
      if (w > 0.0 && !(fp.q.array() > 0.0).all()) ok = false;
    }
    results.push_back({"fixed-point-tightness", ok, "workload constraint tight, q* > 0"});
  }

  bool all_pass = true;
  std::printf("%-24s %-6s %s\n", "check", "status", "detail");
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    std::printf("%-24s %-6s %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
  }
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"utility-maximizing rate scheduling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config_path, "experiment configuration file")->required();
  app.add_option("--set", opt.overrides, "override a config field, path=value");
  app.add_option("--out", opt.out_dir, "output directory (overrides output.directory)");
  app.add_option("--jobs", opt.jobs, "worker threads for sweeps and ensembles");
  app.add_option("--seed", opt.seed, "root seed (overrides config seed)");

  auto* sim = app.add_subcommand("simulate", "run one trajectory and export it");
  auto* sweep = app.add_subcommand("sweep", "heavy-traffic ladder of simulations");
  auto* rdrs = app.add_subcommand("rdrs", "limit-model ensemble");
  auto* compare = app.add_subcommand("compare", "simulation vs RDRS distributional comparison");
  auto* trace = app.add_subcommand("capacity-trace", "export capacity boundary points");
  auto* verify = app.add_subcommand("verify", "run the property suites and print a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return run_simulate(opt);
    if (sweep->parsed()) return run_sweep_cmd(opt);
    if (rdrs->parsed()) return run_rdrs_cmd(opt);
    if (compare->parsed()) return run_compare(opt);
    if (trace->parsed()) return run_capacity_trace(opt);
    if (verify->parsed()) return run_verify(opt);
  } catch (const rs::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
