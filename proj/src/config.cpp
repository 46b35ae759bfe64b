#include "ratesched/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace ratesched {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& require(const json& doc, const std::string& key, const std::string& path) {
  if (!doc.contains(key)) fail(path + key, "missing required field");
  return doc.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double as_positive(const json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (!(x > 0.0)) fail(path, "must be positive");
  return x;
}

int as_count(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const long long x = v.get<long long>();
  if (x < 1) fail(path, "must be >= 1");
  return static_cast<int>(x);
}

Eigen::VectorXd as_vector(const json& v, const std::string& path, int expected = -1) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array");
  if (expected >= 0 && static_cast<int>(v.size()) != expected) {
    fail(path, "expected " + std::to_string(expected) + " entries, got " +
                   std::to_string(v.size()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = as_number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& path, int rows = -1, int cols = -1) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of rows");
  if (rows >= 0 && static_cast<int>(v.size()) != rows) {
    fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
  }
  Eigen::VectorXd first = as_vector(v[0], path + "[0]", cols);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), first.size());
  out.row(0) = first;
  for (std::size_t i = 1; i < v.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        as_vector(v[i], path + "[" + std::to_string(i) + "]", static_cast<int>(first.size()));
  }
  return out;
}

void set_default(json& doc, const std::string& key, json value) {
  if (!doc.contains(key)) doc[key] = std::move(value);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: parse error: " + std::string(e.what()));
  }
  return from_json(std::move(doc));
}

ExperimentConfig ExperimentConfig::from_json(json doc) {
  ExperimentConfig cfg;
  cfg.doc_ = std::move(doc);
  cfg.normalize_and_validate();
  return cfg;
}

void ExperimentConfig::normalize_and_validate() {
  if (!doc_.is_object()) throw ConfigError("config: root must be an object");
  set_default(doc_, "seed", 1);
  if (!doc_.at("seed").is_number_integer() || doc_.at("seed").get<long long>() < 0) {
    fail("seed", "expected a nonnegative integer");
  }

  // environment
  const json& env = require(doc_, "environment", "");
  const Eigen::VectorXd rates = as_vector(require(env, "holding_rates", "environment."),
                                          "environment.holding_rates");
  const int k = static_cast<int>(rates.size());
  for (int i = 0; i < k; ++i) {
    if (!(rates(i) > 0.0)) fail("environment.holding_rates[" + std::to_string(i) + "]", "must be positive");
  }
  as_matrix(require(env, "embedded_matrix", "environment."), "environment.embedded_matrix", k, k);
  set_default(doc_["environment"], "initial_state", 0);
  const int init = doc_["environment"]["initial_state"].get<int>();
  if (init < 0 || init >= k) fail("environment.initial_state", "state index out of range");

  // traffic drives the user count
  const json& traffic = require(doc_, "traffic", "");
  const Eigen::VectorXd mu = as_vector(require(traffic, "mu", "traffic."), "traffic.mu");
  const int users = static_cast<int>(mu.size());
  for (int j = 0; j < users; ++j) {
    if (!(mu(j) > 0.0)) fail("traffic.mu[" + std::to_string(j) + "]", "must be positive");
  }
  const Eigen::VectorXd beta_sq =
      as_vector(require(traffic, "beta_sq", "traffic."), "traffic.beta_sq", users);
  for (int j = 0; j < users; ++j) {
    if (!(beta_sq(j) > 0.0)) fail("traffic.beta_sq[" + std::to_string(j) + "]", "must be positive");
  }
  const Eigen::MatrixXd lambda =
      as_matrix(require(traffic, "lambda", "traffic."), "traffic.lambda", k, users);
  if ((lambda.array() < 0.0).any()) fail("traffic.lambda", "entries must be nonnegative");
  const Eigen::MatrixXd alpha_sq =
      as_matrix(require(traffic, "alpha_sq", "traffic."), "traffic.alpha_sq", k, users);
  if (!(alpha_sq.array() > 0.0).all()) fail("traffic.alpha_sq", "entries must be positive");

  // region
  const json& region = require(doc_, "region", "");
  const std::string kind = require(region, "kind", "region.").get<std::string>();
  if (kind == "simplex") {
    as_vector(require(region, "sum_capacity", "region."), "region.sum_capacity", k);
  } else if (kind == "mac2" || kind == "bc2") {
    const json& states = require(region, "states", "region.");
    if (!states.is_array() || static_cast<int>(states.size()) != k) {
      fail("region.states", "expected one entry per environment state");
    }
    for (int i = 0; i < k; ++i) {
      const std::string p = "region.states[" + std::to_string(i) + "].";
      as_vector(require(states[static_cast<std::size_t>(i)], "h", p), p + "h", users);
      if (kind == "mac2") {
        const Eigen::VectorXd pw =
            as_vector(require(states[static_cast<std::size_t>(i)], "p", p), p + "p", users);
        if (!(pw.array() > 0.0).all()) fail(p + "p", "powers must be positive");
      }
    }
    if (kind == "bc2") {
      as_positive(require(region, "total_power", "region."), "region.total_power");
      set_default(doc_["region"], "nu_grid", 21);
      set_default(doc_["region"], "split_grid", 9);
      set_default(doc_["region"], "powers", json::array());
    }
  } else if (kind == "mimo-mac") {
    const Eigen::VectorXd pw =
        as_vector(require(region, "powers", "region."), "region.powers", users);
    if (!(pw.array() > 0.0).all()) fail("region.powers", "powers must be positive");
    const json& states = require(region, "states", "region.");
    if (!states.is_array() || static_cast<int>(states.size()) != k) {
      fail("region.states", "expected one entry per environment state");
    }
    for (int i = 0; i < k; ++i) {
      const std::string p = "region.states[" + std::to_string(i) + "].";
      const json& chans = require(states[static_cast<std::size_t>(i)], "channels", p);
      if (!chans.is_array() || static_cast<int>(chans.size()) != users) {
        fail(p + "channels", "expected one channel matrix per user");
      }
      for (int j = 0; j < users; ++j) {
        const std::string cp = p + "channels[" + std::to_string(j) + "].";
        const Eigen::MatrixXd re = as_matrix(
            require(chans[static_cast<std::size_t>(j)], "re", cp), cp + "re");
        as_matrix(require(chans[static_cast<std::size_t>(j)], "im", cp), cp + "im",
                  static_cast<int>(re.rows()), static_cast<int>(re.cols()));
        if (re.rows() != 1) fail(cp + "re", "region construction needs single-antenna users");
      }
    }
  } else if (kind == "custom") {
    const std::string name = require(region, "name", "region.").get<std::string>();
    if (name != "ellipsoid") fail("region.name", "unknown custom region '" + name + "'");
    as_matrix(require(region, "semi_axes", "region."), "region.semi_axes", k, users);
  } else {
    fail("region.kind", "unknown kind '" + kind + "'");
  }

  // utility
  const json& utility = require(doc_, "utility", "");
  const std::string family = require(utility, "family", "utility.").get<std::string>();
  if (family == "linear-log") {
    set_default(doc_["utility"], "weights", json::array());
    if (doc_["utility"]["weights"].empty()) {
      doc_["utility"]["weights"] = std::vector<double>(static_cast<std::size_t>(users), 1.0);
    }
    const Eigen::VectorXd w = as_vector(doc_["utility"]["weights"], "utility.weights", users);
    if (!(w.array() > 0.0).all()) fail("utility.weights", "weights must be positive");
  } else if (family == "power") {
    as_positive(require(utility, "beta", "utility."), "utility.beta");
    const double alpha = as_number(require(utility, "alpha", "utility."), "utility.alpha");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("utility.alpha", "must lie in (0,1)");
  } else {
    fail("utility.family", "unknown family '" + family + "'");
  }

  // simulate
  set_default(doc_, "simulate", json::object());
  json& sim = doc_["simulate"];
  set_default(sim, "horizon", 100.0);
  set_default(sim, "grid_step", 0.1);
  set_default(sim, "policy", "utility-max");
  set_default(sim, "event_log", false);
  as_positive(sim["horizon"], "simulate.horizon");
  as_positive(sim["grid_step"], "simulate.grid_step");
  {
    const std::string policy = sim["policy"].get<std::string>();
    if (policy != "utility-max" && policy != "maxweight" && policy != "static-rho") {
      fail("simulate.policy", "unknown policy '" + policy + "'");
    }
  }

  // heavy_traffic
  set_default(doc_, "heavy_traffic", json::object());
  json& ht = doc_["heavy_traffic"];
  set_default(ht, "theta", json::array());
  if (ht["theta"].empty()) {
    ht["theta"] = std::vector<std::vector<double>>(
        static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(users), -0.25));
  }
  as_matrix(ht["theta"], "heavy_traffic.theta", k, users);
  set_default(ht, "r_ladder", std::vector<double>{4, 8, 16, 32});
  {
    const Eigen::VectorXd ladder = as_vector(ht["r_ladder"], "heavy_traffic.r_ladder");
    for (Eigen::Index i = 0; i < ladder.size(); ++i) {
      if (!(ladder(i) > 0.0)) fail("heavy_traffic.r_ladder", "entries must be positive");
      if (i > 0 && ladder(i) <= ladder(i - 1)) {
        fail("heavy_traffic.r_ladder", "entries must be strictly increasing");
      }
    }
  }
  set_default(ht, "replicas", 20);
  as_count(ht["replicas"], "heavy_traffic.replicas");
  set_default(ht, "horizon", 5.0);
  as_positive(ht["horizon"], "heavy_traffic.horizon");
  set_default(ht, "grid_step", 0.05);
  as_positive(ht["grid_step"], "heavy_traffic.grid_step");
  set_default(ht, "policies", std::vector<std::string>{"utility-max", "static-rho", "maxweight"});

  // rdrs
  set_default(doc_, "rdrs", json::object());
  json& rd = doc_["rdrs"];
  set_default(rd, "dt", 1e-3);
  as_positive(rd["dt"], "rdrs.dt");
  set_default(rd, "horizon", ht["horizon"]);
  as_positive(rd["horizon"], "rdrs.horizon");
  set_default(rd, "ensemble", 200);
  as_count(rd["ensemble"], "rdrs.ensemble");
  set_default(rd, "t_probe", rd["horizon"].get<double>() / 2.0);
  set_default(rd, "export_paths", 1);
  set_default(rd, "export_lift", false);

  // compare
  set_default(doc_, "compare", json::object());
  json& cmp = doc_["compare"];
  set_default(cmp, "r", ht["r_ladder"].back());
  set_default(cmp, "replicas", 100);
  as_count(cmp["replicas"], "compare.replicas");

  // capacity trace
  set_default(doc_, "capacity_trace", json::object());
  set_default(doc_["capacity_trace"], "nu_grid", 21);
  as_count(doc_["capacity_trace"]["nu_grid"], "capacity_trace.nu_grid");

  // verify
  set_default(doc_, "verify", json::object());
  json& ver = doc_["verify"];
  set_default(ver, "kkt_instances", 200);
  set_default(ver, "random_points", 200);
  set_default(ver, "homogeneity_trials", 25);
  set_default(ver, "continuity_trials", 20);
  set_default(ver, "workloads", std::vector<double>{0.5, 1.0, 4.0, 10.0});
  set_default(ver, "utilization_samples", 100);
  set_default(ver, "utilization_sigma_frac", 0.01);
  set_default(ver, "utilization_workload", 4.0);

  // output
  set_default(doc_, "output", json::object());
  set_default(doc_["output"], "directory", "out");
}

std::string ExperimentConfig::serialize() const { return doc_.dump(2); }

std::uint64_t ExperimentConfig::hash() const {
  const std::string s = doc_.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::seed() const { return doc_.at("seed").get<std::uint64_t>(); }

int ExperimentConfig::users() const {
  return static_cast<int>(doc_.at("traffic").at("mu").size());
}

int ExperimentConfig::states() const {
  return static_cast<int>(doc_.at("environment").at("holding_rates").size());
}

int ExperimentConfig::initial_state() const {
  return doc_.at("environment").at("initial_state").get<int>();
}

EnvGenerator ExperimentConfig::make_generator() const {
  const json& env = doc_.at("environment");
  return build_generator(as_vector(env.at("holding_rates"), "environment.holding_rates"),
                         as_matrix(env.at("embedded_matrix"), "environment.embedded_matrix"));
}

CapacityRegion ExperimentConfig::make_region() const {
  const json& region = doc_.at("region");
  const std::string kind = region.at("kind").get<std::string>();
  const int k = states();
  const int j = users();
  if (kind == "simplex") {
    const Eigen::VectorXd cu = as_vector(region.at("sum_capacity"), "region.sum_capacity", k);
    return CapacityRegion::simplex(j, {cu.data(), cu.data() + cu.size()});
  }
  if (kind == "mac2") {
    ChannelSet ch;
    ch.channels.resize(static_cast<std::size_t>(k));
    Eigen::VectorXd first_p;
    for (int i = 0; i < k; ++i) {
      const json& st = region.at("states").at(static_cast<std::size_t>(i));
      const Eigen::VectorXd h = as_vector(st.at("h"), "region.states.h", j);
      const Eigen::VectorXd p = as_vector(st.at("p"), "region.states.p", j);
      if (i == 0) {
        first_p = p;
      } else if ((p - first_p).lpNorm<Eigen::Infinity>() > 0.0) {
        // per-user budgets are physical constants of the users, not the state
        fail("region.states[" + std::to_string(i) + "].p",
             "powers must agree across states");
      }
      for (int u = 0; u < j; ++u) {
        ch.channels[static_cast<std::size_t>(i)].push_back(
            Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(h(u), 0.0)));
      }
    }
    ch.powers = first_p;
    return mac_region_scalar(ch);
  }
  if (kind == "mimo-mac") {
    ChannelSet ch;
    ch.channels.resize(static_cast<std::size_t>(k));
    ch.powers = as_vector(region.at("powers"), "region.powers", j);
    for (int i = 0; i < k; ++i) {
      const json& chans = region.at("states").at(static_cast<std::size_t>(i)).at("channels");
      for (int u = 0; u < j; ++u) {
        const Eigen::MatrixXd re = as_matrix(chans.at(static_cast<std::size_t>(u)).at("re"), "re");
        const Eigen::MatrixXd im = as_matrix(chans.at(static_cast<std::size_t>(u)).at("im"), "im");
        Eigen::MatrixXcd h(re.rows(), re.cols());
        h.real() = re;
        h.imag() = im;
        ch.channels[static_cast<std::size_t>(i)].push_back(std::move(h));
      }
    }
    return mac_region_scalar(ch);
  }
  if (kind == "bc2") {
    ChannelSet ch;
    ch.channels.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const json& st = region.at("states").at(static_cast<std::size_t>(i));
      const Eigen::VectorXd h = as_vector(st.at("h"), "region.states.h", j);
      for (int u = 0; u < j; ++u) {
        ch.channels[static_cast<std::size_t>(i)].push_back(
            Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(h(u), 0.0)));
      }
    }
    ch.powers = Eigen::VectorXd::Ones(j);  // unused by the BC sweep; splits come from total_power
    return bc2_region(ch, region.at("total_power").get<double>(), region.at("nu_grid").get<int>(),
                      region.at("split_grid").get<int>());
  }
  // custom
  const Eigen::MatrixXd axes = as_matrix(region.at("semi_axes"), "region.semi_axes", k, j);
  std::vector<Eigen::VectorXd> semi;
  for (int i = 0; i < k; ++i) semi.push_back(axes.row(i));
  return CapacityRegion::ellipsoid(semi);
}

UtilityFamily ExperimentConfig::make_utility() const {
  const json& utility = doc_.at("utility");
  const std::string family = utility.at("family").get<std::string>();
  if (family == "linear-log") {
    return UtilityFamily::linear_log(as_vector(utility.at("weights"), "utility.weights", users()));
  }
  return UtilityFamily::power(users(), utility.at("beta").get<double>(),
                              utility.at("alpha").get<double>());
}

TrafficSpec ExperimentConfig::make_traffic() const {
  const json& traffic = doc_.at("traffic");
  TrafficSpec spec;
  spec.mu = as_vector(traffic.at("mu"), "traffic.mu");
  spec.beta_sq = as_vector(traffic.at("beta_sq"), "traffic.beta_sq");
  spec.lambda = as_matrix(traffic.at("lambda"), "traffic.lambda");
  spec.alpha_sq = as_matrix(traffic.at("alpha_sq"), "traffic.alpha_sq");
  return spec;
}

HeavyTrafficSpec ExperimentConfig::make_heavy_spec() const {
  const json& ht = doc_.at("heavy_traffic");
  HeavyTrafficSpec spec;
  spec.theta = as_matrix(ht.at("theta"), "heavy_traffic.theta");
  const Eigen::VectorXd ladder = as_vector(ht.at("r_ladder"), "heavy_traffic.r_ladder");
  spec.r_ladder.assign(ladder.data(), ladder.data() + ladder.size());
  spec.replicas = ht.at("replicas").get<int>();
  spec.horizon = ht.at("horizon").get<double>();
  spec.grid_step = ht.at("grid_step").get<double>();
  const TrafficSpec traffic = make_traffic();
  spec.mu = traffic.mu;
  spec.alpha_sq = traffic.alpha_sq;
  spec.beta_sq = traffic.beta_sq;
  return spec;
}

RdrsSpec ExperimentConfig::make_rdrs_spec(const Eigen::MatrixXd& rho_by_state) const {
  const json& rd = doc_.at("rdrs");
  const TrafficSpec traffic = make_traffic();
  const HeavyTrafficSpec ht = make_heavy_spec();
  RdrsSpec spec;
  spec.theta = ht.theta;
  spec.mu = traffic.mu;
  const int k = states();
  const int j = users();
  spec.gamma_e.resize(k, j);
  spec.gamma_s.resize(k, j);
  for (int i = 0; i < k; ++i) {
    for (int u = 0; u < j; ++u) {
      const double nominal = traffic.mu(u) * rho_by_state(i, u);
      spec.gamma_e(i, u) = nominal * traffic.alpha_sq(i, u);
      spec.gamma_s(i, u) = nominal * traffic.beta_sq(u);
    }
  }
  spec.dt = rd.at("dt").get<double>();
  spec.horizon = rd.at("horizon").get<double>();
  return spec;
}

void ExperimentConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& assignment : assignments) apply_one(assignment);
  normalize_and_validate();
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  apply_one(assignment);
  normalize_and_validate();
}

void ExperimentConfig::apply_one(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set: expected path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare strings are fine
  }

  // walk the dotted path, creating objects as needed
  json* node = &doc_;
  std::size_t pos = 0;
  while (pos < path.size()) {
    std::size_t dot = path.find('.', pos);
    std::string token = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    pos = dot == std::string::npos ? path.size() : dot + 1;

    // split off any [index] suffixes
    std::vector<long> indices;
    std::size_t bracket = token.find('[');
    std::string key = token.substr(0, bracket);
    while (bracket != std::string::npos) {
      const std::size_t close = token.find(']', bracket);
      if (close == std::string::npos) throw ConfigError("--set: malformed index in '" + path + "'");
      indices.push_back(std::stol(token.substr(bracket + 1, close - bracket - 1)));
      bracket = token.find('[', close);
    }
    if (key.empty()) throw ConfigError("--set: empty key in '" + path + "'");
    node = &(*node)[key];
    for (long idx : indices) {
      if (!node->is_array() || idx < 0 || static_cast<std::size_t>(idx) >= node->size()) {
        throw ConfigError("--set: index out of range in '" + path + "'");
      }
      node = &(*node)[static_cast<std::size_t>(idx)];
    }
  }
  *node = std::move(value);
}

void write_manifest(const std::string& directory, const std::string& subcommand,
                    const ExperimentConfig& config) {
  std::filesystem::create_directories(directory);
  json manifest;
  manifest["subcommand"] = subcommand;
  manifest["seed"] = config.seed();
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config.hash()));
  manifest["config_hash"] = hex;
  manifest["version"] = "0.1.0";
  manifest["config"] = config.doc();
  std::ofstream out(std::filesystem::path(directory) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in '" + directory + "'");
  out << manifest.dump(2) << "\n";
}

}  // namespace ratesched
