#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratesched/capacity.hpp"
#include "ratesched/heavy_traffic.hpp"
#include "ratesched/markov_env.hpp"
#include "ratesched/mimo.hpp"
#include "ratesched/queue_sim.hpp"
#include "ratesched/rdrs.hpp"
#include "ratesched/utility.hpp"

namespace ratesched {

// Raised on malformed configuration; the message starts with the offending
// field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One structured document drives every subcommand. Parsing normalizes the
// document (defaults filled in) and validates cross-references.
class ExperimentConfig {
 public:
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_json(nlohmann::json doc);

  const nlohmann::json& doc() const { return doc_; }
  std::string serialize() const;  // canonical form, stable key order
  std::uint64_t hash() const;     // FNV-1a over the canonical form

  std::uint64_t seed() const;
  int users() const;
  int states() const;
  int initial_state() const;

  EnvGenerator make_generator() const;
  CapacityRegion make_region() const;
  UtilityFamily make_utility() const;
  TrafficSpec make_traffic() const;
  HeavyTrafficSpec make_heavy_spec() const;
  // Gamma^E(i) = diag(lambda_j(i) alpha_j^2(i)) at the nominal rates
  // lambda_j(i) = mu_j rho_j(i); Gamma^S(i) = diag(lambda_j(i) beta_j^2).
  RdrsSpec make_rdrs_spec(const Eigen::MatrixXd& rho_by_state) const;

  // dotted-path override, e.g. "heavy_traffic.replicas=40" or
  // "region.states[0].h[1]=0.9"; values parse as JSON with string fallback
  void apply_override(const std::string& assignment);
  // applies the whole batch before re-validating, so interdependent fields
  // (say a utility family plus its parameters) can change together
  void apply_overrides(const std::vector<std::string>& assignments);

 private:
  void apply_one(const std::string& assignment);
  void normalize_and_validate();
  nlohmann::json doc_;
};

void write_manifest(const std::string& directory, const std::string& subcommand,
                    const ExperimentConfig& config);

}  // namespace ratesched
