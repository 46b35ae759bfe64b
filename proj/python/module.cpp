#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ratesched/allocator.hpp"
#include "ratesched/capacity.hpp"
#include "ratesched/dual_cost.hpp"
#include "ratesched/markov_env.hpp"
#include "ratesched/mimo.hpp"
#include "ratesched/queue_sim.hpp"
#include "ratesched/rdrs.hpp"
#include "ratesched/solver.hpp"
#include "ratesched/utility.hpp"

namespace py = pybind11;
using namespace ratesched;

namespace {

ChannelSet make_channels(const std::vector<std::vector<Eigen::MatrixXcd>>& h,
                         const Eigen::VectorXd& powers) {
  ChannelSet ch;
  ch.channels = h;
  ch.powers = powers;
  ch.validate();
  return ch;
}

ChannelSet scalar_channels(const std::vector<std::vector<double>>& h,
                           const Eigen::VectorXd& powers) {
  ChannelSet ch;
  ch.channels.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (double v : h[i]) {
      ch.channels[i].push_back(Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(v, 0.0)));
    }
  }
  ch.powers = powers;
  ch.validate();
  return ch;
}

const char* membership_name(Membership m) {
  switch (m) {
    case Membership::Interior:
      return "interior";
    case Membership::Boundary:
      return "boundary";
    default:
      return "outside";
  }
}

}  // namespace

PYBIND11_MODULE(_ratesched, m) {
  m.doc() = "utility-maximizing rate scheduling for processor-sharing queues "
            "in a Markov-switching environment";

  // ---- markov environment
  py::class_<EnvGenerator>(m, "EnvGenerator")
      .def_readonly("state_count", &EnvGenerator::state_count)
      .def_readonly("holding_rates", &EnvGenerator::holding_rates)
      .def_readonly("embedded", &EnvGenerator::embedded)
      .def_readonly("generator", &EnvGenerator::generator);

  py::class_<EnvPath>(m, "EnvPath")
      .def_readonly("jump_times", &EnvPath::jump_times)
      .def_readonly("states", &EnvPath::states)
      .def_readonly("horizon", &EnvPath::horizon)
      .def("state_at", &EnvPath::state_at)
      .def("jump_count", &EnvPath::jump_count);

  m.def("build_generator", &build_generator, py::arg("holding_rates"), py::arg("embedded_matrix"));
  m.def("sample_path", &sample_path, py::arg("generator"), py::arg("horizon"),
        py::arg("initial_state"), py::arg("seed"));
  m.def("stationary_distribution", &stationary_distribution);
  m.def("scale_holding", &scale_holding, py::arg("generator"), py::arg("r"));

  // ---- capacity regions
  py::class_<CapacityRegion>(m, "CapacityRegion")
      .def_property_readonly("users", &CapacityRegion::users)
      .def_property_readonly("states", &CapacityRegion::states)
      .def("membership",
           [](const CapacityRegion& region, int state, const Eigen::VectorXd& c) {
             return membership_name(region.membership(state, c));
           })
      .def("facet_values", [](const CapacityRegion& region, int state, const Eigen::VectorXd& c) {
        std::vector<double> values;
        for (const auto& f : region.facets(state)) values.push_back(f.value(c));
        return values;
      });

  m.def("simplex_region", [](int users, const std::vector<double>& sum_capacity) {
    return CapacityRegion::simplex(users, sum_capacity);
  });
  m.def("ellipsoid_region",
        [](const std::vector<Eigen::VectorXd>& semi_axes) { return CapacityRegion::ellipsoid(semi_axes); });
  m.def("mac_region",
        [](const std::vector<std::vector<double>>& h, const Eigen::VectorXd& powers) {
          return mac_region_scalar(scalar_channels(h, powers));
        },
        py::arg("h"), py::arg("powers"),
        "scalar-channel MAC polymatroid; h is [state][user]");
  m.def("mimo_mac_region",
        [](const std::vector<std::vector<Eigen::MatrixXcd>>& h, const Eigen::VectorXd& powers) {
          return mac_region_scalar(make_channels(h, powers));
        });
  m.def("bc_region",
        [](const std::vector<std::vector<double>>& h, double total_power, int nu_grid,
           int split_grid) {
          // per-user budgets are unused on the BC side; splits come from total_power
          Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(h[0].size()));
          return bc2_region(scalar_channels(h, ones), total_power, nu_grid, split_grid);
        },
        py::arg("h"), py::arg("total_power"), py::arg("nu_grid") = 21, py::arg("split_grid") = 9);

  m.def("facet_count", &facet_count, py::arg("users"));
  m.def("interior_facet_count", &interior_facet_count, py::arg("users"));
  m.def("sum_capacity", &sum_capacity, py::arg("region"), py::arg("state"));
  m.def("balanced_point",
        [](const CapacityRegion& region, int state) { return balanced_point(region, state).rho; });
  m.def("balanced_points", &balanced_points);

  // ---- utilities and the allocator
  py::class_<UtilityFamily>(m, "UtilityFamily")
      .def_property_readonly("users", &UtilityFamily::users)
      .def_property_readonly("name", &UtilityFamily::name);
  m.def("linear_log_utility",
        [](const Eigen::VectorXd& weights) { return UtilityFamily::linear_log(weights); });
  m.def("power_utility", [](int users, double beta, double alpha) {
    return UtilityFamily::power(users, beta, alpha);
  });

  py::class_<Allocation>(m, "Allocation")
      .def_readonly("rates", &Allocation::rates)
      .def_readonly("multipliers", &Allocation::multipliers)
      .def_readonly("active_facets", &Allocation::active_facets)
      .def_readonly("kkt_residual", &Allocation::kkt_residual);
  m.def("allocate",
        [](const CapacityRegion& region, int state, const Eigen::VectorXd& queue,
           const UtilityFamily& utility) { return allocate(region, state, queue, utility); },
        py::arg("region"), py::arg("state"), py::arg("queue"), py::arg("utility"));
  m.def("maxweight_rate", &maxweight_rate, py::arg("region"), py::arg("state"), py::arg("queue"),
        py::arg("mu"));

  // ---- dual cost
  py::class_<FixedPoint>(m, "FixedPoint")
      .def_readonly("q", &FixedPoint::q)
      .def_readonly("theta", &FixedPoint::theta)
      .def_readonly("workload", &FixedPoint::workload);
  m.def("total_cost", &total_cost, py::arg("utility"), py::arg("mu"), py::arg("q"), py::arg("c"));
  m.def("fixed_point", &fixed_point, py::arg("utility"), py::arg("mu"), py::arg("w"),
        py::arg("rho"));
  m.def("duality_roundtrip", &duality_roundtrip, py::arg("region"), py::arg("state"),
        py::arg("utility"), py::arg("mu"), py::arg("w"));
  m.def("lyapunov", &lyapunov, py::arg("utility"), py::arg("mu"), py::arg("q"), py::arg("rho"));

  // ---- MIMO boundary machinery
  m.def("weighted_sum_rate",
        [](const std::vector<std::vector<Eigen::MatrixXcd>>& h, const Eigen::VectorXd& powers,
           int state, const Eigen::VectorXd& nu, const std::vector<Eigen::MatrixXcd>& gamma) {
          CovarianceProfile profile;
          profile.gamma = gamma;
          return weighted_sum_rate(make_channels(h, powers), state, nu, profile);
        });
  m.def("mac_boundary_point",
        [](const std::vector<std::vector<Eigen::MatrixXcd>>& h, const Eigen::VectorXd& powers,
           int state, const Eigen::VectorXd& nu) {
          const auto bp = mac_boundary_point(make_channels(h, powers), state, nu);
          return py::make_tuple(bp.rates, bp.profile.gamma, bp.kkt_residual);
        },
        py::arg("h"), py::arg("powers"), py::arg("state"), py::arg("nu"));

  // ---- queue simulation
  py::class_<SystemTrajectory>(m, "SystemTrajectory")
      .def_readonly("times", &SystemTrajectory::times)
      .def_readonly("states", &SystemTrajectory::states)
      .def_readonly("queue", &SystemTrajectory::queue)
      .def_readonly("service", &SystemTrajectory::service)
      .def_readonly("workload", &SystemTrajectory::workload)
      .def_readonly("unused", &SystemTrajectory::unused)
      .def_readonly("arrivals", &SystemTrajectory::arrivals)
      .def_readonly("departures", &SystemTrajectory::departures);
  m.def("simulate",
        [](const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& alpha_sq,
           const Eigen::VectorXd& mu, const Eigen::VectorXd& beta_sq,
           const CapacityRegion& region, const std::string& policy, const UtilityFamily& utility,
           const EnvPath& env, double horizon, double grid_step, std::uint64_t seed) {
          TrafficSpec traffic{lambda, alpha_sq, mu, beta_sq};
          const Eigen::MatrixXd rho = balanced_points(region);
          const auto handle = make_policy(policy, region, utility, mu, rho);
          return simulate(traffic, region, handle, env, horizon, grid_step, seed, rho, false);
        },
        py::arg("lambda"), py::arg("alpha_sq"), py::arg("mu"), py::arg("beta_sq"),
        py::arg("region"), py::arg("policy"), py::arg("utility"), py::arg("env"),
        py::arg("horizon"), py::arg("grid_step"), py::arg("seed"));

  // ---- RDRS limit model
  py::class_<RdrsPath>(m, "RdrsPath")
      .def_readonly("times", &RdrsPath::times)
      .def_readonly("states", &RdrsPath::states)
      .def_readonly("x", &RdrsPath::x)
      .def_readonly("y", &RdrsPath::y)
      .def_readonly("w", &RdrsPath::w)
      .def_readonly("q", &RdrsPath::q);
  m.def("simulate_rdrs",
        [](const Eigen::MatrixXd& theta, const Eigen::MatrixXd& gamma_e,
           const Eigen::MatrixXd& gamma_s, const Eigen::VectorXd& mu, double dt, double horizon,
           const EnvPath& env, std::uint64_t seed) {
          RdrsSpec spec{theta, gamma_e, gamma_s, mu, dt, horizon};
          return simulate_rdrs(spec, env, seed);
        },
        py::arg("theta"), py::arg("gamma_e"), py::arg("gamma_s"), py::arg("mu"), py::arg("dt"),
        py::arg("horizon"), py::arg("env"), py::arg("seed"));
  m.def("lift_to_queues",
        [](RdrsPath& path, const UtilityFamily& utility, const Eigen::VectorXd& mu,
           const Eigen::MatrixXd& rho_by_state) {
          lift_to_queues(path, utility, mu, rho_by_state);
          return path.q;
        });

#ifdef RATESCHED_VERSION
  m.attr("__version__") = RATESCHED_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
