#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vnhc/chetaev.hpp"
#include "vnhc/config.hpp"
#include "vnhc/constraints.hpp"
#include "vnhc/control.hpp"
#include "vnhc/csv.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/integrate.hpp"
#include "vnhc/scenarios.hpp"

namespace vnhc {

namespace detail {

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

inline ScenarioBundle bundle_from_config(const RunConfig& cfg) {
  if (cfg.scenario.empty())
    throw ValidationError("config: 'scenario' is required for mode '" +
                          cfg.mode + "'");
  const bool is_flocking = cfg.scenario == "flocking";
  const bool is_usv = cfg.scenario.rfind("usv", 0) == 0;
  if ((cfg.flocking_masses || cfg.flocking_gravity || cfg.flocking_q0 ||
       cfg.flocking_v0) &&
      !is_flocking)
    throw ValidationError("config: flocking.* overrides need "
                          "scenario=flocking");
  if ((cfg.usv_mass || cfg.usv_inertia || cfg.usv_current || cfg.usv_q0 ||
       cfg.usv_v0) &&
      !is_usv)
    throw ValidationError("config: usv.* overrides need a usv scenario");

  if (is_flocking) {
    FlockingParams p;
    if (cfg.flocking_masses) {
      if (cfg.flocking_masses->size() != 4)
        throw ValidationError("config: flocking.masses needs 4 entries");
      std::copy(cfg.flocking_masses->begin(), cfg.flocking_masses->end(),
                p.masses.begin());
    }
    if (cfg.flocking_gravity) p.gravity = *cfg.flocking_gravity;
    if (cfg.flocking_q0) {
      if (cfg.flocking_q0->size() != 8)
        throw ValidationError("config: flocking.q0 needs 8 entries");
      p.q0 = to_eigen(*cfg.flocking_q0);
    }
    if (cfg.flocking_v0) {
      if (cfg.flocking_v0->size() != 8)
        throw ValidationError("config: flocking.v0 needs 8 entries");
      p.v0 = to_eigen(*cfg.flocking_v0);
    }
    return build_flocking(p);
  }

  UsvParams p;
  std::string name = cfg.scenario;
  if (cfg.scenario == "usv-northeast") {
    p = usv_northeast_params();
  } else if (cfg.scenario == "usv-anticyclone") {
    p = usv_anticyclone_params();
  } else {
    throw ValidationError("unknown scenario '" + cfg.scenario +
                          "' (expected flocking, usv-northeast or "
                          "usv-anticyclone)");
  }
  if (cfg.usv_current) {
    if (*cfg.usv_current == "northeast")
      p.current = constant_current(1.0, 1.0);
    else if (*cfg.usv_current == "anticyclone")
      p.current = anticyclone_current();
    else
      throw ValidationError("config: usv.current must be northeast or "
                            "anticyclone");
  }
  if (cfg.usv_mass) p.mass = *cfg.usv_mass;
  if (cfg.usv_inertia) p.inertia = *cfg.usv_inertia;
  if (cfg.usv_q0) {
    if (cfg.usv_q0->size() != 3)
      throw ValidationError("config: usv.q0 needs 3 entries");
    p.q0 = Eigen::Vector3d(to_eigen(*cfg.usv_q0));
  }
  if (cfg.usv_v0) {
    if (cfg.usv_v0->size() != 3)
      throw ValidationError("config: usv.v0 needs 3 entries");
    p.v0 = Eigen::Vector3d(to_eigen(*cfg.usv_v0));
  }
  return build_usv(p, name);
}

inline GainMatrix gains_from_config(const RunConfig& cfg, int m) {
  if (!cfg.gains) return uniform_gains(m);
  if (cfg.gains->size() != static_cast<size_t>(m))
    throw ValidationError("config: gains needs " + std::to_string(m) +
                          " entries for this scenario");
  GainMatrix k = gains_from(*cfg.gains);
  if (!(k.rates.array() > 0.0).all())
    throw ValidationError("config: gains must be positive");
  return k;
}

inline void validate_run_numbers(double dt, double t_final) {
  if (!(dt > 0.0)) throw ValidationError("config: dt must be positive");
  if (!(t_final >= 0.0))
    throw ValidationError("config: t_final must be non-negative");
}

struct ConditionExtremes {
  double min = 0.0;
  double max = 0.0;
};

inline ConditionExtremes coupling_extremes(const MechanicalSystem& sys,
                                           const ConstraintSet& c,
                                           const TrajectoryRecord& tr) {
  ConditionExtremes out{std::numeric_limits<double>::infinity(), 0.0};
  for (const State& s : tr.states) {
    double cond;
    try {
      cond = coupling_matrix(sys, c, s).condition;
    } catch (const TransversalityError& e) {
      cond = e.condition();
    }
    out.min = std::min(out.min, cond);
    out.max = std::max(out.max, cond);
  }
  return out;
}

inline RunSummary summarize(const ScenarioBundle& b, const std::string& mode,
                            const TrajectoryRecord& tr, double t_final,
                            bool fit_rates) {
  RunSummary s;
  s.scenario = b.name;
  s.mode = mode;
  s.samples = tr.samples();
  s.dt = tr.dt;
  s.t_final = t_final;
  for (int bidx = 0; bidx < b.constraint.m; ++bidx) {
    std::optional<double> rate;
    if (fit_rates) {
      try {
        rate = decay_rate(tr, bidx);
      } catch (const FitWindowError&) {
        rate = std::nullopt;
      }
    }
    s.decay_rates.push_back(rate);
  }
  double max_phi = 0.0;
  for (const auto& phi : tr.constraint_values)
    if (phi.size()) max_phi = std::max(max_phi, phi.cwiseAbs().maxCoeff());
  s.max_abs_phi = max_phi;
  s.final_energy = tr.energies.back();
  const ConditionExtremes ce = coupling_extremes(b.system, b.constraint, tr);
  s.coupling_condition_min = ce.min;
  s.coupling_condition_max = ce.max;
  return s;
}

inline void write_plot_script(const std::filesystem::path& dir,
                              const TrajectoryRecord& tr, bool with_lambdas) {
  const Eigen::Index n = tr.states.front().q.size();
  const Eigen::Index m = tr.constraint_values.front().size();
  const Eigen::Index us = tr.controls.front().size();
  std::ofstream out(dir / "plot.gp", std::ios::binary);
  if (!out) throw ValidationError("cannot write plot.gp");
  out << "# gnuplot helper for trajectory.csv\n";
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead\n";
  out << "set xlabel 't'\n";
  out << "set terminal pngcairo size 1200,800\n";
  out << "set output 'constraint.png'\n";
  out << "plot";
  for (Eigen::Index b = 0; b < m; ++b)
    out << (b ? ", " : " ") << "'trajectory.csv' using 1:"
        << (2 + 2 * n + b) << " with lines";
  out << "\n";
  out << "set output 'energy.png'\n";
  out << "plot 'trajectory.csv' using 1:" << (2 + 2 * n + m + us)
      << " with lines\n";
  if (with_lambdas) {
    out << "set output 'multipliers.png'\n";
    out << "plot";
    for (Eigen::Index b = 0; b < m; ++b)
      out << (b ? ", " : " ") << "'trajectory.csv' using 1:"
          << (3 + 2 * n + m + us + b) << " with lines";
    out << "\n";
  }
}

}  // namespace detail

/// Executes a validated config. Throws vnhc::Error subclasses on any
/// failure; progress and results go to `out`.
inline void run(const RunConfig& cfg, std::ostream& out) {
  const std::set<std::string> modes{"run", "drift", "chetaev", "check",
                                    "decay"};
  if (!modes.count(cfg.mode))
    throw ValidationError("unknown mode '" + cfg.mode +
                          "' (expected run, drift, chetaev, check or decay)");

  if (cfg.mode == "decay") {
    if (!cfg.input)
      throw ValidationError("decay mode needs input=<trajectory.csv>");
    const ReadTrajectory rt = read_trajectory_csv(*cfg.input);
    std::optional<FitWindow> window;
    if (cfg.window) window = FitWindow{cfg.window->first, cfg.window->second};
    for (int b = 0; b < rt.phi_count; ++b)
      out << "decay_rate[" << b << "]: "
          << format_float(decay_rate(rt.record, b, window)) << "\n";
    return;
  }

  const ScenarioBundle bundle = detail::bundle_from_config(cfg);
  const MechanicalSystem& sys = bundle.system;
  const ConstraintSet& c = bundle.constraint;
  const double dt = cfg.dt.value_or(bundle.default_dt);
  const double t_final = cfg.t_final.value_or(bundle.default_t_final);
  detail::validate_run_numbers(dt, t_final);
  const GainMatrix gains = detail::gains_from_config(cfg, c.m);

  if (cfg.mode == "check") {
    // Diagnostics only: Jacobian consistency and transversality at the
    // initial state and a handful of nearby random states.
    std::mt19937 rng(12345);
    std::normal_distribution<double> jitter(0.0, 0.5);
    double worst_jq = 0.0, worst_jv = 0.0;
    double cond_min = std::numeric_limits<double>::infinity(), cond_max = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
      State s = bundle.initial;
      if (trial) {
        for (Eigen::Index i = 0; i < s.q.size(); ++i) s.q[i] += jitter(rng);
        for (Eigen::Index i = 0; i < s.v.size(); ++i) s.v[i] += jitter(rng);
      }
      ConstraintSet numeric = c;
      numeric.jac_q = nullptr;
      numeric.jac_v = nullptr;
      const Eigen::MatrixXd jq = constraint_jac_q(c, s);
      const Eigen::MatrixXd jv = constraint_jac_v(c, s);
      const Eigen::MatrixXd jq_fd = constraint_jac_q(numeric, s);
      const Eigen::MatrixXd jv_fd = constraint_jac_v(numeric, s);
      worst_jq = std::max(worst_jq, (jq - jq_fd).cwiseAbs().maxCoeff() /
                                        (1.0 + jq.cwiseAbs().maxCoeff()));
      worst_jv = std::max(worst_jv, (jv - jv_fd).cwiseAbs().maxCoeff() /
                                        (1.0 + jv.cwiseAbs().maxCoeff()));
      const double cond = coupling_matrix(sys, c, s).condition;
      cond_min = std::min(cond_min, cond);
      cond_max = std::max(cond_max, cond);
    }
    const CouplingMatrix cm = coupling_matrix(sys, c, bundle.initial);
    out << "scenario: " << bundle.name << "\n";
    out << "jac_q max relative FD mismatch: " << format_float(worst_jq)
        << "\n";
    out << "jac_v max relative FD mismatch: " << format_float(worst_jv)
        << "\n";
    out << "coupling condition at q0: " << format_float(cm.condition) << "\n";
    out << "coupling condition range over probes: ["
        << format_float(cond_min) << ", " << format_float(cond_max) << "]\n";
    out << "drift derivative at q0:";
    const Eigen::VectorXd gphi = drift_derivative(sys, c, bundle.initial);
    for (Eigen::Index b = 0; b < gphi.size(); ++b)
      out << ' ' << format_float(gphi[b]);
    out << "\n";
    return;
  }

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);

  TrajectoryRecord tr;
  std::vector<Eigen::VectorXd> multipliers;
  bool constrained_run = false;
  if (cfg.mode == "run") {
    tr = simulate(sys, c, gains, bundle.initial, dt, t_final);
  } else if (cfg.mode == "drift") {
    tr = simulate_with_law(sys, &c, nullptr, bundle.initial, dt, t_final);
  } else {
    constrained_run = true;
    const State s0 = project_to_constraint(c, bundle.initial);
    ChetaevSolution sol = simulate_constrained(sys, c, s0, dt, t_final);
    tr = std::move(sol.trajectory);
    multipliers = std::move(sol.multipliers);
  }

  write_trajectory_csv(dir / "trajectory.csv", tr,
                       constrained_run ? &multipliers : nullptr);
  const RunSummary summary =
      detail::summarize(bundle, cfg.mode, tr, t_final, cfg.mode == "run");
  write_summary(dir / "summary.txt", summary);
  if (cfg.plot_script) detail::write_plot_script(dir, tr, constrained_run);
  out << "wrote " << (dir / "trajectory.csv").string() << " ("
      << tr.samples() << " samples) and " << (dir / "summary.txt").string()
      << "\n";
}

/// CLI entry: runs the config, mapping errors onto the documented exit codes
/// and printing one machine-readable error line to `err`.
inline int run_cli(const RunConfig& cfg, std::ostream& out,
                   std::ostream& err) {
  auto kind_name = [](ErrorKind k) {
    switch (k) {
      case ErrorKind::parse: return "parse";
      case ErrorKind::validation: return "validation";
      case ErrorKind::transversality: return "transversality";
      case ErrorKind::blowup: return "blowup";
      default: return "other";
    }
  };
  try {
    run(cfg, out);
    return 0;
  } catch (const Error& e) {
    err << "error: kind=" << kind_name(e.kind()) << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: kind=other: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::other);
  }
}

}  // namespace vnhc
