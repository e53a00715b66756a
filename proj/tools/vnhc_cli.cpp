#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vnhc/vnhc.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string scenario;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::vector<double> gains;
  std::string out_dir;
  bool plot_script = false;
  std::string input;
  std::vector<double> window;
};

void add_common_flags(CLI::App* sub, CliOverrides& o) {
  sub->add_option("--config", o.config_path, "Config file (key = value)");
  sub->add_option("--scenario", o.scenario,
                  "flocking | usv-northeast | usv-anticyclone");
  sub->add_option("--dt", o.dt, "Integration step");
  sub->add_option("--t-final", o.t_final, "Simulation horizon");
  sub->add_option("--gains", o.gains,
                  "Per-constraint feedback rates (comma separated)")
      ->delimiter(',')
      ->expected(-1);
  sub->add_option("--out", o.out_dir, "Output directory");
  sub->add_flag("--plot-script", o.plot_script,
                "Also write a gnuplot script next to the CSV");
}

int dispatch(const std::string& mode, const CliOverrides& o) {
  vnhc::RunConfig cfg;
  try {
    if (!o.config_path.empty()) cfg = vnhc::parse_config_file(o.config_path);
  } catch (const vnhc::Error& e) {
    std::cerr << "error: kind="
              << (e.kind() == vnhc::ErrorKind::parse ? "parse" : "validation")
              << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  }
  cfg.mode = mode;
  if (!o.scenario.empty()) cfg.scenario = o.scenario;
  if (o.dt) cfg.dt = o.dt;
  if (o.t_final) cfg.t_final = o.t_final;
  if (!o.gains.empty()) cfg.gains = o.gains;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.plot_script) cfg.plot_script = true;
  if (!o.input.empty()) cfg.input = o.input;
  if (!o.window.empty()) {
    if (o.window.size() != 2) {
      std::cerr << "error: kind=validation: --window needs two values\n";
      return static_cast<int>(vnhc::ErrorKind::validation);
    }
    cfg.window = std::make_pair(o.window[0], o.window[1]);
  }
  return vnhc::run_cli(cfg, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation and control synthesis for mechanical systems stabilized "
      "onto velocity-level constraint manifolds"};
  app.require_subcommand(1);

  CliOverrides run_o, drift_o, chetaev_o, check_o, decay_o;

  CLI::App* run = app.add_subcommand(
      "run", "Closed-loop simulation under the stabilizing feedback");
  add_common_flags(run, run_o);

  CLI::App* drift =
      app.add_subcommand("drift", "Uncontrolled simulation (u = 0)");
  add_common_flags(drift, drift_o);

  CLI::App* chetaev = app.add_subcommand(
      "chetaev",
      "Constrained simulation with reaction forces enforcing the constraint");
  add_common_flags(chetaev, chetaev_o);

  CLI::App* check = app.add_subcommand(
      "check", "Scenario diagnostics: Jacobians, coupling conditioning");
  add_common_flags(check, check_o);

  CLI::App* decay = app.add_subcommand(
      "decay", "Fit exponential decay rates from a recorded trajectory");
  decay->add_option("--config", decay_o.config_path,
                    "Config file (key = value)");
  decay->add_option("--input", decay_o.input, "trajectory.csv to analyze");
  decay->add_option("--window", decay_o.window,
                    "Fit window t0 t1 (defaults to [0, min(10, t_final)])")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return static_cast<int>(vnhc::ErrorKind::parse);
  }

  if (run->parsed()) return dispatch("run", run_o);
  if (drift->parsed()) return dispatch("drift", drift_o);
  if (chetaev->parsed()) return dispatch("chetaev", chetaev_o);
  if (check->parsed()) return dispatch("check", check_o);
  return dispatch("decay", decay_o);
}
