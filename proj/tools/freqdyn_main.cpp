#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "freqdyn/engine.hpp"
#include "freqdyn/result_io.hpp"
#include "freqdyn/scenario_io.hpp"
#include "freqdyn/tuning.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInfeasible = 4;

// Reference EPC settings of the Nordic system the shipped data set is
// patterned after; printed next to computed results on request.
constexpr double kReferenceBetaHReplacement = 3715.0;  // MW/Hz
constexpr double kReferenceDroopReplacement = 0.0465;  // pu
constexpr double kReferenceBetaHComplement = 519.0;    // MW/Hz
constexpr double kReferenceDroopComplement = 0.33;     // pu

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_validate(const std::string& path) {
  freqdyn::Scenario s;
  try {
    std::ifstream in(path);
    if (!in) throw freqdyn::ScenarioError("cannot open scenario file \"" + path + "\"");
    nlohmann::json j;
    in >> j;
    s = freqdyn::scenario_from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "error [parse]: " << e.what() << "\n";
    return kExitValidation;
  }
  const auto diags = freqdyn::validate_scenario(s);
  for (const auto& d : diags) std::cerr << d.str() << "\n";
  if (freqdyn::has_errors(diags)) return kExitValidation;
  std::cout << "scenario ok: " << s.buses.size() << " buses, " << s.machines.size()
            << " machines, " << s.hvdc_links.size() << " hvdc links, "
            << s.loads.size() << " loads\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<double> dt, std::optional<double> t_end,
                 const std::string& channels_csv, bool no_plots, bool dump_ybus) {
  freqdyn::Scenario s;
  try {
    s = freqdyn::load_scenario(scenario_path);
  } catch (const freqdyn::ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  if (dt) s.solver.dt_s = *dt;
  if (t_end) s.solver.t_end_s = *t_end;
  const auto channels = split_csv(channels_csv);

  try {
    std::filesystem::create_directories(out_dir);
    {
      nlohmann::json cfg;
      cfg["scenario"] = scenario_path;
      cfg["dt_s"] = s.solver.dt_s;
      cfg["t_end_s"] = s.solver.t_end_s;
      cfg["newton_tol"] = s.solver.newton_tol;
      cfg["integrator"] = s.solver.integrator == freqdyn::Integrator::Rk4 ? "rk4"
                                                                          : "trapezoidal";
      cfg["channels"] = channels;
      cfg["plots"] = !no_plots;
      std::ofstream out(std::filesystem::path(out_dir) / "effective_config.json",
                        std::ios::binary);
      out << cfg.dump(2) << "\n";
    }
    freqdyn::Engine engine(s);
    if (dump_ybus) {
      std::ofstream yb(std::filesystem::path(out_dir) / "ybus.txt", std::ios::binary);
      yb << engine.admittance().coordinate_dump();
    }
    auto res = engine.run();
    freqdyn::write_result(res, out_dir, channels, !no_plots);
    const auto& m = res.metrics;
    std::printf("nadir            %10.4f Hz at %.2f s\n", m.nadir_hz, m.t_nadir_s);
    std::printf("max IFD          %10.4f Hz\n", m.max_ifd_hz);
    std::printf("initial RoCoF    %10.4f Hz/s\n", m.rocof_hz_per_s);
    std::printf("ss deviation     %10.4f Hz\n", m.ss_deviation_hz);
    std::printf("FCR-D at nadir   %10.1f MW\n", m.fcrd_power_at_nadir_mw);
    double epc_peak = 0.0;
    for (const auto& [id, v] : m.epc_peak_mw) epc_peak += v;
    std::printf("EPC peak (sum)   %10.1f MW\n", epc_peak);
    std::printf("results written to %s\n", out_dir.c_str());
    return kExitOk;
  } catch (const freqdyn::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const freqdyn::ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
}

int cmd_ss_freq(double dp, double beta_g, double beta_h, double f_n, double f_fcrd,
                double f_tfl, std::optional<double> target_dfss, bool paper_compare) {
  freqdyn::FrequencyTargets t;
  t.f_n = f_n;
  t.f_fcrd = f_fcrd;
  t.f_tfl = f_tfl;
  if (!t.ordered() && !(f_fcrd <= f_n && f_tfl <= f_fcrd)) {
    std::cerr << "invalid thresholds: need f_tfl <= f_fcrd <= f_n\n";
    return kExitValidation;
  }
  const auto r = freqdyn::steady_state_deviation(dp, beta_g, beta_h, t);
  std::printf("df_ss = %.4f Hz (f_ss = %.4f Hz)\n", r.df_hz, t.f_n + r.df_hz);
  std::printf("validity: %s", r.valid ? "ok" : "violated");
  if (!r.below_fcrd) std::printf(" [settles above f_fcrd, generator term inapplicable]");
  if (!r.below_tfl) std::printf(" [settles above f_tfl, EPC term inapplicable]");
  std::printf("\n");
  if (target_dfss) {
    const auto req = freqdyn::required_beta_h(dp, beta_g, -std::fabs(*target_dfss), t);
    if (!req.feasible) {
      std::cerr << "required beta_h infeasible: margin " << req.margin
                << " Hz must be positive\n";
      return kExitInfeasible;
    }
    std::printf("required beta_h = %.1f MW/Hz (raw %.1f)\n", req.beta_h, req.raw);
    if (paper_compare)
      std::printf("reference multi-machine adjusted value: %.0f MW/Hz at droop %.4f pu\n",
                  kReferenceBetaHReplacement, kReferenceDroopReplacement);
  }
  return kExitOk;
}

int cmd_tune_epc(const std::string& problem_path, const std::string& mode,
                 const std::string& out_path, bool paper_compare) {
  freqdyn::TuningProblem pb;
  try {
    std::ifstream in(problem_path);
    if (!in) throw freqdyn::TuningError("cannot open problem file \"" + problem_path + "\"");
    nlohmann::json j;
    in >> j;
    if (!mode.empty()) j["mode"] = mode;
    pb = freqdyn::tuning_problem_from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  const auto res = freqdyn::tune_epc(pb);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    out << freqdyn::tuning_result_to_json(res).dump(2) << "\n";
  }
  if (!res.feasible) {
    std::cerr << "tuning infeasible: " << res.infeasibility << "\n";
    return kExitInfeasible;
  }
  std::printf("beta_h           %10.1f MW/Hz\n", res.beta_h_mw_per_hz);
  std::printf("achieved beta_h  %10.1f MW/Hz\n", res.achieved_beta_h);
  std::printf("predicted nadir  %10.4f Hz\n", res.predicted_nadir_hz);
  std::printf("predicted df_ss  %10.4f Hz\n", res.predicted_df_ss_hz);
  if (!res.droops.empty()) {
    double rmin = res.droops.front().second, rmax = rmin;
    for (const auto& [id, r] : res.droops) {
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    std::printf("droops           %10.4f .. %.4f pu over %zu links\n", rmin, rmax,
                res.droops.size());
  }
  if (paper_compare) {
    std::printf("computed beta_h: %.1f MW/Hz\n", res.beta_h_mw_per_hz);
    if (pb.mode == freqdyn::TuningMode::Replacement)
      std::printf("reference multi-machine adjusted value: %.0f MW/Hz at droop %.4f pu\n",
                  kReferenceBetaHReplacement, kReferenceDroopReplacement);
    else
      std::printf("reference multi-machine adjusted value: %.0f MW/Hz at droop %.2f pu\n",
                  kReferenceBetaHComplement, kReferenceDroopComplement);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"freqdyn: frequency dynamics of a low-inertia AC/DC power system"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario and write results");
  std::string scenario_path, out_dir = "out", channels_csv;
  std::optional<double> dt_opt, t_end_opt;
  bool no_plots = false, dump_ybus = false;
  sim->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  sim->add_option("--out", out_dir, "output directory");
  double dt_val = 0.0, t_end_val = 0.0;
  auto* dt_o = sim->add_option("--dt", dt_val, "override step size, s");
  auto* te_o = sim->add_option("--t-end", t_end_val, "override horizon, s");
  sim->add_option("--channels", channels_csv, "comma-separated channel subset");
  sim->add_flag("--no-plots", no_plots, "skip SVG plot emission");
  sim->add_flag("--dump-ybus", dump_ybus, "dump the admittance matrix (coordinate text)");

  // validate
  auto* val = app.add_subcommand("validate", "validate a scenario file");
  std::string val_path;
  val->add_option("--scenario", val_path, "scenario JSON file")->required();

  // ss-freq
  auto* ssf = app.add_subcommand("ss-freq", "steady-state frequency deviation algebra");
  double dp = 0.0, beta_g = 0.0, beta_h = 0.0;
  double f_n = 50.0, f_fcrd = 49.9, f_tfl = 49.6;
  double target_dfss_val = 0.0;
  bool paper_compare = false;
  ssf->add_option("--dp", dp, "disturbance, MW")->required();
  ssf->add_option("--beta-g", beta_g, "generator stiffness, MW/Hz")->required();
  ssf->add_option("--beta-h", beta_h, "HVDC stiffness, MW/Hz")->required();
  ssf->add_option("--f-n", f_n, "nominal frequency, Hz");
  ssf->add_option("--f-fcrd", f_fcrd, "FCR-D threshold, Hz");
  ssf->add_option("--f-tfl", f_tfl, "EPC threshold, Hz");
  auto* tgt_o = ssf->add_option("--target-dfss", target_dfss_val,
                                "also print the beta_h required for this deviation, Hz");
  ssf->add_flag("--paper-compare", paper_compare,
                "print published reference values next to computed ones");

  // tune-epc
  auto* tune = app.add_subcommand("tune-epc", "determine per-link EPC droops");
  std::string problem_path, mode, tune_out;
  bool tune_compare = false;
  tune->add_option("--problem", problem_path, "tuning problem JSON file")->required();
  tune->add_option("--mode", mode, "complement | replacement")
      ->check(CLI::IsMember({"complement", "replacement", ""}));
  tune->add_option("--out", tune_out, "result JSON path");
  tune->add_flag("--paper-compare", tune_compare,
                 "print published reference values next to computed ones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (sim->parsed()) {
    if (*dt_o) dt_opt = dt_val;
    if (*te_o) t_end_opt = t_end_val;
    return cmd_simulate(scenario_path, out_dir, dt_opt, t_end_opt, channels_csv, no_plots,
                        dump_ybus);
  }
  if (val->parsed()) return cmd_validate(val_path);
  if (ssf->parsed())
    return cmd_ss_freq(dp, beta_g, beta_h, f_n, f_fcrd, f_tfl,
                       *tgt_o ? std::optional<double>(target_dfss_val) : std::nullopt,
                       paper_compare);
  if (tune->parsed()) return cmd_tune_epc(problem_path, mode, tune_out, tune_compare);
  return kExitValidation;
}
