#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "freqdyn/engine.hpp"
#include "freqdyn/result_io.hpp"
#include "freqdyn/scenario_io.hpp"
#include "fixtures.hpp"

using namespace freqdyn;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  auto p = fs::temp_directory_path() / "freqdyn_io_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool has_rule(const std::vector<Diagnostic>& ds, const std::string& rule) {
  for (const auto& d : ds)
    if (d.rule == rule) return true;
  return false;
}

}  // namespace

TEST_CASE("load_scenario: minimal two-bus file round-trips through disk") {
  const auto dir = tmp_dir();
  const auto path = (dir / "smib.json").string();
  save_scenario(fixtures::smib(true), path);
  const auto s = load_scenario(path);
  CHECK(s.machines.size() == 1);
  CHECK(s.loads.size() == 1);
  CHECK(s.buses.size() == 2);
  CHECK(s.machines[0].governor.enabled);
}

TEST_CASE("load_scenario: event on an unknown machine names the offender") {
  auto s = fixtures::smib(false);
  s.events = {{1.0, EventKind::GeneratorTrip, "G99", 0.0}};
  const auto dir = tmp_dir();
  const auto path = (dir / "bad.json").string();
  save_scenario(s, path);
  try {
    load_scenario(path);
    FAIL("expected a validation error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("G99") != std::string::npos);
  }
}

TEST_CASE("load_scenario: malformed JSON is a parse error") {
  const auto dir = tmp_dir();
  const auto path = dir / "broken.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_scenario(path.string()), ScenarioError);
}

TEST_CASE("load_scenario: shipped nps-lite passes validation with the headline figures") {
  const auto s = load_scenario(fixtures::scenario_dir() + "/nps-lite.json");
  int fcrd = 0;
  for (const auto& m : s.machines) fcrd += m.governor.enabled ? 1 : 0;
  CHECK(fcrd == 10);
  CHECK(s.hvdc_links.size() == 19);
  CHECK(s.total_kinetic_energy_mws() == doctest::Approx(125000.0).epsilon(1e-12));
  double p_n = 0.0;
  for (const auto& l : s.hvdc_links) p_n += l.p_n_mw;
  CHECK(p_n == doctest::Approx(8563.5).epsilon(1e-12));
  double load = 0.0;
  for (const auto& l : s.loads)
    if (l.p0_mw > 0.0) load += l.p0_mw;
  CHECK(load == doctest::Approx(43531.2).epsilon(1e-12));
}

TEST_CASE("scenario round-trip: save/load preserves every field") {
  auto s = fixtures::hub_system(HubMode::LowInertia, true);
  s.events = {{2.0, EventKind::HvdcTrip, "C_NL", 0.0}};
  s.hvdc_links.push_back({"H1", "N2", 500.0, -120.0, 10.0, 0.2,
                          {true, 0.25, 380.0, 380.0, 0.0}});
  const auto dir = tmp_dir();
  const auto path = (dir / "roundtrip.json").string();
  const auto path2 = (dir / "roundtrip2.json").string();
  // First load materializes defaults (headrooms); the canonical form must
  // then be a fixed point of save/load.
  save_scenario(s, path);
  const auto first = load_scenario(path);
  save_scenario(first, path2);
  const auto second = load_scenario(path2);
  CHECK(scenario_to_json(first) == scenario_to_json(second));
  CHECK(first.hvdc_links[0].epc.headroom_import_mw == doctest::Approx(380.0));
}

TEST_CASE("validate: clean scenario produces no diagnostics") {
  CHECK(validate_scenario(fixtures::smib(true)).empty());
}

TEST_CASE("validate: threshold ordering violation is flagged") {
  auto s = fixtures::smib(false);
  s.targets.f_tfl = 49.95;  // above f_fcrd
  CHECK(has_rule(validate_scenario(s), "threshold-ordering"));
}

TEST_CASE("validate: zero-inertia onshore machine is flagged") {
  auto s = fixtures::smib(false);
  s.machines[0].h_s = 0.0;
  CHECK(has_rule(validate_scenario(s), "zero-inertia-onshore"));
}

TEST_CASE("validate: one violating fixture per rule") {
  using Mut = void (*)(Scenario&);
  const std::pair<const char*, Mut> table[] = {
      {"duplicate-id", [](Scenario& s) { s.loads[0].id = "G1"; }},
      {"dangling-reference", [](Scenario& s) { s.machines[0].bus = "nowhere"; }},
      {"slack-count", [](Scenario& s) { s.buses[0].slack = false; }},
      {"zip-coefficients", [](Scenario& s) { s.loads[0].zip = {0.5, 0.4, 0.2}; }},
      {"machine-rating", [](Scenario& s) { s.machines[0].s_n_mva = 0.0; }},
      {"governor-droop-range", [](Scenario& s) { s.machines[0].governor.r_pu = 1.4; }},
      {"gate-limits", [](Scenario& s) { s.machines[0].governor.gate_max = 0.2; }},
      {"event-time-range",
       [](Scenario& s) { s.events = {{-1.0, EventKind::LoadStep, "L1", 5.0}}; }},
      {"event-step-alignment",
       [](Scenario& s) { s.events = {{1.0071, EventKind::LoadStep, "L1", 5.0}}; }},
      {"event-target",
       [](Scenario& s) { s.events = {{1.0, EventKind::HvdcTrip, "L1", 0.0}}; }},
      {"event-duplicate-trip",
       [](Scenario& s) {
         s.events = {{1.0, EventKind::GeneratorTrip, "G1", 0.0},
                     {2.0, EventKind::GeneratorTrip, "G1", 0.0}};
       }},
      {"branch-impedance",
       [](Scenario& s) { s.branches[0].x_pu = s.branches[0].r_pu = 0.0; }},
      {"link-setpoint-exceeds-rating",
       [](Scenario& s) {
         s.hvdc_links.push_back({"H1", "B2", 100.0, 150.0, 0.0, 0.1, {}});
       }},
      {"epc-droop-positive",
       [](Scenario& s) {
         s.hvdc_links.push_back(
             {"H1", "B2", 100.0, 0.0, 0.0, 0.1, {true, 0.0, 50.0, 50.0, 0.0}});
       }},
      {"solver-step-positive", [](Scenario& s) { s.solver.dt_s = 0.0; }},
  };
  for (const auto& [rule, mutate] : table) {
    auto s = fixtures::smib(true);
    mutate(s);
    INFO("rule ", rule);
    CHECK(has_rule(validate_scenario(s), rule));
  }

  const std::pair<const char*, Mut> hub_table[] = {
      {"hub-condenser-required", [](Scenario& s) { s.hub->condensers.clear(); }},
      {"participation-sum",
       [](Scenario& s) { s.hub->coordinator.participation[0] += 0.3; }},
      {"hub-power-balance", [](Scenario& s) { s.hub->wpp_mw += 500.0; }},
      {"hub-setpoint-exceeds-rating",
       [](Scenario& s) { s.hub->converters[0].p_set_mw = -2500.0; }},
  };
  for (const auto& [rule, mutate] : hub_table) {
    auto s = fixtures::hub_system(HubMode::LowInertia, true);
    mutate(s);
    INFO("rule ", rule);
    CHECK(has_rule(validate_scenario(s), rule));
  }

  auto s = fixtures::smib(true);
  s.hvdc_links.push_back({"H1", "B2", 100.0, 0.0, 0.0, 0.6, {}});
  CHECK(has_rule(validate_scenario(s), "converter-time-constant-band"));
}

TEST_CASE("write_result: single-sample result gives header plus one row") {
  SimulationResult res;
  res.t_s = {0.0};
  res.channels = {{"G1.speed_hz", {49.9}}};
  const auto dir = (tmp_dir() / "one").string();
  write_result(res, dir, {}, false);
  const auto csv = slurp(fs::path(dir) / "timeseries.csv");
  CHECK(csv == "t_s,G1.speed_hz\n0,49.9\n");
}

TEST_CASE("write_result: one speed column per machine, named by id") {
  auto s = fixtures::smib(false);
  MachineSpec g2 = s.machines[0];
  g2.id = "G2";
  g2.bus = "B2";
  g2.p0_mw = 0.0;
  MachineSpec g3 = s.machines[0];
  g3.id = "G3";
  g3.bus = "B2";
  g3.p0_mw = 0.0;
  s.machines.push_back(g2);
  s.machines.push_back(g3);
  s.solver.t_end_s = 0.1;
  auto res = run_simulation(s);
  const auto dir = (tmp_dir() / "three").string();
  write_result(res, dir, {}, false);
  const auto csv = slurp(fs::path(dir) / "timeseries.csv");
  const auto header = csv.substr(0, csv.find('\n'));
  for (const char* col : {"G1.speed_hz", "G2.speed_hz", "G3.speed_hz"})
    CHECK(header.find(col) != std::string::npos);
}

TEST_CASE("metrics json: round-trips losslessly at 12 significant digits") {
  Metrics m;
  m.nadir_hz = 48.887654321098;
  m.t_nadir_s = 9.28123456789;
  m.max_ifd_hz = 1.11234567891;
  m.rocof_hz_per_s = -0.235612345678;
  m.ss_deviation_hz = -0.361298765432;
  m.fcrd_power_at_nadir_mw = 684.812345678;
  m.epc_peak_mw = {{"H1", 123.456789012}, {"H2", 0.000123456789012}};
  const auto r = metrics_from_json(nlohmann::json::parse(metrics_to_json(m).dump()));
  auto close12 = [](double a, double b) {
    return a == b || std::fabs(a - b) <= 1e-12 * std::max(std::fabs(a), std::fabs(b));
  };
  CHECK(close12(r.nadir_hz, m.nadir_hz));
  CHECK(close12(r.t_nadir_s, m.t_nadir_s));
  CHECK(close12(r.max_ifd_hz, m.max_ifd_hz));
  CHECK(close12(r.rocof_hz_per_s, m.rocof_hz_per_s));
  CHECK(close12(r.ss_deviation_hz, m.ss_deviation_hz));
  CHECK(close12(r.fcrd_power_at_nadir_mw, m.fcrd_power_at_nadir_mw));
  REQUIRE(r.epc_peak_mw.size() == 2);
  CHECK(close12(r.epc_peak_mw[0].second, m.epc_peak_mw[0].second));
  CHECK(close12(r.epc_peak_mw[1].second, m.epc_peak_mw[1].second));
}

TEST_CASE("write_result: byte-identical outputs for identical runs") {
  auto s = fixtures::smib(true);
  s.events = {{1.0, EventKind::LoadStep, "L1", 60.0}};
  s.solver.t_end_s = 5.0;
  const auto d1 = (tmp_dir() / "det1").string();
  const auto d2 = (tmp_dir() / "det2").string();
  write_result(run_simulation(s), d1, {}, true);
  write_result(run_simulation(s), d2, {}, true);
  CHECK(slurp(fs::path(d1) / "timeseries.csv") == slurp(fs::path(d2) / "timeseries.csv"));
  CHECK(slurp(fs::path(d1) / "metrics.json") == slurp(fs::path(d2) / "metrics.json"));
  CHECK(slurp(fs::path(d1) / "system.f_avg_hz.svg") ==
        slurp(fs::path(d2) / "system.f_avg_hz.svg"));
}

TEST_CASE("write_result: channel subset filters columns and plots") {
  auto s = fixtures::smib(false);
  s.solver.t_end_s = 0.2;
  auto res = run_simulation(s);
  const auto dir = (tmp_dir() / "subset").string();
  write_result(res, dir, {"G1.speed_hz"}, true);
  const auto csv = slurp(fs::path(dir) / "timeseries.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "t_s,G1.speed_hz");
  CHECK(fs::exists(fs::path(dir) / "G1.speed_hz.svg"));
  CHECK_FALSE(fs::exists(fs::path(dir) / "B1.v_pu.svg"));
}

TEST_CASE("write_result: empty result is rejected") {
  SimulationResult res;
  CHECK_THROWS_AS(write_result(res, (tmp_dir() / "x").string()), ScenarioError);
}
