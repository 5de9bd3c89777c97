#pragma once

#include <string>

#include "freqdyn/model.hpp"

namespace fixtures {

/// Two-bus single-machine system: G1 at the slack bus, one ZIP load across a
/// reactance. Powers in MW on a 1000 MVA system base.
inline freqdyn::Scenario smib(bool governor_enabled = false, double d_pu = 1.0,
                              double load_p = 1.0 /* constant-power share */) {
  freqdyn::Scenario s;
  s.f0_hz = 49.9;
  s.buses = {{"B1", 400.0, true, 1.0}, {"B2", 400.0, false, 1.0}};
  s.branches = {{"T1", "B1", "B2", 0.0, 0.05, 0.0, 1.0}};
  freqdyn::MachineSpec g;
  g.id = "G1";
  g.bus = "B1";
  g.s_n_mva = 1000.0;
  g.h_s = 4.0;
  g.d_pu = d_pu;
  g.xd_prime_pu = 0.3;
  g.p0_mw = 500.0;
  g.governor.enabled = governor_enabled;
  g.governor.r_pu = 0.05;
  s.machines = {g};
  freqdyn::ZipLoadSpec l;
  l.id = "L1";
  l.bus = "B2";
  l.p0_mw = 500.0;
  l.q0_mvar = 100.0;
  l.zip.p = load_p;
  l.zip.z = (1.0 - load_p) * 0.5;
  l.zip.i = 1.0 - load_p - l.zip.z;
  s.loads = {l};
  s.solver.dt_s = 0.01;
  s.solver.t_end_s = 60.0;
  return s;
}

/// Offshore hub attached to a stiff two-bus onshore system. Converter flows
/// follow the shipped hub scenarios: two exports to GB, one to NL (tripped in
/// most tests), one to DE, one to DK, one import from NO.
inline freqdyn::Scenario hub_system(freqdyn::HubMode mode, bool with_limits,
                                    double k_hc = 1.65) {
  using namespace freqdyn;
  Scenario s;
  s.f0_hz = 49.9;
  s.buses = {{"N1", 400.0, true, 1.0}, {"N2", 400.0, false, 1.0}};
  s.branches = {{"T1", "N1", "N2", 0.001, 0.02, 0.0, 1.0}};
  MachineSpec g;
  g.id = "G1";
  g.bus = "N1";
  g.s_n_mva = 30000.0;
  g.h_s = 4.0;
  g.d_pu = 1.0;
  g.xd_prime_pu = 0.3;
  s.machines = {g};
  ZipLoadSpec l;
  l.id = "L1";
  l.bus = "N2";
  l.p0_mw = 5000.0;
  l.q0_mvar = 800.0;
  l.zip = {0.3, 0.4, 0.3};
  s.loads = {l};

  HubSpec hub;
  hub.mode = mode;
  hub.nps_bus = "N2";
  hub.wpp_mw = 7193.0;
  if (mode == HubMode::LowInertia)
    hub.condensers = {{300.0, 2.0, 1.0}, {300.0, 2.0, 1.0}, {300.0, 2.0, 1.0}};
  const double r = mode == HubMode::ZeroInertia ? 0.01 : 3.5;
  const double lim = with_limits ? 2000.0 : 1e9;
  auto conv = [&](const std::string& id, const std::string& area, double p_set) {
    HubConverter c;
    c.id = id;
    c.area = area;
    c.p_n_mw = 2000.0;
    c.p_set_mw = p_set;
    c.r_pu = r;
    c.limit_mw = lim;
    c.t_c_s = 0.1;
    c.control = mode == HubMode::ZeroInertia ? ConverterControl::GridForming
                                             : ConverterControl::GridFollowing;
    return c;
  };
  hub.converters = {conv("C_GB1", "gb", -1743.0), conv("C_GB2", "gb", -1449.0),
                    conv("C_NL", "ce", -1743.0),  conv("C_DE", "ce", -1460.0),
                    conv("C_DK", "nps2", -1241.0), conv("C_NO", "nps", 443.0)};
  hub.coordinator.k_hc_pu_s = k_hc;
  hub.coordinator.participation.assign(6, 1.0 / 6.0);
  s.hub = hub;
  s.solver.dt_s = 0.01;
  s.solver.t_end_s = 20.0;
  return s;
}

inline std::string scenario_dir() { return FREQDYN_SCENARIO_DIR; }
inline std::string cli_path() { return FREQDYN_CLI_PATH; }

}  // namespace fixtures
