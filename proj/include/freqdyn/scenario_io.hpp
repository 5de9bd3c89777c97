#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "freqdyn/model.hpp"
#include "freqdyn/validate.hpp"

namespace freqdyn {

namespace io_detail {

using nlohmann::json;

inline double num(const json& j, const char* key, double fallback) {
  if (auto it = j.find(key); it != j.end()) return it->get<double>();
  return fallback;
}

inline double req_num(const json& j, const char* key, const std::string& ctx) {
  if (auto it = j.find(key); it != j.end() && it->is_number()) return it->get<double>();
  throw ScenarioError("missing or non-numeric field \"" + std::string(key) + "\" in " + ctx);
}

inline std::string req_str(const json& j, const char* key, const std::string& ctx) {
  if (auto it = j.find(key); it != j.end() && it->is_string()) return it->get<std::string>();
  throw ScenarioError("missing or non-string field \"" + std::string(key) + "\" in " + ctx);
}

inline EpcSettings parse_epc(const json& j) {
  EpcSettings e;
  e.enabled = j.value("enabled", false);
  e.r_pu = num(j, "r_pu", e.r_pu);
  e.headroom_import_mw = num(j, "headroom_import_mw", -1.0);
  e.headroom_export_mw = num(j, "headroom_export_mw", -1.0);
  e.delay_s = num(j, "delay_s", 0.0);
  return e;
}

inline json epc_to_json(const EpcSettings& e) {
  return json{{"enabled", e.enabled},
              {"r_pu", e.r_pu},
              {"headroom_import_mw", e.headroom_import_mw},
              {"headroom_export_mw", e.headroom_export_mw},
              {"delay_s", e.delay_s}};
}

}  // namespace io_detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace io_detail;
  Scenario s;
  s.schema_version = static_cast<int>(num(j, "schema_version", 1));
  s.base_power_mva = num(j, "base_power_mva", 1000.0);
  s.f0_hz = num(j, "f0_hz", 49.9);

  if (auto it = j.find("targets"); it != j.end()) {
    const auto& t = *it;
    s.targets.f_n = num(t, "f_n", 50.0);
    s.targets.f_fcrd = num(t, "f_fcrd", 49.9);
    s.targets.f_tfl = num(t, "f_tfl", 49.6);
    s.targets.f_min = num(t, "f_min", 49.0);
    s.targets.f_shed = num(t, "f_shed", 48.8);
    s.targets.df_ss_max = num(t, "df_ss_max", 0.5);
  }

  for (const auto& bj : j.value("buses", nlohmann::json::array())) {
    Bus b;
    b.id = req_str(bj, "id", "bus");
    b.kv = num(bj, "kv", 400.0);
    b.slack = bj.value("slack", false);
    b.v_set_pu = num(bj, "v_set_pu", 1.0);
    s.buses.push_back(std::move(b));
  }
  for (const auto& bj : j.value("branches", nlohmann::json::array())) {
    Branch b;
    b.id = req_str(bj, "id", "branch");
    b.from = req_str(bj, "from", "branch " + b.id);
    b.to = req_str(bj, "to", "branch " + b.id);
    b.r_pu = num(bj, "r_pu", 0.0);
    b.x_pu = req_num(bj, "x_pu", "branch " + b.id);
    b.b_pu = num(bj, "b_pu", 0.0);
    b.ratio = num(bj, "ratio", 1.0);
    s.branches.push_back(std::move(b));
  }
  for (const auto& mj : j.value("machines", nlohmann::json::array())) {
    MachineSpec m;
    m.id = req_str(mj, "id", "machine");
    m.bus = req_str(mj, "bus", "machine " + m.id);
    m.s_n_mva = req_num(mj, "s_n_mva", "machine " + m.id);
    m.h_s = req_num(mj, "h_s", "machine " + m.id);
    m.d_pu = num(mj, "d_pu", 1.0);
    m.xd_prime_pu = num(mj, "xd_prime_pu", 0.3);
    m.p0_mw = num(mj, "p0_mw", 0.0);
    m.q0_mvar = num(mj, "q0_mvar", 0.0);
    if (auto it = mj.find("governor"); it != mj.end()) {
      const auto& g = *it;
      m.governor.enabled = g.value("enabled", false);
      m.governor.r_pu = num(g, "r_pu", m.governor.r_pu);
      m.governor.rt_pu = num(g, "rt_pu", m.governor.rt_pu);
      m.governor.tr_s = num(g, "tr_s", m.governor.tr_s);
      m.governor.tg_s = num(g, "tg_s", m.governor.tg_s);
      m.governor.tw_s = num(g, "tw_s", m.governor.tw_s);
      m.governor.gate_min = num(g, "gate_min", m.governor.gate_min);
      m.governor.gate_max = num(g, "gate_max", m.governor.gate_max);
      m.governor.rate_limit_pu_s = num(g, "rate_limit_pu_s", m.governor.rate_limit_pu_s);
    }
    s.machines.push_back(std::move(m));
  }
  for (const auto& lj : j.value("loads", nlohmann::json::array())) {
    ZipLoadSpec l;
    l.id = req_str(lj, "id", "load");
    l.bus = req_str(lj, "bus", "load " + l.id);
    l.p0_mw = req_num(lj, "p0_mw", "load " + l.id);
    l.q0_mvar = num(lj, "q0_mvar", 0.0);
    if (auto it = lj.find("zip"); it != lj.end()) {
      l.zip.z = num(*it, "z", 0.0);
      l.zip.i = num(*it, "i", 0.0);
      l.zip.p = num(*it, "p", 1.0);
    }
    s.loads.push_back(std::move(l));
  }
  for (const auto& hj : j.value("hvdc", nlohmann::json::array())) {
    HvdcLinkSpec h;
    h.id = req_str(hj, "id", "hvdc link");
    h.bus = req_str(hj, "bus", "hvdc link " + h.id);
    h.p_n_mw = req_num(hj, "p_n_mw", "hvdc link " + h.id);
    h.p0_mw = num(hj, "p0_mw", 0.0);
    h.q0_mvar = num(hj, "q0_mvar", 0.0);
    h.t_c_s = num(hj, "t_c_s", 0.1);
    if (auto it = hj.find("epc"); it != hj.end()) h.epc = parse_epc(*it);
    // Headrooms default to the capacity left at the operating point.
    if (h.epc.headroom_import_mw < 0.0)
      h.epc.headroom_import_mw = h.p_n_mw - std::fabs(h.p0_mw);
    if (h.epc.headroom_export_mw < 0.0)
      h.epc.headroom_export_mw = h.p_n_mw - std::fabs(h.p0_mw);
    s.hvdc_links.push_back(std::move(h));
  }
  if (auto it = j.find("hub"); it != j.end() && !it->is_null()) {
    const auto& hj = *it;
    HubSpec hub;
    const std::string mode = hj.value("mode", "low-inertia");
    if (mode == "low-inertia") hub.mode = HubMode::LowInertia;
    else if (mode == "zero-inertia") hub.mode = HubMode::ZeroInertia;
    else throw ScenarioError("unknown hub mode \"" + mode + "\"");
    hub.nps_bus = hj.value("nps_bus", std::string{});
    hub.wpp_mw = num(hj, "wpp_mw", 0.0);
    for (const auto& cj : hj.value("condensers", nlohmann::json::array())) {
      CondenserSpec c;
      c.s_n_mva = num(cj, "s_n_mva", 300.0);
      c.h_s = num(cj, "h_s", 2.0);
      c.d_pu = num(cj, "d_pu", 1.0);
      hub.condensers.push_back(c);
    }
    for (const auto& cj : hj.value("converters", nlohmann::json::array())) {
      HubConverter c;
      c.id = req_str(cj, "id", "hub converter");
      c.area = cj.value("area", std::string{});
      c.p_n_mw = num(cj, "p_n_mw", 2000.0);
      c.p_set_mw = req_num(cj, "p_set_mw", "hub converter " + c.id);
      c.r_pu = num(cj, "r_pu", hub.mode == HubMode::ZeroInertia ? 0.01 : 3.5);
      c.limit_mw = num(cj, "limit_mw", c.p_n_mw);
      c.t_c_s = num(cj, "t_c_s", 0.1);
      c.control = hub.mode == HubMode::ZeroInertia ? ConverterControl::GridForming
                                                   : ConverterControl::GridFollowing;
      if (auto e = cj.find("epc"); e != cj.end()) {
        c.epc = parse_epc(*e);
        if (c.epc.headroom_import_mw < 0.0)
          c.epc.headroom_import_mw = c.p_n_mw - std::fabs(c.p_set_mw);
        if (c.epc.headroom_export_mw < 0.0)
          c.epc.headroom_export_mw = c.p_n_mw - std::fabs(c.p_set_mw);
      }
      hub.converters.push_back(std::move(c));
    }
    if (auto cj = hj.find("coordinator"); cj != hj.end()) {
      hub.coordinator.k_hc_pu_s = num(*cj, "k_hc_pu_s", 1.65);
      if (auto pj = cj->find("participation"); pj != cj->end())
        hub.coordinator.participation = pj->get<std::vector<double>>();
    }
    if (hub.coordinator.participation.empty() && !hub.converters.empty())
      hub.coordinator.participation.assign(hub.converters.size(),
                                           1.0 / static_cast<double>(hub.converters.size()));
    s.hub = std::move(hub);
  }
  for (const auto& ej : j.value("events", nlohmann::json::array())) {
    Event e;
    e.t_s = req_num(ej, "t_s", "event");
    const std::string kind = req_str(ej, "kind", "event");
    if (kind == "generator-trip") e.kind = EventKind::GeneratorTrip;
    else if (kind == "hvdc-trip") e.kind = EventKind::HvdcTrip;
    else if (kind == "load-step") e.kind = EventKind::LoadStep;
    else throw ScenarioError("unknown event kind \"" + kind + "\"");
    e.target = req_str(ej, "target", "event");
    e.magnitude_mw = num(ej, "magnitude_mw", 0.0);
    s.events.push_back(std::move(e));
  }
  if (auto it = j.find("solver"); it != j.end()) {
    const auto& c = *it;
    s.solver.dt_s = num(c, "dt_s", 0.01);
    s.solver.t_end_s = num(c, "t_end_s", 60.0);
    s.solver.newton_tol = num(c, "newton_tol", 1e-10);
    s.solver.newton_max_iter = static_cast<int>(num(c, "newton_max_iter", 25));
    const std::string integ = c.value("integrator", "rk4");
    if (integ == "rk4") s.solver.integrator = Integrator::Rk4;
    else if (integ == "trapezoidal") s.solver.integrator = Integrator::Trapezoidal;
    else throw ScenarioError("unknown integrator \"" + integ + "\"");
  }
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using nlohmann::json;
  using io_detail::epc_to_json;
  json j;
  j["schema_version"] = s.schema_version;
  j["base_power_mva"] = s.base_power_mva;
  j["f0_hz"] = s.f0_hz;
  j["targets"] = {{"f_n", s.targets.f_n},     {"f_fcrd", s.targets.f_fcrd},
                  {"f_tfl", s.targets.f_tfl}, {"f_min", s.targets.f_min},
                  {"f_shed", s.targets.f_shed}, {"df_ss_max", s.targets.df_ss_max}};
  j["buses"] = json::array();
  for (const auto& b : s.buses)
    j["buses"].push_back({{"id", b.id}, {"kv", b.kv}, {"slack", b.slack},
                          {"v_set_pu", b.v_set_pu}});
  j["branches"] = json::array();
  for (const auto& b : s.branches)
    j["branches"].push_back({{"id", b.id}, {"from", b.from}, {"to", b.to},
                             {"r_pu", b.r_pu}, {"x_pu", b.x_pu}, {"b_pu", b.b_pu},
                             {"ratio", b.ratio}});
  j["machines"] = json::array();
  for (const auto& m : s.machines) {
    const auto& g = m.governor;
    j["machines"].push_back(
        {{"id", m.id}, {"bus", m.bus}, {"s_n_mva", m.s_n_mva}, {"h_s", m.h_s},
         {"d_pu", m.d_pu}, {"xd_prime_pu", m.xd_prime_pu}, {"p0_mw", m.p0_mw},
         {"q0_mvar", m.q0_mvar},
         {"governor", {{"enabled", g.enabled}, {"r_pu", g.r_pu}, {"rt_pu", g.rt_pu},
                       {"tr_s", g.tr_s}, {"tg_s", g.tg_s}, {"tw_s", g.tw_s},
                       {"gate_min", g.gate_min}, {"gate_max", g.gate_max},
                       {"rate_limit_pu_s", g.rate_limit_pu_s}}}});
  }
  j["loads"] = json::array();
  for (const auto& l : s.loads)
    j["loads"].push_back({{"id", l.id}, {"bus", l.bus}, {"p0_mw", l.p0_mw},
                          {"q0_mvar", l.q0_mvar},
                          {"zip", {{"z", l.zip.z}, {"i", l.zip.i}, {"p", l.zip.p}}}});
  j["hvdc"] = json::array();
  for (const auto& h : s.hvdc_links)
    j["hvdc"].push_back({{"id", h.id}, {"bus", h.bus}, {"p_n_mw", h.p_n_mw},
                         {"p0_mw", h.p0_mw}, {"q0_mvar", h.q0_mvar}, {"t_c_s", h.t_c_s},
                         {"epc", epc_to_json(h.epc)}});
  if (s.hub) {
    const auto& hub = *s.hub;
    json hj;
    hj["mode"] = hub.mode == HubMode::LowInertia ? "low-inertia" : "zero-inertia";
    hj["nps_bus"] = hub.nps_bus;
    hj["wpp_mw"] = hub.wpp_mw;
    hj["condensers"] = json::array();
    for (const auto& c : hub.condensers)
      hj["condensers"].push_back({{"s_n_mva", c.s_n_mva}, {"h_s", c.h_s}, {"d_pu", c.d_pu}});
    hj["converters"] = json::array();
    for (const auto& c : hub.converters)
      hj["converters"].push_back({{"id", c.id}, {"area", c.area}, {"p_n_mw", c.p_n_mw},
                                  {"p_set_mw", c.p_set_mw}, {"r_pu", c.r_pu},
                                  {"limit_mw", c.limit_mw}, {"t_c_s", c.t_c_s},
                                  {"epc", epc_to_json(c.epc)}});
    hj["coordinator"] = {{"k_hc_pu_s", hub.coordinator.k_hc_pu_s},
                         {"participation", hub.coordinator.participation}};
    j["hub"] = std::move(hj);
  }
  j["events"] = json::array();
  for (const auto& e : s.events) {
    const char* kind = e.kind == EventKind::GeneratorTrip ? "generator-trip"
                       : e.kind == EventKind::HvdcTrip    ? "hvdc-trip"
                                                          : "load-step";
    j["events"].push_back({{"t_s", e.t_s}, {"kind", kind}, {"target", e.target},
                           {"magnitude_mw", e.magnitude_mw}});
  }
  j["solver"] = {{"dt_s", s.solver.dt_s}, {"t_end_s", s.solver.t_end_s},
                 {"newton_tol", s.solver.newton_tol},
                 {"newton_max_iter", s.solver.newton_max_iter},
                 {"integrator", s.solver.integrator == Integrator::Rk4 ? "rk4" : "trapezoidal"}};
  return j;
}

/// Loads and validates a scenario file. Throws ScenarioError on parse or
/// validation failure, naming the offending field or element.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file \"" + path + "\"");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("malformed JSON in \"" + path + "\": " + e.what());
  }
  Scenario s = scenario_from_json(j);
  require_valid(s);
  return s;
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write scenario file \"" + path + "\"");
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace freqdyn
