#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "freqdyn/model.hpp"

namespace freqdyn {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string rule;     ///< stable rule name
  std::string element;  ///< offending element id ("" for scenario-level rules)
  std::string message;

  std::string str() const {
    std::ostringstream os;
    os << (severity == Severity::Error ? "error" : "warning") << " [" << rule << "]";
    if (!element.empty()) os << " " << element;
    os << ": " << message;
    return os.str();
  }
};

namespace detail {

inline void add(std::vector<Diagnostic>& out, Severity sev, std::string rule,
                std::string element, std::string message) {
  out.push_back({sev, std::move(rule), std::move(element), std::move(message)});
}

}  // namespace detail

/// Checks every scenario invariant; returns an empty list iff all hold.
/// Diagnostics carry the element id and a stable rule name.
inline std::vector<Diagnostic> validate_scenario(const Scenario& s) {
  using detail::add;
  std::vector<Diagnostic> out;

  if (s.base_power_mva <= 0.0)
    add(out, Severity::Error, "base-power-positive", "", "base_power_mva must be > 0");

  const auto& t = s.targets;
  if (!t.ordered()) {
    std::ostringstream os;
    os << "thresholds must satisfy f_shed < f_min < f_tfl < f_fcrd < f_n, got "
       << t.f_shed << " / " << t.f_min << " / " << t.f_tfl << " / " << t.f_fcrd
       << " / " << t.f_n;
    add(out, Severity::Error, "threshold-ordering", "", os.str());
  }

  // Identifier uniqueness across all element kinds.
  std::map<std::string, int> ids;
  auto claim = [&](const std::string& id, const char* kind) {
    if (id.empty()) {
      add(out, Severity::Error, "empty-id", "", std::string(kind) + " with empty id");
      return;
    }
    if (++ids[id] == 2)
      add(out, Severity::Error, "duplicate-id", id, "identifier used more than once");
  };
  for (const auto& b : s.buses) claim(b.id, "bus");
  for (const auto& b : s.branches) claim(b.id, "branch");
  for (const auto& m : s.machines) claim(m.id, "machine");
  for (const auto& l : s.loads) claim(l.id, "load");
  for (const auto& h : s.hvdc_links) claim(h.id, "hvdc link");
  if (s.hub)
    for (const auto& c : s.hub->converters) claim(c.id, "hub converter");

  std::set<std::string> bus_ids;
  for (const auto& b : s.buses) {
    bus_ids.insert(b.id);
    if (b.kv <= 0.0)
      add(out, Severity::Error, "bus-voltage-positive", b.id, "kv must be > 0");
  }
  auto need_bus = [&](const std::string& bus, const std::string& element) {
    if (!bus_ids.count(bus))
      add(out, Severity::Error, "dangling-reference", element,
          "references unknown bus \"" + bus + "\"");
  };

  int slack_count = 0;
  for (const auto& b : s.buses) slack_count += b.slack ? 1 : 0;
  if (slack_count != 1)
    add(out, Severity::Error, "slack-count", "",
        "exactly one slack bus required, found " + std::to_string(slack_count));

  for (const auto& br : s.branches) {
    need_bus(br.from, br.id);
    need_bus(br.to, br.id);
    if (br.r_pu == 0.0 && br.x_pu == 0.0)
      add(out, Severity::Error, "branch-impedance", br.id, "r and x both zero");
    if (br.ratio <= 0.0)
      add(out, Severity::Error, "branch-ratio", br.id, "off-nominal ratio must be > 0");
  }

  for (const auto& m : s.machines) {
    need_bus(m.bus, m.id);
    if (m.s_n_mva <= 0.0)
      add(out, Severity::Error, "machine-rating", m.id, "s_n_mva must be > 0");
    if (m.h_s <= 0.0)
      add(out, Severity::Error, "zero-inertia-onshore", m.id,
          "onshore machine requires H > 0");
    if (m.xd_prime_pu <= 0.0)
      add(out, Severity::Error, "machine-reactance", m.id, "xd_prime_pu must be > 0");
    const auto& g = m.governor;
    if (g.enabled) {
      if (!(g.r_pu > 0.0 && g.r_pu <= 1.0))
        add(out, Severity::Error, "governor-droop-range", m.id,
            "permanent droop must satisfy 0 < R <= 1");
      if (g.gate_min >= g.gate_max)
        add(out, Severity::Error, "gate-limits", m.id, "gate_min must be < gate_max");
      else if (m.s_n_mva > 0.0) {
        const double loading = m.p0_mw / m.s_n_mva;
        if (loading < g.gate_min || loading > g.gate_max)
          add(out, Severity::Error, "gate-limits", m.id,
              "initial loading outside gate limits");
      }
      if (g.tg_s <= 0.0 || g.tw_s <= 0.0)
        add(out, Severity::Error, "governor-time-constants", m.id,
            "tg_s and tw_s must be > 0");
    }
  }

  for (const auto& l : s.loads) {
    need_bus(l.bus, l.id);
    const auto& z = l.zip;
    if (z.z < 0.0 || z.i < 0.0 || z.p < 0.0 || std::fabs(z.sum() - 1.0) > 1e-9)
      add(out, Severity::Error, "zip-coefficients", l.id,
          "coefficients must be non-negative and sum to 1");
  }

  for (const auto& h : s.hvdc_links) {
    need_bus(h.bus, h.id);
    if (h.p_n_mw <= 0.0)
      add(out, Severity::Error, "link-rating", h.id, "p_n_mw must be > 0");
    if (std::fabs(h.p0_mw) > h.p_n_mw)
      add(out, Severity::Error, "link-setpoint-exceeds-rating", h.id,
          "|p0_mw| must not exceed p_n_mw");
    if (h.t_c_s <= 0.0)
      add(out, Severity::Error, "converter-time-constant", h.id, "t_c_s must be > 0");
    else if (h.t_c_s < 0.05 || h.t_c_s > 0.3)
      add(out, Severity::Warning, "converter-time-constant-band", h.id,
          "t_c_s outside the 0.05-0.3 s converter response band");
    if (h.epc.enabled && h.epc.r_pu <= 0.0)
      add(out, Severity::Error, "epc-droop-positive", h.id,
          "EPC droop must be > 0 when enabled");
  }

  if (s.hub) {
    const auto& hub = *s.hub;
    need_bus(hub.nps_bus, "hub");
    if (hub.mode == HubMode::LowInertia && hub.condensers.empty())
      add(out, Severity::Error, "hub-condenser-required", "hub",
          "low-inertia mode requires at least one synchronous condenser");
    if (hub.mode == HubMode::ZeroInertia)
      for (const auto& c : hub.converters)
        if (c.control != ConverterControl::GridForming)
          add(out, Severity::Error, "hub-forming-required", c.id,
              "zero-inertia mode requires grid-forming converters");
    for (const auto& c : hub.converters) {
      if (c.p_n_mw <= 0.0)
        add(out, Severity::Error, "hub-converter-rating", c.id, "p_n_mw must be > 0");
      if (std::fabs(c.p_set_mw) > c.p_n_mw)
        add(out, Severity::Error, "hub-setpoint-exceeds-rating", c.id,
            "|p_set_mw| must not exceed p_n_mw");
      if (c.r_pu <= 0.0)
        add(out, Severity::Error, "hub-droop-positive", c.id, "droop must be > 0");
    }
    const auto& part = hub.coordinator.participation;
    if (!part.empty()) {
      if (part.size() != hub.converters.size())
        add(out, Severity::Error, "participation-size", "hub",
            "participation factor count must match converter count");
      double sum = 0.0;
      bool neg = false;
      for (double p : part) { sum += p; neg = neg || p < 0.0; }
      if (neg || std::fabs(sum - 1.0) > 1e-9)
        add(out, Severity::Error, "participation-sum", "hub",
            "participation factors must be non-negative and sum to 1");
    }
    double balance = hub.wpp_mw;
    for (const auto& c : hub.converters) balance += c.p_set_mw;
    if (std::fabs(balance) > 1e-6 * std::max(1.0, hub.converter_base_mw()))
      add(out, Severity::Error, "hub-power-balance", "hub",
          "converter setpoints plus wind injection must balance to zero");
    int nps_links = 0;
    for (const auto& c : hub.converters) nps_links += c.area == "nps" ? 1 : 0;
    if (nps_links == 0 && !hub.nps_bus.empty())
      add(out, Severity::Warning, "hub-nps-link-missing", "hub",
          "nps_bus set but no converter tagged area=\"nps\"");
  }

  // Events.
  std::set<std::string> machine_ids, load_ids, link_ids;
  for (const auto& m : s.machines) machine_ids.insert(m.id);
  for (const auto& l : s.loads) load_ids.insert(l.id);
  for (const auto& h : s.hvdc_links) link_ids.insert(h.id);
  if (s.hub)
    for (const auto& c : s.hub->converters) link_ids.insert(c.id);

  std::set<std::pair<std::string, int>> trips;
  for (const auto& e : s.events) {
    if (!(e.t_s > 0.0) || e.t_s > s.solver.t_end_s)
      add(out, Severity::Error, "event-time-range", e.target,
          "event time must be strictly positive and <= t_end");
    const double steps = e.t_s / s.solver.dt_s;
    if (std::fabs(steps - std::round(steps)) > 1e-6)
      add(out, Severity::Error, "event-step-alignment", e.target,
          "event time must be an integer multiple of dt_s");
    const std::set<std::string>* domain = nullptr;
    switch (e.kind) {
      case EventKind::GeneratorTrip: domain = &machine_ids; break;
      case EventKind::HvdcTrip: domain = &link_ids; break;
      case EventKind::LoadStep: domain = &load_ids; break;
    }
    if (!domain->count(e.target))
      add(out, Severity::Error, "event-target", e.target,
          "event references unknown or kind-inappropriate element \"" + e.target + "\"");
    if (e.kind != EventKind::LoadStep &&
        !trips.insert({e.target, static_cast<int>(e.kind)}).second)
      add(out, Severity::Error, "event-duplicate-trip", e.target,
          "element tripped more than once");
  }

  if (s.solver.dt_s <= 0.0)
    add(out, Severity::Error, "solver-step-positive", "", "dt_s must be > 0");
  if (s.solver.t_end_s <= 0.0)
    add(out, Severity::Error, "solver-horizon-positive", "", "t_end_s must be > 0");
  if (s.hub && s.hub->mode == HubMode::ZeroInertia && s.solver.dt_s > 0.02)
    add(out, Severity::Warning, "solver-step-hub", "",
        "dt_s > 0.02 s with a zero-inertia hub couples stiffly");

  // Connectivity: every island must contain a source (machine or slack bus).
  if (!s.buses.empty()) {
    const std::size_t n = s.buses.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](std::size_t a) {
      while (parent[a] != a) { parent[a] = parent[parent[a]]; a = parent[a]; }
      return a;
    };
    for (const auto& br : s.branches) {
      const int f = s.bus_index(br.from), to = s.bus_index(br.to);
      if (f >= 0 && to >= 0) parent[find(f)] = find(to);
    }
    std::map<std::size_t, std::vector<std::string>> comps;
    for (std::size_t i = 0; i < n; ++i) comps[find(i)].push_back(s.buses[i].id);
    std::set<std::size_t> sourced;
    for (const auto& m : s.machines) {
      const int b = s.bus_index(m.bus);
      if (b >= 0) sourced.insert(find(b));
    }
    for (std::size_t i = 0; i < n; ++i)
      if (s.buses[i].slack) sourced.insert(find(i));
    for (const auto& [root, members] : comps) {
      if (sourced.count(root)) continue;
      std::ostringstream os;
      os << "island without a source:";
      for (const auto& id : members) os << " " << id;
      add(out, Severity::Error, "island-without-source", members.front(), os.str());
    }
  }

  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

/// Throws ScenarioError listing all error-severity diagnostics.
inline void require_valid(const Scenario& s) {
  const auto diags = validate_scenario(s);
  if (!has_errors(diags)) return;
  std::ostringstream os;
  os << "scenario validation failed:";
  for (const auto& d : diags)
    if (d.severity == Severity::Error) os << "\n  " << d.str();
  throw ScenarioError(os.str());
}

}  // namespace freqdyn
