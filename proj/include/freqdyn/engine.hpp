#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "freqdyn/hub.hpp"
#include "freqdyn/hvdc.hpp"
#include "freqdyn/machines.hpp"
#include "freqdyn/model.hpp"
#include "freqdyn/network.hpp"
#include "freqdyn/validate.hpp"

namespace freqdyn {

/// Metrics over a frequency series on a uniform grid. t_event marks the first
/// disturbance; the initial RoCoF is the slope over the 500 ms that follow it.
/// Ties at the minimum report the earlier timestamp.
inline Metrics metrics_from_series(const std::vector<double>& t_s,
                                   const std::vector<double>& f_hz, double f_n,
                                   std::optional<double> t_event) {
  Metrics m;
  if (t_s.empty() || f_hz.size() != t_s.size()) return m;
  std::size_t imin = 0;
  double max_ifd = 0.0;
  for (std::size_t i = 0; i < f_hz.size(); ++i) {
    if (f_hz[i] < f_hz[imin]) imin = i;
    max_ifd = std::max(max_ifd, std::fabs(f_hz[i] - f_n));
  }
  m.nadir_hz = f_hz[imin];
  m.t_nadir_s = t_s[imin];
  m.max_ifd_hz = max_ifd;

  if (t_event) {
    const double t0 = *t_event;
    const double t1 = t0 + 0.5;
    std::size_t i0 = 0, i1 = 0;
    for (std::size_t i = 0; i < t_s.size(); ++i) {
      if (t_s[i] <= t0 + 1e-9) i0 = i;
      if (t_s[i] <= t1 + 1e-9) i1 = i;
    }
    if (i1 > i0) m.rocof_hz_per_s = (f_hz[i1] - f_hz[i0]) / (t_s[i1] - t_s[i0]);
  }

  const double t_tail = t_s.back() - 5.0;
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < t_s.size(); ++i)
    if (t_s[i] >= t_tail - 1e-9) { acc += f_hz[i]; ++cnt; }
  m.ss_deviation_hz = cnt ? acc / static_cast<double>(cnt) - f_n : 0.0;
  return m;
}

/// Time-domain simulator: the differential states (machines, governors,
/// converters, hub) advance by RK4 with the algebraic network re-solved at
/// every integrator stage; events apply exactly at step boundaries.
class Engine {
 public:
  explicit Engine(Scenario scenario) : s_(std::move(scenario)) {
    require_valid(s_);
    init();
  }

  const Scenario& scenario() const { return s_; }
  double time() const { return t_; }

  struct Snapshot {
    double f_avg_hz = 0.0;
    double f_hub_hz = 0.0;
    std::vector<double> machine_f_hz;
    std::vector<double> machine_pe_mw;
    std::vector<double> bus_v_pu;
    std::vector<double> link_p_mw;
    std::vector<double> link_epc_mw;
    std::vector<double> hub_conv_p_mw;
    double p_fcrd_mw = 0.0;   ///< cumulated FCR-D mechanical power deviation
    double p_epc_mw = 0.0;    ///< cumulated EPC correction
    double p_load_mw = 0.0;   ///< total ZIP load at solved voltages
    double losses_mw = 0.0;
  };

  void apply_event(const Event& e) {
    switch (e.kind) {
      case EventKind::GeneratorTrip: {
        const int i = machine_index(e.target);
        if (i < 0) throw SolverError("generator-trip: unknown machine " + e.target);
        if (!mach_online_[i])
          throw SolverError("generator-trip: " + e.target + " already tripped");
        mach_online_[i] = false;
        rebuild_augmented();
        return;
      }
      case EventKind::HvdcTrip: {
        if (const int i = link_index(e.target); i >= 0) {
          if (!link_online_[i])
            throw SolverError("hvdc-trip: " + e.target + " already tripped");
          link_online_[i] = false;
          x_[link_off_ + i] = 0.0;  // both terminals blocked immediately
          return;
        }
        if (s_.hub) {
          for (std::size_t c = 0; c < s_.hub->converters.size(); ++c)
            if (s_.hub->converters[c].id == e.target) {
              if (!hub_online_[c])
                throw SolverError("hvdc-trip: " + e.target + " already tripped");
              hub_online_[c] = false;
              x_[hub_off_ + 1 + c] = 0.0;
              return;
            }
        }
        throw SolverError("hvdc-trip: unknown link " + e.target);
      }
      case EventKind::LoadStep: {
        for (std::size_t i = 0; i < loads_now_.size(); ++i)
          if (load_ids_[i] == e.target) {
            loads_now_[i].p0_mw += e.magnitude_mw;
            return;
          }
        throw SolverError("load-step: unknown load " + e.target);
      }
    }
  }

  void step() {
    const double dt = s_.solver.dt_s;
    const std::size_t n = x_.size();
    favg_hist_.push_back(f_avg(x_));  // measurement history for EPC delays
    std::vector<double> dx;
    if (s_.solver.integrator == Integrator::Rk4) {
      std::vector<double> k1, k2, k3, k4, xs(n);
      evaluate(x_, &k1);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x_[i] + 0.5 * dt * k1[i];
      evaluate(xs, &k2);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x_[i] + 0.5 * dt * k2[i];
      evaluate(xs, &k3);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x_[i] + dt * k3[i];
      evaluate(xs, &k4);
      for (std::size_t i = 0; i < n; ++i)
        x_[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    } else {  // Heun predictor-corrector
      std::vector<double> k1, k2, xs(n);
      evaluate(x_, &k1);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x_[i] + dt * k1[i];
      evaluate(xs, &k2);
      for (std::size_t i = 0; i < n; ++i) x_[i] += 0.5 * dt * (k1[i] + k2[i]);
    }
    t_ += dt;
  }

  /// Algebraic layer at the current state (network re-solve, no advance).
  Snapshot snapshot() { return evaluate(x_, nullptr); }

  SimulationResult run() {
    SimulationResult res;
    const double dt = s_.solver.dt_s;
    const long nsteps = std::lround(s_.solver.t_end_s / dt);
    init_channels(res);
    for (long k = 0; k <= nsteps; ++k) {
      const double t = static_cast<double>(k) * dt;
      for (std::size_t e = 0; e < s_.events.size(); ++e)
        if (!applied_.count(e) &&
            std::fabs(s_.events[e].t_s - t) < 1e-9 * std::max(1.0, s_.events[e].t_s)) {
          apply_event(s_.events[e]);
          applied_.insert(e);
        }
      record(res, t);
      if (k < nsteps) step();
    }
    finish_metrics(res);
    return res;
  }

  int machine_index(const std::string& id) const {
    for (std::size_t i = 0; i < s_.machines.size(); ++i)
      if (s_.machines[i].id == id) return static_cast<int>(i);
    return -1;
  }
  int link_index(const std::string& id) const {
    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i)
      if (s_.hvdc_links[i].id == id) return static_cast<int>(i);
    return -1;
  }

  double f_avg_hz() const { return f_avg(x_); }
  bool machine_online(int i) const { return mach_online_[i]; }
  double machine_speed_hz(int i) const {
    return s_.targets.f_n * (1.0 + x_[mach_off_ + 5 * i + 1]);
  }
  double link_p_mw(int i) const { return link_online_[i] ? x_[link_off_ + i] : 0.0; }
  double machine_p_m0_mw(int i) const { return p_m0_mw_[i]; }
  const OperatingPoint& operating_point() const { return op_; }
  const AdmittanceMatrix& admittance() const { return ybase_; }
  double online_kinetic_energy_mws() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < s_.machines.size(); ++i)
      if (mach_online_[i]) acc += s_.machines[i].kinetic_energy_mws();
    return acc;
  }

 private:
  void init() {
    op_ = solve_power_flow(s_);
    ybase_ = build_admittance(s_);
    for (const auto& l : s_.loads)
      loads_now_.push_back({s_.bus_index(l.bus), l.p0_mw, l.q0_mvar, l.zip});
    load_ids_.reserve(s_.loads.size());
    for (const auto& l : s_.loads) load_ids_.push_back(l.id);

    mach_online_.assign(s_.machines.size(), true);
    link_online_.assign(s_.hvdc_links.size(), true);

    mach_off_ = 0;
    link_off_ = static_cast<int>(5 * s_.machines.size());
    hub_off_ = link_off_ + static_cast<int>(s_.hvdc_links.size());
    std::size_t nx = hub_off_;
    if (s_.hub) {
      hub_online_.assign(s_.hub->converters.size(), true);
      nx += 2 + s_.hub->converters.size();  // SC speed, converter powers, integrator
    }
    x_.assign(nx, 0.0);

    domega_ref_ = (s_.f0_hz - s_.targets.f_n) / s_.targets.f_n;
    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      x_[mach_off_ + 5 * i + 0] = op_.machines[i].delta_rad;
      x_[mach_off_ + 5 * i + 1] = domega_ref_;
      e_pu_.push_back(op_.machines[i].e_pu);
    }
    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i)
      x_[link_off_ + i] = s_.hvdc_links[i].p0_mw;
    if (s_.hub)
      for (std::size_t c = 0; c < s_.hub->converters.size(); ++c)
        x_[hub_off_ + 1 + c] = s_.hub->converters[c].p_set_mw;

    rebuild_augmented();
    v_ = op_.v;

    // Mechanical powers are pinned to the step solver's electrical powers so
    // the no-event trajectory is an exact fixed point of the integrator.
    solve_at(x_);
    p_m0_mw_.assign(s_.machines.size(), 0.0);
    gate0_.assign(s_.machines.size(), 0.0);
    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      const auto& m = s_.machines[i];
      const double pe_pu = machine_pe_machpu(static_cast<int>(i), x_);
      const double pm_pu = pe_pu + m.d_pu * domega_ref_;
      p_m0_mw_[i] = pm_pu * m.s_n_mva;
      gate0_[i] = pm_pu;
      if (m.governor.enabled &&
          (gate0_[i] < m.governor.gate_min || gate0_[i] > m.governor.gate_max))
        throw ScenarioError("machine " + m.id + ": initial gate outside limits");
    }
  }

  void rebuild_augmented() {
    yaug_ = ybase_;
    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      if (!mach_online_[i]) continue;
      const auto& m = s_.machines[i];
      const double x_sys = m.xd_prime_pu * s_.base_power_mva / m.s_n_mva;
      const int b = s_.bus_index(m.bus);
      yaug_.add(b, b, Complex(0.0, -1.0 / x_sys));
    }
  }

  double f_avg(const std::vector<double>& x) const {
    bool any_fcrd = false;
    for (std::size_t i = 0; i < s_.machines.size(); ++i)
      if (mach_online_[i] && s_.machines[i].governor.enabled) any_fcrd = true;
    double wsum = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      if (!mach_online_[i]) continue;
      if (any_fcrd && !s_.machines[i].governor.enabled) continue;
      const double w = s_.machines[i].kinetic_energy_mws();
      wsum += w;
      acc += w * s_.targets.f_n * (1.0 + x[mach_off_ + 5 * i + 1]);
    }
    return wsum > 0.0 ? acc / wsum : s_.targets.f_n;
  }

  double machine_pe_machpu(int i, const std::vector<double>& x) const {
    const auto& m = s_.machines[i];
    const double x_sys = m.xd_prime_pu * s_.base_power_mva / m.s_n_mva;
    const Complex e = std::polar(e_pu_[i], x[mach_off_ + 5 * i + 0]);
    const Complex vb = v_[s_.bus_index(m.bus)];
    const Complex im = (e - vb) / Complex(0.0, x_sys);
    const double pe_sys = (e * std::conj(im)).real();
    return pe_sys * s_.base_power_mva / m.s_n_mva;
  }

  double hub_nps_power(std::size_t c, const std::vector<double>& x) const {
    if (s_.hub->mode == HubMode::LowInertia || hub_alg_p_.empty())
      return x[hub_off_ + 1 + c];
    return hub_alg_p_[c];
  }

  /// Frequency the EPC of a device actually sees: the live value, or the
  /// step-aligned history when an activation delay is configured.
  double epc_frequency(double f_now, double delay_s) const {
    if (delay_s <= 0.0) return f_now;
    const long back = std::lround(delay_s / s_.solver.dt_s);
    if (back <= 0) return f_now;
    // favg_hist_[k] is the measurement at t = k dt.
    const long idx = static_cast<long>(favg_hist_.size()) - 1 - back;
    if (idx < 0) return favg_hist_.empty() ? f_now : favg_hist_.front();
    return favg_hist_[idx];
  }

  void solve_at(const std::vector<double>& x) {
    std::vector<NortonSource> sources;
    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      if (!mach_online_[i]) continue;
      const auto& m = s_.machines[i];
      const double x_sys = m.xd_prime_pu * s_.base_power_mva / m.s_n_mva;
      const Complex e = std::polar(e_pu_[i], x[mach_off_ + 5 * i + 0]);
      sources.push_back({s_.bus_index(m.bus), Complex(0.0, -1.0 / x_sys),
                         e / Complex(0.0, x_sys)});
    }
    std::vector<PqInjection> inj;
    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i) {
      if (!link_online_[i]) continue;
      inj.push_back({s_.bus_index(s_.hvdc_links[i].bus), x[link_off_ + i],
                     s_.hvdc_links[i].q0_mvar});
    }
    if (s_.hub && !s_.hub->nps_bus.empty()) {
      double p = 0.0;
      for (std::size_t c = 0; c < s_.hub->converters.size(); ++c)
        if (hub_online_[c] && s_.hub->converters[c].area == "nps")
          p -= hub_nps_power(c, x);
      inj.push_back({s_.bus_index(s_.hub->nps_bus), p, 0.0});
    }
    try {
      auto sol = solve_network_step(yaug_, sources, inj, loads_now_, v_,
                                    s_.base_power_mva, s_.solver.newton_tol,
                                    s_.solver.newton_max_iter);
      v_ = std::move(sol.v);
    } catch (const SolverError& err) {
      std::ostringstream os;
      os << "t=" << t_ << " s: " << err.what();
      throw SolverError(os.str());
    }
  }

  std::vector<double> hub_effective_setpoints(const std::vector<double>& x,
                                              double f_nps_hz) const {
    const auto& hub = *s_.hub;
    const double integ = x[hub_off_ + 1 + hub.converters.size()];
    auto setp = coordinator_corrections(hub, integ, hub_online_);
    for (std::size_t c = 0; c < hub.converters.size(); ++c) {
      setp[c] += hub.converters[c].p_set_mw;
      if (hub.converters[c].area == "nps")
        setp[c] -= epc_output(epc_frequency(f_nps_hz, hub.converters[c].epc.delay_s),
                              hub.converters[c].epc, hub.converters[c].p_n_mw, s_.targets);
    }
    return setp;
  }

  /// One pass over the algebraic layer; fills derivatives when dx_out != null.
  Snapshot evaluate(const std::vector<double>& x, std::vector<double>* dx_out) {
    const auto& tg = s_.targets;
    const double f_nps = f_avg(x);

    // Zero-inertia hub algebra runs first: its powers feed the network.
    double f_hub = tg.f_n;
    std::vector<bool> hub_sat;
    if (s_.hub && s_.hub->mode == HubMode::ZeroInertia) {
      const auto setp = hub_effective_setpoints(x, f_nps);
      auto sol =
          hub_frequency_zero_inertia(*s_.hub, setp, hub_online_, s_.hub->wpp_mw, tg.f_n);
      f_hub = sol.f_hub_hz;
      hub_alg_p_ = std::move(sol.p_mw);
      hub_sat = std::move(sol.saturated);
    }

    solve_at(x);

    Snapshot snap;
    snap.f_avg_hz = f_nps;
    std::vector<double> dx(x.size(), 0.0);

    for (std::size_t i = 0; i < s_.machines.size(); ++i) {
      const auto& m = s_.machines[i];
      const double domega = x[mach_off_ + 5 * i + 1];
      const double f_i = tg.f_n * (1.0 + domega);
      snap.machine_f_hz.push_back(f_i);
      if (!mach_online_[i]) {
        snap.machine_pe_mw.push_back(0.0);
        continue;
      }
      const double pe_pu = machine_pe_machpu(static_cast<int>(i), x);
      snap.machine_pe_mw.push_back(pe_pu * m.s_n_mva);

      GovernorState gs{x[mach_off_ + 5 * i + 2], x[mach_off_ + 5 * i + 3],
                       x[mach_off_ + 5 * i + 4]};
      const auto gd = governor_derivatives(gs, f_i, tg, m.governor, gate0_[i]);
      const double pm_pu = p_m0_mw_[i] / m.s_n_mva + gd.p_m_dev_pu;
      if (m.governor.enabled) snap.p_fcrd_mw += gd.p_m_dev_pu * m.s_n_mva;

      MachineState ms{x[mach_off_ + 5 * i + 0], domega, e_pu_[i]};
      const auto sd = swing_derivatives(ms, pm_pu, pe_pu, m, tg.f_n);
      // State angles live in a frame rotating at the scenario's initial frequency.
      dx[mach_off_ + 5 * i + 0] =
          sd.ddelta - 2.0 * std::numbers::pi * tg.f_n * domega_ref_;
      dx[mach_off_ + 5 * i + 1] = sd.ddomega;
      dx[mach_off_ + 5 * i + 2] = gd.dx_comp;
      dx[mach_off_ + 5 * i + 3] = gd.dgate;
      dx[mach_off_ + 5 * i + 4] = gd.dx_turb;
    }

    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i) {
      const auto& l = s_.hvdc_links[i];
      if (!link_online_[i]) {
        snap.link_p_mw.push_back(0.0);
        snap.link_epc_mw.push_back(0.0);
        continue;
      }
      const double p = x[link_off_ + i];
      snap.link_p_mw.push_back(p);
      const double pe = epc_output(epc_frequency(f_nps, l.epc.delay_s), l.epc, l.p_n_mw, tg);
      snap.link_epc_mw.push_back(pe);
      snap.p_epc_mw += pe;
      const double p_ref = std::clamp(l.p0_mw + pe, -l.p_n_mw, l.p_n_mw);
      dx[link_off_ + i] = converter_dynamics(p, p_ref, l.t_c_s);
    }

    if (s_.hub) {
      const auto& hub = *s_.hub;
      const auto setp = hub_effective_setpoints(x, f_nps);
      if (hub.mode == HubMode::LowInertia) {
        HubState hs;
        hs.sc_domega_pu = x[hub_off_];
        hs.conv_online = hub_online_;
        for (std::size_t c = 0; c < hub.converters.size(); ++c)
          hs.conv_p_mw.push_back(x[hub_off_ + 1 + c]);
        const auto hd = hub_dynamics_low_inertia(hub, hs, setp, hub.wpp_mw, tg.f_n);
        f_hub = hd.f_hub_hz;
        dx[hub_off_] = hd.dsc_domega;
        for (std::size_t c = 0; c < hub.converters.size(); ++c) {
          dx[hub_off_ + 1 + c] = hd.dconv_p[c];
          snap.hub_conv_p_mw.push_back(hub_online_[c] ? hs.conv_p_mw[c] : 0.0);
        }
        dx[hub_off_ + 1 + hub.converters.size()] = hd.dintegrator;
      } else {
        bool all_sat = true;
        for (std::size_t c = 0; c < hub.converters.size(); ++c) {
          snap.hub_conv_p_mw.push_back(hub_online_[c] ? hub_alg_p_[c] : 0.0);
          if (hub_online_[c] && !hub_sat[c]) all_sat = false;
        }
        dx[hub_off_ + 1 + hub.converters.size()] =
            all_sat ? 0.0 : coordinator_rate(f_hub, hub.coordinator.k_hc_pu_s, tg.f_n);
      }
      for (std::size_t c = 0; c < hub.converters.size(); ++c)
        if (hub_online_[c] && hub.converters[c].area == "nps")
          snap.p_epc_mw +=
              epc_output(f_nps, hub.converters[c].epc, hub.converters[c].p_n_mw, tg);
    }
    snap.f_hub_hz = f_hub;

    snap.bus_v_pu.reserve(v_.size());
    for (const auto& vv : v_) snap.bus_v_pu.push_back(std::abs(vv));

    double p_inj = 0.0;
    for (std::size_t i = 0; i < s_.machines.size(); ++i)
      if (mach_online_[i]) p_inj += snap.machine_pe_mw[i];
    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i) p_inj += snap.link_p_mw[i];
    if (s_.hub)
      for (std::size_t c = 0; c < s_.hub->converters.size(); ++c)
        if (hub_online_[c] && s_.hub->converters[c].area == "nps")
          p_inj -= snap.hub_conv_p_mw[c];
    for (const auto& l : loads_now_) {
      const double vm = std::abs(v_[l.bus]);
      snap.p_load_mw += l.p0_mw * l.zip.factor(vm);
    }
    snap.losses_mw = p_inj - snap.p_load_mw;

    if (dx_out) *dx_out = std::move(dx);
    return snap;
  }

  void init_channels(SimulationResult& res) {
    auto add = [&](const std::string& name) { res.channels.push_back({name, {}}); };
    add("system.f_avg_hz");
    for (const auto& m : s_.machines) add(m.id + ".speed_hz");
    for (const auto& b : s_.buses) add(b.id + ".v_pu");
    for (const auto& l : s_.hvdc_links) {
      add(l.id + ".p_mw");
      add(l.id + ".p_epc_mw");
    }
    if (s_.hub) {
      add("hub.f_hz");
      for (const auto& c : s_.hub->converters) add(c.id + ".p_mw");
    }
    add("system.p_fcrd_mw");
    add("system.p_epc_mw");
    add("system.p_load_mw");
    add("system.p_loss_mw");
  }

  void record(SimulationResult& res, double t) {
    const auto snap = evaluate(x_, nullptr);
    res.t_s.push_back(t);
    std::size_t c = 0;
    res.channels[c++].second.push_back(snap.f_avg_hz);
    for (std::size_t i = 0; i < s_.machines.size(); ++i)
      res.channels[c++].second.push_back(snap.machine_f_hz[i]);
    for (std::size_t i = 0; i < s_.buses.size(); ++i)
      res.channels[c++].second.push_back(snap.bus_v_pu[i]);
    for (std::size_t i = 0; i < s_.hvdc_links.size(); ++i) {
      res.channels[c++].second.push_back(snap.link_p_mw[i]);
      res.channels[c++].second.push_back(snap.link_epc_mw[i]);
    }
    if (s_.hub) {
      res.channels[c++].second.push_back(snap.f_hub_hz);
      for (std::size_t i = 0; i < s_.hub->converters.size(); ++i)
        res.channels[c++].second.push_back(snap.hub_conv_p_mw[i]);
    }
    res.channels[c++].second.push_back(snap.p_fcrd_mw);
    res.channels[c++].second.push_back(snap.p_epc_mw);
    res.channels[c++].second.push_back(snap.p_load_mw);
    res.channels[c++].second.push_back(snap.losses_mw);
  }

  void finish_metrics(SimulationResult& res) {
    std::optional<double> t_event;
    for (const auto& e : s_.events)
      t_event = t_event ? std::min(*t_event, e.t_s) : e.t_s;
    const auto& favg = res.channels[0].second;
    res.metrics = metrics_from_series(res.t_s, favg, s_.targets.f_n, t_event);

    std::size_t imin = 0;
    for (std::size_t i = 0; i < favg.size(); ++i)
      if (favg[i] < favg[imin]) imin = i;
    if (const auto* fcrd = res.channel("system.p_fcrd_mw"))
      res.metrics.fcrd_power_at_nadir_mw = (*fcrd)[imin];
    for (const auto& l : s_.hvdc_links) {
      const auto* epc = res.channel(l.id + ".p_epc_mw");
      double peak = 0.0;
      for (double v : *epc) peak = std::max(peak, v);
      res.metrics.epc_peak_mw.push_back({l.id, peak});
    }
  }

  Scenario s_;
  OperatingPoint op_;
  AdmittanceMatrix ybase_, yaug_;
  std::vector<ZipState> loads_now_;
  std::vector<std::string> load_ids_;
  std::vector<bool> mach_online_, link_online_, hub_online_;
  std::vector<double> x_;
  std::vector<double> e_pu_, p_m0_mw_, gate0_;
  std::vector<Complex> v_;
  std::vector<double> hub_alg_p_;
  std::vector<double> favg_hist_;
  double t_ = 0.0;
  double domega_ref_ = 0.0;
  int mach_off_ = 0, link_off_ = 0, hub_off_ = 0;
  std::set<std::size_t> applied_;
};

/// Runs a validated scenario end to end.
inline SimulationResult run_simulation(const Scenario& s) { return Engine(s).run(); }

/// Metrics recomputed from a result's reported frequency channel.
inline Metrics compute_metrics(const SimulationResult& res, double f_n,
                               std::optional<double> t_event) {
  const auto* f = res.channel("system.f_avg_hz");
  if (!f) throw SolverError("compute_metrics: missing system.f_avg_hz channel");
  return metrics_from_series(res.t_s, *f, f_n, t_event);
}

}  // namespace freqdyn
