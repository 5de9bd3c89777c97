#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "freqdyn/model.hpp"

namespace freqdyn {

/// Dynamic states of a classical-model synchronous machine.
/// delta is measured in the simulation reference frame; domega is the pu
/// speed deviation from nominal, f = f_n (1 + domega).
struct MachineState {
  double delta_rad = 0.0;
  double domega_pu = 0.0;
  double e_pu = 0.0;  ///< constant EMF magnitude behind x'd
};

struct SwingDerivatives {
  double ddelta = 0.0;
  double ddomega = 0.0;
};

/// Classical swing equation on the machine base:
///   d(delta)/dt = w_n * domega,  d(domega)/dt = (Pm - Pe - D*domega)/(2H)
inline SwingDerivatives swing_derivatives(const MachineState& st, double p_m_pu,
                                          double p_e_pu, const MachineSpec& spec,
                                          double f_n = 50.0) {
  SwingDerivatives d;
  d.ddelta = 2.0 * std::numbers::pi * f_n * st.domega_pu;
  d.ddomega = (p_m_pu - p_e_pu - spec.d_pu * st.domega_pu) / (2.0 * spec.h_s);
  return d;
}

/// Hydro governor states. The droop path is
///   e -> 1/R -> (1 + Tr s)/(1 + (rt/R) Tr s) -> 1/(1 + Tg s) -> turbine
/// with the non-minimum-phase turbine (1 - Tw s)/(1 + 0.5 Tw s).
/// All signals are deviations in pu of the machine nominal power.
struct GovernorState {
  double x_comp = 0.0;  ///< transient-droop compensator state
  double gate = 0.0;    ///< gate deviation from the initial opening
  double x_turb = 0.0;  ///< turbine water-column state
};

struct GovernorDerivatives {
  double dx_comp = 0.0;
  double dgate = 0.0;
  double dx_turb = 0.0;
  double p_m_dev_pu = 0.0;  ///< mechanical power deviation, pu of P_N
};

/// One-sided FCR-D response: the input error is max(0, f_fcrd - f)/f_n, so the
/// governor acts only below the activation threshold and never withdraws
/// power above it. gate0 is the initial gate opening in pu of P_N.
inline GovernorDerivatives governor_derivatives(const GovernorState& st, double f_hz,
                                                const FrequencyTargets& targets,
                                                const GovernorSpec& g, double gate0) {
  GovernorDerivatives d;
  if (!g.enabled) return d;

  const double err = std::max(0.0, targets.f_fcrd - f_hz) / targets.f_n;
  const double u0 = err / g.r_pu;

  double y1 = u0;
  if (g.rt_pu > 0.0 && g.tr_s > 0.0) {
    const double alpha = g.rt_pu / g.r_pu;
    d.dx_comp = (u0 - st.x_comp) / (alpha * g.tr_s);
    y1 = u0 / alpha + (1.0 - 1.0 / alpha) * st.x_comp;
  }

  double dgate = (y1 - st.gate) / g.tg_s;
  dgate = std::clamp(dgate, -g.rate_limit_pu_s, g.rate_limit_pu_s);
  const double gate_abs = gate0 + st.gate;
  if (gate_abs >= g.gate_max && dgate > 0.0) dgate = 0.0;
  if (gate_abs <= g.gate_min && dgate < 0.0) dgate = 0.0;
  d.dgate = dgate;

  // The turbine sees the physical gate, hard-limited at the stops.
  const double gate_eff = std::clamp(gate_abs, g.gate_min, g.gate_max) - gate0;
  // (1 - Tw s)/(1 + 0.5 Tw s) = -2 + 3 / (1 + 0.5 Tw s)
  d.dx_turb = (gate_eff - st.x_turb) / (0.5 * g.tw_s);
  d.p_m_dev_pu = 3.0 * st.x_turb - 2.0 * gate_eff;
  return d;
}

/// Steady-state power deviation of the governor at a held frequency, pu of P_N.
inline double governor_steady_state_pu(double f_hz, const FrequencyTargets& targets,
                                       const GovernorSpec& g) {
  if (!g.enabled) return 0.0;
  return std::max(0.0, targets.f_fcrd - f_hz) / (targets.f_n * g.r_pu);
}

/// Generator contribution to system stiffness: beta_g = (1/f_n) sum P_Ngi/R_gi
/// over FCR-D providers (governor enabled). MW per Hz.
inline double aggregate_beta_g(const std::vector<MachineSpec>& machines, double f_n = 50.0) {
  double acc = 0.0;
  for (const auto& m : machines)
    if (m.governor.enabled) acc += m.s_n_mva / m.governor.r_pu;
  return acc / f_n;
}

}  // namespace freqdyn
