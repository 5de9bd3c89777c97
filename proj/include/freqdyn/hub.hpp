#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "freqdyn/model.hpp"

namespace freqdyn {

/// Dynamic state of the offshore hub subsystem. Converter powers are
/// injections into the hub island (exports to remote areas are negative).
struct HubState {
  double sc_domega_pu = 0.0;           ///< low-inertia: aggregate SC speed deviation
  std::vector<double> conv_p_mw;       ///< per converter delivered power
  std::vector<bool> conv_online;
  double coord_integrator_pu = 0.0;    ///< pu of the hub converter base
};

struct HubAlgebraicSolution {
  double f_hub_hz = 0.0;
  std::vector<double> p_mw;
  std::vector<bool> saturated;
};

/// Integrator advance rate of the hub coordinator, pu of hub base per second.
inline double coordinator_rate(double f_hub_hz, double k_hc_pu_s, double f_n) {
  return k_hc_pu_s * (f_n - f_hub_hz) / f_n;
}

/// Per-converter setpoint corrections in MW. Participation factors are
/// renormalized over online converters so a tripped link's share redistributes.
inline std::vector<double> coordinator_corrections(const HubSpec& hub, double integrator_pu,
                                                   const std::vector<bool>& online) {
  const double base = hub.converter_base_mw();
  const auto& part = hub.coordinator.participation;
  std::vector<double> out(hub.converters.size(), 0.0);
  double psum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (online.empty() || online[i]) psum += part.empty() ? 1.0 : part[i];
  if (psum <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!online.empty() && !online[i]) continue;
    const double p = part.empty() ? 1.0 : part[i];
    out[i] = p / psum * integrator_pu * base;
  }
  return out;
}

/// Grid-forming droop synchronization: all converter frequencies coincide at
///   f_hub = f_n + f_n * sum(P_set,i - P_i) / sum(P_N,i / R_i)
/// with saturated converters held at their limits and excluded from the sum.
/// setpoints are the effective ones (scheduled + coordinator + EPC terms).
inline HubAlgebraicSolution hub_frequency_zero_inertia(const HubSpec& hub,
                                                       const std::vector<double>& setpoints,
                                                       const std::vector<bool>& online,
                                                       double wpp_mw, double f_n) {
  const std::size_t n = hub.converters.size();
  HubAlgebraicSolution sol;
  sol.p_mw.assign(n, 0.0);
  sol.saturated.assign(n, false);
  std::vector<int> clamp(n, 0);  // -1, 0, +1

  for (std::size_t pass = 0; pass <= n; ++pass) {
    double sum_s = 0.0, sum_k = 0.0, sum_sat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!online[i]) continue;
      if (clamp[i] != 0) {
        sum_sat += clamp[i] * hub.converters[i].limit_mw;
        continue;
      }
      sum_s += setpoints[i];
      sum_k += hub.converters[i].p_n_mw / hub.converters[i].r_pu;
    }
    if (sum_k <= 0.0) {
      std::ostringstream os;
      os << "hub balance infeasible: all converters saturated, surplus "
         << std::fabs(sum_sat + wpp_mw) << " MW";
      throw SolverError(os.str());
    }
    const double domega = (sum_s + sum_sat + wpp_mw) / sum_k;  // pu frequency deviation
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!online[i]) { sol.p_mw[i] = 0.0; continue; }
      if (clamp[i] != 0) {
        sol.p_mw[i] = clamp[i] * hub.converters[i].limit_mw;
        continue;
      }
      const double k = hub.converters[i].p_n_mw / hub.converters[i].r_pu;
      const double p = setpoints[i] - k * domega;
      if (p > hub.converters[i].limit_mw) { clamp[i] = 1; changed = true; }
      else if (p < -hub.converters[i].limit_mw) { clamp[i] = -1; changed = true; }
      else sol.p_mw[i] = p;
    }
    if (!changed) {
      sol.f_hub_hz = f_n * (1.0 + domega);
      for (std::size_t i = 0; i < n; ++i) sol.saturated[i] = clamp[i] != 0;
      return sol;
    }
  }
  throw SolverError("hub zero-inertia saturation loop did not settle");
}

struct HubDerivatives {
  double dsc_domega = 0.0;
  std::vector<double> dconv_p;
  double dintegrator = 0.0;
  double f_hub_hz = 0.0;
};

/// Low-inertia dynamics: the island frequency is the aggregate synchronous
/// condenser speed; grid-following converters track droop + coordinator
/// references through a first-order power response.
inline HubDerivatives hub_dynamics_low_inertia(const HubSpec& hub, const HubState& st,
                                               const std::vector<double>& setpoints,
                                               double wpp_mw, double f_n) {
  const std::size_t n = hub.converters.size();
  HubDerivatives d;
  d.dconv_p.assign(n, 0.0);
  d.f_hub_hz = f_n * (1.0 + st.sc_domega_pu);

  double balance = wpp_mw;
  for (std::size_t i = 0; i < n; ++i)
    if (st.conv_online[i]) balance += st.conv_p_mw[i];

  double ek = 0.0, damp = 0.0;
  for (const auto& c : hub.condensers) {
    ek += c.h_s * c.s_n_mva;
    damp += c.d_pu * c.s_n_mva;
  }
  d.dsc_domega = (balance - damp * st.sc_domega_pu) / (2.0 * ek);

  bool all_saturated = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!st.conv_online[i]) continue;
    const auto& c = hub.converters[i];
    double p_ref = setpoints[i] - c.p_n_mw / c.r_pu * st.sc_domega_pu;
    const double lim = c.limit_mw;
    if (p_ref > -lim && p_ref < lim) all_saturated = false;
    p_ref = std::clamp(p_ref, -lim, lim);
    d.dconv_p[i] = (p_ref - st.conv_p_mw[i]) / c.t_c_s;
  }

  d.dintegrator = coordinator_rate(d.f_hub_hz, hub.coordinator.k_hc_pu_s, f_n);
  if (all_saturated) d.dintegrator = 0.0;  // anti-windup
  return d;
}

}  // namespace freqdyn
