#pragma once

#include <algorithm>
#include <vector>

#include "freqdyn/model.hpp"

namespace freqdyn {

/// Emergency power control droop output in MW under the import-support sign
/// convention. Exactly zero at or above the triggering threshold (reset
/// semantics, no hysteresis); below it the correction is proportional to
/// (f_tfl - f) and clamped to the import headroom.
inline double epc_output(double f_hz, const EpcSettings& epc, double p_n_mw,
                         const FrequencyTargets& targets) {
  if (!epc.enabled || f_hz >= targets.f_tfl) return 0.0;
  const double raw = p_n_mw * (targets.f_tfl - f_hz) / (epc.r_pu * targets.f_n);
  return std::clamp(raw, 0.0, epc.headroom_import_mw);
}

/// First-order converter response surrogate: dP/dt = (P_ref - P)/T_c.
inline double converter_dynamics(double p_mw, double p_ref_mw, double t_c_s) {
  return (p_ref_mw - p_mw) / t_c_s;
}

/// HVDC contribution to system stiffness: beta_h = (1/f_n) sum P_Nhi/R_hi
/// over EPC-enabled links. MW per Hz.
inline double aggregate_beta_h(const std::vector<HvdcLinkSpec>& links, double f_n = 50.0) {
  double acc = 0.0;
  for (const auto& l : links)
    if (l.epc.enabled) acc += l.p_n_mw / l.epc.r_pu;
  return acc / f_n;
}

}  // namespace freqdyn
