#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqdyn/hvdc.hpp"
#include "freqdyn/machines.hpp"
#include "freqdyn/model.hpp"

namespace freqdyn {

/// Steady-state frequency deviation after a disturbance, from the activation
/// thresholds and the generator/HVDC stiffnesses:
///   df = -[dP + (f_n - f_fcrd) beta_g + (f_n - f_tfl) beta_h] / (beta_g + beta_h)
/// Valid only when the frequency settles below every active threshold; the
/// flags report which assumption fails.
struct SteadyStateDeviation {
  double df_hz = 0.0;
  bool valid = true;
  bool below_fcrd = true;  ///< settles below the FCR-D threshold (needed if beta_g > 0)
  bool below_tfl = true;   ///< settles below the EPC threshold (needed if beta_h > 0)
};

inline SteadyStateDeviation steady_state_deviation(double dp_dis_mw, double beta_g,
                                                   double beta_h,
                                                   const FrequencyTargets& t) {
  SteadyStateDeviation r;
  const double denom = beta_g + beta_h;
  if (denom <= 0.0) {
    r.valid = false;
    r.df_hz = -std::numeric_limits<double>::infinity();
    return r;
  }
  r.df_hz = -(dp_dis_mw + (t.f_n - t.f_fcrd) * beta_g + (t.f_n - t.f_tfl) * beta_h) / denom;
  r.df_hz += 0.0;  // normalize -0
  const double f_ss = t.f_n + r.df_hz;
  r.below_fcrd = beta_g <= 0.0 || f_ss <= t.f_fcrd;
  r.below_tfl = beta_h <= 0.0 || f_ss <= t.f_tfl;
  r.valid = r.below_fcrd && r.below_tfl;
  return r;
}

/// Smallest HVDC stiffness achieving a steady-state deviation of df_target
/// (negative Hz). raw may be negative when the generator fleet alone already
/// meets the target; beta_h is the clamped, usable value.
struct RequiredBetaH {
  double beta_h = 0.0;
  double raw = 0.0;
  bool feasible = true;
  double margin = 0.0;  ///< |df_target| - (f_n - f_tfl); must be > 0 for solvability
};

inline RequiredBetaH required_beta_h(double dp_dis_mw, double beta_g, double df_target_hz,
                                     const FrequencyTargets& t) {
  RequiredBetaH r;
  const double d = std::fabs(df_target_hz);
  const double a = t.f_n - t.f_fcrd;
  const double b = t.f_n - t.f_tfl;
  r.margin = d - b;
  if (r.margin <= 0.0) {
    // EPC settles (f_tfl - f_ss)/R worth of power only below f_tfl; a target
    // deviation shallower than f_n - f_tfl cannot be enforced by EPC.
    r.feasible = false;
    return r;
  }
  r.raw = (dp_dis_mw + (a - d) * beta_g) / r.margin;
  r.beta_h = std::max(0.0, r.raw);
  return r;
}

/// Aggregate single-machine-equivalent model: one kinetic-energy buffer, one
/// representative FCR-D governor scaled to beta_g, EPC links with first-order
/// converter response.
struct SmibLink {
  std::string id;
  double p_n_mw = 0.0;
  double r_pu = 0.33;
  double headroom_mw = 0.0;
  double t_c_s = 0.1;
};

struct SmibProblem {
  double e_k_mws = 125000.0;
  double dp_dis_mw = 1450.0;
  double beta_g_mw_per_hz = 3648.0;
  GovernorSpec governor{.enabled = true};  ///< representative FCR-D dynamics
  std::vector<SmibLink> links;
  FrequencyTargets targets;
  double f_start_hz = 0.0;  ///< 0 = start at the FCR-D threshold
  double horizon_s = 60.0;
  double dt_s = 0.01;
};

struct SmibResult {
  std::vector<double> t_s;
  std::vector<double> f_hz;
  double nadir_hz = 0.0;
  double t_nadir_s = 0.0;
  double df_ss_hz = 0.0;      ///< mean over the final 5 s, minus f_n
  bool any_clamp = false;     ///< some link hit its headroom during the run
};

/// Integrates df/dt = f_n (dPm + dPepc - dP_dis)/(2 E_k) with the hydro
/// governor and EPC blocks, RK4 fixed step.
inline SmibResult smib_simulate(const SmibProblem& pb) {
  const auto& t = pb.targets;
  const double f0 = pb.f_start_hz > 0.0 ? pb.f_start_hz : t.f_fcrd;
  // Representative governor rated power such that P_N/(R f_n) = beta_g.
  const double p_n_gov = pb.beta_g_mw_per_hz * t.f_n * pb.governor.r_pu;

  const std::size_t nl = pb.links.size();
  // State: [f, gov.x_comp, gov.gate, gov.x_turb, link powers...]
  std::vector<double> x(4 + nl, 0.0);
  x[0] = f0;

  SmibResult out;
  GovernorSpec gov = pb.governor;
  gov.enabled = pb.beta_g_mw_per_hz > 0.0;
  gov.gate_min = -1e9;  // fleet aggregate: headroom not modeled here
  gov.gate_max = 1e9;
  gov.rate_limit_pu_s = 1e9;

  auto deriv = [&](const std::vector<double>& xx, std::vector<double>& dxx) {
    const double f = xx[0];
    GovernorState gs{xx[1], xx[2], xx[3]};
    const auto gd = governor_derivatives(gs, f, t, gov, 0.0);
    const double dpm = gov.enabled ? gd.p_m_dev_pu * p_n_gov : 0.0;
    double depc = 0.0;
    for (std::size_t i = 0; i < nl; ++i) {
      const auto& l = pb.links[i];
      EpcSettings epc;
      epc.enabled = true;
      epc.r_pu = l.r_pu;
      epc.headroom_import_mw = l.headroom_mw;
      const double ref = epc_output(f, epc, l.p_n_mw, t);
      if (ref >= l.headroom_mw - 1e-12 && ref > 0.0) out.any_clamp = true;
      dxx[4 + i] = converter_dynamics(xx[4 + i], ref, l.t_c_s);
      depc += xx[4 + i];
    }
    dxx[0] = t.f_n * (dpm + depc - pb.dp_dis_mw) / (2.0 * pb.e_k_mws);
    dxx[1] = gd.dx_comp;
    dxx[2] = gd.dgate;
    dxx[3] = gd.dx_turb;
  };

  const long nsteps = std::lround(pb.horizon_s / pb.dt_s);
  out.t_s.reserve(nsteps + 1);
  out.f_hz.reserve(nsteps + 1);
  std::vector<double> k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()),
      xs(x.size());
  for (long k = 0; k <= nsteps; ++k) {
    out.t_s.push_back(static_cast<double>(k) * pb.dt_s);
    out.f_hz.push_back(x[0]);
    if (k == nsteps) break;
    deriv(x, k1);
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + 0.5 * pb.dt_s * k1[i];
    deriv(xs, k2);
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + 0.5 * pb.dt_s * k2[i];
    deriv(xs, k3);
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + pb.dt_s * k3[i];
    deriv(xs, k4);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] += pb.dt_s / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  std::size_t imin = 0;
  for (std::size_t i = 0; i < out.f_hz.size(); ++i)
    if (out.f_hz[i] < out.f_hz[imin]) imin = i;
  out.nadir_hz = out.f_hz[imin];
  out.t_nadir_s = out.t_s[imin];
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < out.t_s.size(); ++i)
    if (out.t_s[i] >= out.t_s.back() - 5.0 - 1e-9) { acc += out.f_hz[i]; ++cnt; }
  out.df_ss_hz = acc / static_cast<double>(cnt) - t.f_n;
  return out;
}

class TuningError : public std::runtime_error {
 public:
  explicit TuningError(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative per-link droop allocation: start from equal pu droops matching
/// the stiffness target; links whose correction at the worst expected
/// deviation would exceed their headroom are clamped to headroom/df_worst and
/// the stiffness shortfall is redistributed over the unclamped links.
struct DroopAllocation {
  std::vector<double> r_pu;         ///< per link, order of the input list
  std::vector<bool> clamped;
  double achieved_beta_h = 0.0;     ///< with clamps evaluated at df_worst
  int iterations = 0;
};

inline DroopAllocation allocate_droops(double beta_h_target, std::vector<SmibLink> links,
                                       double df_worst_hz, double f_n = 50.0) {
  DroopAllocation out;
  const std::size_t n = links.size();
  out.r_pu.assign(n, 0.0);
  out.clamped.assign(n, false);
  if (beta_h_target <= 0.0) {
    out.r_pu.assign(n, std::numeric_limits<double>::infinity());
    return out;
  }
  double headroom_total = 0.0;
  for (const auto& l : links) headroom_total += l.headroom_mw;
  if (headroom_total < beta_h_target * df_worst_hz) {
    std::ostringstream os;
    os << "droop allocation infeasible: capacity shortfall "
       << beta_h_target - headroom_total / df_worst_hz << " MW/Hz at df_worst "
       << df_worst_hz << " Hz";
    throw TuningError(os.str());
  }

  std::vector<double> k(n, 0.0);  // per-link stiffness MW/Hz
  for (int pass = 0; pass <= static_cast<int>(n); ++pass) {
    out.iterations = pass + 1;
    double p_n_free = 0.0, k_clamped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.clamped[i]) k_clamped += k[i];
      else p_n_free += links[i].p_n_mw;
    }
    const double k_needed = beta_h_target - k_clamped;
    if (p_n_free <= 0.0 || k_needed <= 0.0) break;
    const double r_uniform = p_n_free / (f_n * k_needed);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.clamped[i]) continue;
      k[i] = links[i].p_n_mw / (r_uniform * f_n);
      if (k[i] * df_worst_hz > links[i].headroom_mw + 1e-12) {
        k[i] = links[i].headroom_mw / df_worst_hz;
        out.clamped[i] = true;
        changed = true;
      } else {
        out.r_pu[i] = r_uniform;
      }
    }
    if (!changed) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.clamped[i]) out.r_pu[i] = links[i].p_n_mw / (f_n * k[i]);
    out.achieved_beta_h += k[i];
  }
  return out;
}

enum class TuningMode { Complement, Replacement };

struct TuningProblem {
  double e_k_mws = 125000.0;
  double dp_dis_mw = 1450.0;
  double beta_g_mw_per_hz = 3648.0;
  GovernorSpec governor{.enabled = true};
  std::vector<SmibLink> links;
  FrequencyTargets targets;
  TuningMode mode = TuningMode::Complement;
  double df_worst_hz = 1.0;  ///< worst admissible excursion for headroom clamping
  double horizon_s = 60.0;
  double dt_s = 0.01;
  double bisect_tol_mw_per_hz = 1.0;
};

struct TuningResult {
  bool feasible = true;
  double beta_h_mw_per_hz = 0.0;
  std::vector<std::pair<std::string, double>> droops;  ///< link id -> R_hi
  double achieved_beta_h = 0.0;
  double predicted_nadir_hz = 0.0;
  double predicted_df_ss_hz = 0.0;
  std::vector<std::string> log;
  std::string infeasibility;
};

namespace tuning_detail {

inline SmibProblem smib_for(const TuningProblem& pb, double beta_h) {
  SmibProblem sp;
  sp.e_k_mws = pb.e_k_mws;
  sp.dp_dis_mw = pb.dp_dis_mw;
  sp.beta_g_mw_per_hz = pb.beta_g_mw_per_hz;
  sp.governor = pb.governor;
  sp.targets = pb.targets;
  sp.horizon_s = pb.horizon_s;
  sp.dt_s = pb.dt_s;
  if (beta_h > 0.0 && !pb.links.empty()) {
    // Aggregate equivalent link at the probe stiffness.
    SmibLink agg;
    agg.id = "aggregate";
    double hr = 0.0, t_c = 0.0;
    for (const auto& l : pb.links) {
      agg.p_n_mw += l.p_n_mw;
      hr += l.headroom_mw;
      t_c += l.t_c_s * l.p_n_mw;
    }
    agg.headroom_mw = hr;
    agg.t_c_s = t_c / agg.p_n_mw;
    agg.r_pu = agg.p_n_mw / (pb.targets.f_n * beta_h);
    sp.links.push_back(agg);
  }
  return sp;
}

}  // namespace tuning_detail

/// Droop determination: (1) find the stiffness beta_h meeting the mode's
/// condition on the single-machine equivalent (complement: nadir above the
/// lowest allowed frequency; replacement: closed-form steady-state target),
/// (2) allocate per-link droops under headroom constraints.
inline TuningResult tune_epc(const TuningProblem& pb) {
  using tuning_detail::smib_for;
  TuningResult out;
  std::ostringstream log;

  double beta_h = 0.0;
  if (pb.mode == TuningMode::Complement) {
    auto base = smib_simulate(smib_for(pb, 0.0));
    out.log.push_back("condition 1: nadir >= " + std::to_string(pb.targets.f_min) + " Hz");
    out.log.push_back("beta_h 0: nadir " + std::to_string(base.nadir_hz) + " Hz");
    if (base.nadir_hz >= pb.targets.f_min) {
      beta_h = 0.0;
      out.log.push_back("generator fleet alone satisfies condition 1");
    } else {
      double lo = 0.0, hi = 500.0;
      for (; hi < 2e6; hi *= 2.0) {
        auto probe = smib_simulate(smib_for(pb, hi));
        out.log.push_back("beta_h " + std::to_string(hi) + ": nadir " +
                          std::to_string(probe.nadir_hz) + " Hz");
        if (probe.nadir_hz >= pb.targets.f_min) break;
        lo = hi;
      }
      if (hi >= 2e6) {
        out.feasible = false;
        out.infeasibility = "nadir condition unattainable for any beta_h up to 2e6 MW/Hz";
        return out;
      }
      while (hi - lo > pb.bisect_tol_mw_per_hz) {
        const double mid = 0.5 * (lo + hi);
        auto probe = smib_simulate(smib_for(pb, mid));
        (probe.nadir_hz >= pb.targets.f_min ? hi : lo) = mid;
      }
      beta_h = hi;
      out.log.push_back("bisection settled at beta_h " + std::to_string(beta_h) + " MW/Hz");
    }
  } else {
    const auto req = required_beta_h(pb.dp_dis_mw, pb.beta_g_mw_per_hz,
                                     -pb.targets.df_ss_max, pb.targets);
    out.log.push_back("condition 2: |df_ss| <= " + std::to_string(pb.targets.df_ss_max) +
                      " Hz");
    if (!req.feasible) {
      out.feasible = false;
      out.infeasibility = "steady-state target unreachable: margin " +
                          std::to_string(req.margin) + " Hz must be positive";
      return out;
    }
    beta_h = req.beta_h;
    out.log.push_back("closed-form beta_h " + std::to_string(req.raw) + " MW/Hz" +
                      (req.raw < 0.0 ? " (clamped to 0)" : ""));
  }
  out.beta_h_mw_per_hz = beta_h;

  if (beta_h <= 0.0) {
    out.predicted_nadir_hz = smib_simulate(smib_for(pb, 0.0)).nadir_hz;
    const auto ss = steady_state_deviation(pb.dp_dis_mw, pb.beta_g_mw_per_hz, 0.0,
                                           pb.targets);
    out.predicted_df_ss_hz = ss.df_hz;
    return out;  // empty droop set
  }

  DroopAllocation alloc;
  try {
    alloc = allocate_droops(beta_h, pb.links, pb.df_worst_hz, pb.targets.f_n);
  } catch (const TuningError& e) {
    out.feasible = false;
    out.infeasibility = e.what();
    return out;
  }
  out.achieved_beta_h = alloc.achieved_beta_h;
  for (std::size_t i = 0; i < pb.links.size(); ++i)
    out.droops.push_back({pb.links[i].id, alloc.r_pu[i]});
  out.log.push_back("allocation: " + std::to_string(alloc.iterations) + " iterations, " +
                    std::to_string(alloc.achieved_beta_h) + " MW/Hz achieved");

  SmibProblem verify = smib_for(pb, 0.0);
  for (std::size_t i = 0; i < pb.links.size(); ++i) {
    SmibLink l = pb.links[i];
    l.r_pu = alloc.r_pu[i];
    verify.links.push_back(l);
  }
  const auto run = smib_simulate(verify);
  out.predicted_nadir_hz = run.nadir_hz;
  out.predicted_df_ss_hz = run.df_ss_hz;
  return out;
}

/// Scales all droops by a common factor until the mode's condition holds on a
/// caller-provided evaluation of the full multi-machine scenario. check()
/// receives candidate droops and returns the measured condition value
/// (nadir for complement, df_ss for replacement).
template <typename CheckFn>
inline TuningResult refine_with_multimachine(TuningResult first, const TuningProblem& pb,
                                             CheckFn&& check, int max_iter = 8) {
  if (!first.feasible || first.droops.empty()) return first;
  double scale = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::pair<std::string, double>> scaled = first.droops;
    for (auto& [id, r] : scaled) r *= scale;
    const double value = check(scaled);
    const bool ok = pb.mode == TuningMode::Complement
                        ? value >= pb.targets.f_min
                        : value >= -pb.targets.df_ss_max;
    first.log.push_back("multi-machine check, scale " + std::to_string(scale) + ": " +
                        std::to_string(value) + (ok ? " ok" : " violated"));
    if (ok) {
      first.droops = std::move(scaled);
      first.achieved_beta_h /= scale;
      return first;
    }
    scale *= 0.85;  // stiffen uniformly
  }
  first.feasible = false;
  first.infeasibility = "multi-machine refinement did not converge";
  return first;
}

// ---------------------------------------------------------------------------
// Problem/result serialization for the command-line front end.

inline TuningProblem tuning_problem_from_json(const nlohmann::json& j) {
  TuningProblem pb;
  pb.e_k_mws = j.value("e_k_mws", pb.e_k_mws);
  pb.dp_dis_mw = j.value("dp_dis_mw", pb.dp_dis_mw);
  pb.beta_g_mw_per_hz = j.value("beta_g_mw_per_hz", pb.beta_g_mw_per_hz);
  if (auto it = j.find("governor"); it != j.end()) {
    pb.governor.r_pu = it->value("r_pu", pb.governor.r_pu);
    pb.governor.rt_pu = it->value("rt_pu", pb.governor.rt_pu);
    pb.governor.tr_s = it->value("tr_s", pb.governor.tr_s);
    pb.governor.tg_s = it->value("tg_s", pb.governor.tg_s);
    pb.governor.tw_s = it->value("tw_s", pb.governor.tw_s);
  }
  pb.governor.enabled = true;
  if (auto it = j.find("targets"); it != j.end()) {
    pb.targets.f_n = it->value("f_n", pb.targets.f_n);
    pb.targets.f_fcrd = it->value("f_fcrd", pb.targets.f_fcrd);
    pb.targets.f_tfl = it->value("f_tfl", pb.targets.f_tfl);
    pb.targets.f_min = it->value("f_min", pb.targets.f_min);
    pb.targets.f_shed = it->value("f_shed", pb.targets.f_shed);
    pb.targets.df_ss_max = it->value("df_ss_max", pb.targets.df_ss_max);
  }
  if (auto it = j.find("links"); it != j.end())
    for (const auto& lj : *it) {
      SmibLink l;
      l.id = lj.value("id", "link" + std::to_string(pb.links.size()));
      l.p_n_mw = lj.value("p_n_mw", 0.0);
      l.headroom_mw = lj.value("headroom_mw", l.p_n_mw);
      l.t_c_s = lj.value("t_c_s", 0.1);
      pb.links.push_back(std::move(l));
    }
  const std::string mode = j.value("mode", "complement");
  if (mode == "complement") pb.mode = TuningMode::Complement;
  else if (mode == "replacement") pb.mode = TuningMode::Replacement;
  else throw TuningError("unknown tuning mode \"" + mode + "\"");
  pb.df_worst_hz = j.value("df_worst_hz", pb.df_worst_hz);
  pb.horizon_s = j.value("horizon_s", pb.horizon_s);
  pb.dt_s = j.value("dt_s", pb.dt_s);
  return pb;
}

inline nlohmann::json tuning_result_to_json(const TuningResult& r) {
  nlohmann::json j;
  j["feasible"] = r.feasible;
  j["beta_h_mw_per_hz"] = r.beta_h_mw_per_hz;
  j["achieved_beta_h_mw_per_hz"] = r.achieved_beta_h;
  j["predicted_nadir_hz"] = r.predicted_nadir_hz;
  j["predicted_df_ss_hz"] = r.predicted_df_ss_hz;
  nlohmann::json droops = nlohmann::json::object();
  for (const auto& [id, v] : r.droops) droops[id] = v;
  j["droops"] = droops;
  j["iterations"] = r.log;
  if (!r.feasible) j["infeasibility"] = r.infeasibility;
  return j;
}

}  // namespace freqdyn
