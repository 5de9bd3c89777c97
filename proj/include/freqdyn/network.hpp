#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "freqdyn/linalg.hpp"
#include "freqdyn/model.hpp"

namespace freqdyn {

using Complex = std::complex<double>;

/// Bus admittance matrix in pu on the system base. Entries are kept sparse
/// for inspection/dumps; factorization densifies (desk-scale networks).
class AdmittanceMatrix {
 public:
  AdmittanceMatrix() = default;
  explicit AdmittanceMatrix(std::size_t n) : n_(n) {}

  std::size_t size() const { return n_; }

  void add(std::size_t i, std::size_t j, Complex y) {
    if (y == Complex{}) return;
    entries_[{i, j}] += y;
  }

  Complex at(std::size_t i, std::size_t j) const {
    auto it = entries_.find({i, j});
    return it == entries_.end() ? Complex{} : it->second;
  }

  const std::map<std::pair<std::size_t, std::size_t>, Complex>& entries() const {
    return entries_;
  }

  linalg::ComplexMatrix dense() const {
    linalg::ComplexMatrix m(n_, n_);
    for (const auto& [ij, y] : entries_) m(ij.first, ij.second) += y;
    return m;
  }

  /// y_row = (Y v)_i
  Complex multiply_row(std::size_t i, const std::vector<Complex>& v) const {
    Complex acc{};
    auto it = entries_.lower_bound({i, 0});
    for (; it != entries_.end() && it->first.first == i; ++it)
      acc += it->second * v[it->first.second];
    return acc;
  }

  std::string coordinate_dump() const {
    std::ostringstream os;
    os << "# i j G B  (" << n_ << " buses)\n";
    for (const auto& [ij, y] : entries_) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g\n", ij.first, ij.second,
                    y.real(), y.imag());
      os << buf;
    }
    return os.str();
  }

 private:
  std::size_t n_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, Complex> entries_;
};

/// Pi-equivalent branch stamping with an off-nominal ratio on the "from" side.
inline AdmittanceMatrix build_admittance(const Scenario& s) {
  AdmittanceMatrix y(s.buses.size());
  for (const auto& br : s.branches) {
    const int f = s.bus_index(br.from);
    const int t = s.bus_index(br.to);
    if (f < 0 || t < 0) throw ScenarioError("branch " + br.id + " references unknown bus");
    const Complex zs(br.r_pu, br.x_pu);
    const Complex ys = 1.0 / zs;
    const Complex ysh(0.0, br.b_pu / 2.0);
    const double a = br.ratio;
    y.add(f, f, (ys + ysh) / (a * a));
    y.add(f, t, -ys / a);
    y.add(t, f, -ys / a);
    y.add(t, t, ys + ysh);
  }
  return y;
}

struct MachineInit {
  double e_pu = 0.0;       ///< internal EMF magnitude behind x'd, system pu
  double delta_rad = 0.0;  ///< rotor angle
  double p_mw = 0.0;       ///< electrical (= mechanical, pre-disturbance) power
  double q_mvar = 0.0;
};

/// Solved initial operating point: satisfies the pre-disturbance power
/// balance (generation + link imports = load + losses) to Newton tolerance.
struct OperatingPoint {
  std::vector<Complex> v;  ///< bus voltage phasors, pu
  std::vector<MachineInit> machines;
  std::vector<double> link_p_mw;
  std::vector<std::pair<double, double>> load_pq_mw;  ///< at solved voltage
  double total_gen_mw = 0.0;   ///< synchronous machine output
  double total_load_mw = 0.0;
  double losses_mw = 0.0;
  double hvdc_net_import_mw = 0.0;
  double hub_nps_injection_mw = 0.0;
  int iterations = 0;
};

namespace net_detail {

/// Current drawn by an injection S(Vm) = P(Vm) + jQ(Vm) at voltage V,
/// I = conj(S)/conj(V), together with its rectangular-coordinate Jacobian.
struct CurrentJac {
  double ir = 0.0, ii = 0.0;
  double dir_dvr = 0.0, dir_dvi = 0.0, dii_dvr = 0.0, dii_dvi = 0.0;
};

inline CurrentJac injection_current(double p, double q, double dp_dvm, double dq_dvm,
                                    Complex v) {
  CurrentJac c;
  const double vr = v.real(), vi = v.imag();
  const double vm2 = vr * vr + vi * vi;
  const double vm = std::sqrt(vm2);
  if (vm < 1e-9) return c;  // degenerate; Newton damping handles recovery
  c.ir = (p * vr + q * vi) / vm2;
  c.ii = (p * vi - q * vr) / vm2;
  const double dvm_dvr = vr / vm, dvm_dvi = vi / vm;
  // d/dVr[(P Vr + Q Vi)/Vm^2]
  c.dir_dvr = (dp_dvm * dvm_dvr * vr + p + dq_dvm * dvm_dvr * vi) / vm2 -
              2.0 * vr * (p * vr + q * vi) / (vm2 * vm2);
  c.dir_dvi = (dp_dvm * dvm_dvi * vr + dq_dvm * dvm_dvi * vi + q) / vm2 -
              2.0 * vi * (p * vr + q * vi) / (vm2 * vm2);
  c.dii_dvr = (dp_dvm * dvm_dvr * vi - dq_dvm * dvm_dvr * vr - q) / vm2 -
              2.0 * vr * (p * vi - q * vr) / (vm2 * vm2);
  c.dii_dvi = (dp_dvm * dvm_dvi * vi + p - dq_dvm * dvm_dvi * vr) / vm2 -
              2.0 * vi * (p * vi - q * vr) / (vm2 * vm2);
  return c;
}

}  // namespace net_detail

/// One PQ-style device as seen by the algebraic network solve.
struct PqInjection {
  int bus = -1;
  double p_mw = 0.0;
  double q_mvar = 0.0;
};

/// ZIP load evaluated against the solve; p0/q0 may differ from the scenario
/// after load-step events.
struct ZipState {
  int bus = -1;
  double p0_mw = 0.0;
  double q0_mvar = 0.0;
  ZipCoefficients zip;
};

/// Norton equivalent of a classical-model machine: shunt 1/(j x'd_sys) folded
/// into the augmented Y, current E'/ (j x'd_sys) supplied per solve.
struct NortonSource {
  int bus = -1;
  Complex admittance;
  Complex current;
};

struct NetworkStepResult {
  std::vector<Complex> v;
  int iterations = 0;
  double residual = 0.0;
  int worst_bus = -1;
};

/// Solves the algebraic network I(V) = Y_aug V for bus voltages, warm-started
/// from the previous step. Throws SolverError on non-convergence.
inline NetworkStepResult solve_network_step(const AdmittanceMatrix& y_aug,
                                            const std::vector<NortonSource>& sources,
                                            const std::vector<PqInjection>& injections,
                                            const std::vector<ZipState>& loads,
                                            std::vector<Complex> v, double base_mva,
                                            double tol, int max_iter) {
  using net_detail::injection_current;
  const std::size_t n = y_aug.size();

  auto residual = [&](const std::vector<Complex>& vv, std::vector<double>* f) {
    double worst = 0.0;
    int worst_bus = -1;
    if (f) f->assign(2 * n, 0.0);
    std::vector<Complex> yv(n);
    for (std::size_t i = 0; i < n; ++i) yv[i] = y_aug.multiply_row(i, vv);
    for (const auto& src : sources) yv[src.bus] -= src.current;
    for (const auto& inj : injections) {
      const auto c = injection_current(inj.p_mw / base_mva, inj.q_mvar / base_mva, 0.0,
                                       0.0, vv[inj.bus]);
      yv[inj.bus] -= Complex(c.ir, c.ii);
    }
    for (const auto& ld : loads) {
      const double vm = std::abs(vv[ld.bus]);
      const double p = ld.p0_mw / base_mva * ld.zip.factor(vm);
      const double q = ld.q0_mvar / base_mva * ld.zip.factor(vm);
      const auto c = injection_current(p, q, 0.0, 0.0, vv[ld.bus]);
      yv[ld.bus] += Complex(c.ir, c.ii);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (f) {
        (*f)[i] = yv[i].real();
        (*f)[n + i] = yv[i].imag();
      }
      const double m = std::abs(yv[i]);
      if (m > worst) { worst = m; worst_bus = static_cast<int>(i); }
    }
    return std::pair{worst, worst_bus};
  };

  std::vector<double> f;
  auto [norm, worst_bus] = residual(v, &f);
  int iter = 0;
  while (norm > tol) {
    if (iter >= max_iter) {
      std::ostringstream os;
      os << "network solve did not converge: residual " << norm << " pu at bus index "
         << worst_bus << " after " << iter << " iterations";
      throw SolverError(os.str());
    }
    // Assemble the 2n x 2n real Jacobian dF/d[Vr;Vi].
    linalg::RealMatrix jac(2 * n, 2 * n, 0.0);
    const auto ydense = y_aug.dense();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const Complex yy = ydense(i, k);
        jac(i, k) += yy.real();
        jac(i, n + k) += -yy.imag();
        jac(n + i, k) += yy.imag();
        jac(n + i, n + k) += yy.real();
      }
    for (const auto& inj : injections) {
      const auto c = injection_current(inj.p_mw / base_mva, inj.q_mvar / base_mva, 0.0,
                                       0.0, v[inj.bus]);
      const std::size_t b = inj.bus;
      jac(b, b) -= c.dir_dvr;
      jac(b, n + b) -= c.dir_dvi;
      jac(n + b, b) -= c.dii_dvr;
      jac(n + b, n + b) -= c.dii_dvi;
    }
    for (const auto& ld : loads) {
      const double vm = std::abs(v[ld.bus]);
      const double fac = ld.zip.factor(vm), dfac = ld.zip.dfactor_dv(vm);
      const auto c = injection_current(ld.p0_mw / base_mva * fac, ld.q0_mvar / base_mva * fac,
                                       ld.p0_mw / base_mva * dfac,
                                       ld.q0_mvar / base_mva * dfac, v[ld.bus]);
      const std::size_t b = ld.bus;
      jac(b, b) += c.dir_dvr;
      jac(b, n + b) += c.dir_dvi;
      jac(n + b, b) += c.dii_dvr;
      jac(n + b, n + b) += c.dii_dvi;
    }
    linalg::Lu<double> lu(std::move(jac));
    if (lu.singular()) throw SolverError("network Jacobian singular");
    for (auto& fv : f) fv = -fv;
    const auto dx = lu.solve(f);

    double alpha = 1.0;
    while (true) {
      std::vector<Complex> vtrial(n);
      for (std::size_t i = 0; i < n; ++i)
        vtrial[i] = v[i] + alpha * Complex(dx[i], dx[n + i]);
      auto [ntrial, wb] = residual(vtrial, nullptr);
      if (ntrial < norm || alpha < 1e-6) {
        if (alpha < 1e-6)
          throw SolverError("network solve stalled (step below 1e-6), suspected voltage collapse");
        v = std::move(vtrial);
        break;
      }
      alpha *= 0.5;
    }
    std::tie(norm, worst_bus) = residual(v, &f);
    ++iter;
  }
  return {std::move(v), iter, norm, worst_bus};
}

/// Newton-Raphson AC power flow in polar coordinates. Machines hold their bus
/// voltage (PV) at the bus v_set; the slack machine balances the system.
/// ZIP loads contribute voltage-dependent terms to both mismatch and Jacobian.
inline OperatingPoint solve_power_flow(const Scenario& s) {
  const std::size_t n = s.buses.size();
  if (n == 0) throw ScenarioError("power flow: scenario has no buses");
  const double base = s.base_power_mva;
  const AdmittanceMatrix yb = build_admittance(s);
  const auto y = yb.dense();

  int slack = -1;
  for (std::size_t i = 0; i < n; ++i)
    if (s.buses[i].slack) slack = static_cast<int>(i);
  if (slack < 0) throw ScenarioError("power flow: no slack bus designated");

  std::vector<bool> is_pv(n, false);
  for (const auto& m : s.machines) is_pv[s.bus_index(m.bus)] = true;

  // Constant PQ injections (MW) per bus: links and the hub nps terminal.
  std::vector<double> inj_p(n, 0.0), inj_q(n, 0.0);
  for (const auto& h : s.hvdc_links) {
    inj_p[s.bus_index(h.bus)] += h.p0_mw;
    inj_q[s.bus_index(h.bus)] += h.q0_mvar;
  }
  double hub_nps = 0.0;
  if (s.hub && !s.hub->nps_bus.empty()) {
    for (const auto& c : s.hub->converters)
      if (c.area == "nps") hub_nps -= c.p_set_mw;  // hub import = onshore export
    inj_p[s.bus_index(s.hub->nps_bus)] += hub_nps;
  }
  std::vector<double> mach_p(n, 0.0);
  for (const auto& m : s.machines)
    if (s.bus_index(m.bus) != slack) mach_p[s.bus_index(m.bus)] += m.p0_mw;

  auto load_pq = [&](std::size_t bus, double vm) {
    double p = 0.0, q = 0.0;
    for (const auto& l : s.loads)
      if (s.bus_index(l.bus) == static_cast<int>(bus)) {
        p += l.p0_mw * l.zip.factor(vm);
        q += l.q0_mvar * l.zip.factor(vm);
      }
    return std::pair{p, q};
  };
  // Flat start; slack and PV magnitudes pinned to their setpoints.
  std::vector<double> vm(n, 1.0), th(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (static_cast<int>(i) == slack || is_pv[i]) vm[i] = s.buses[i].v_set_pu;

  std::vector<int> th_idx, vm_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) != slack) th_idx.push_back(static_cast<int>(i));
    if (static_cast<int>(i) != slack && !is_pv[i]) vm_idx.push_back(static_cast<int>(i));
  }
  const std::size_t nu = th_idx.size() + vm_idx.size();

  auto calc_pq = [&](std::size_t i, const std::vector<double>& vmv,
                     const std::vector<double>& thv) {
    double p = 0.0, q = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Complex yy = y(i, k);
      if (yy == Complex{}) continue;
      const double g = yy.real(), b = yy.imag();
      const double dth = thv[i] - thv[k];
      p += vmv[i] * vmv[k] * (g * std::cos(dth) + b * std::sin(dth));
      q += vmv[i] * vmv[k] * (g * std::sin(dth) - b * std::cos(dth));
    }
    return std::pair{p, q};
  };

  auto mismatch = [&](const std::vector<double>& vmv, const std::vector<double>& thv,
                      std::vector<double>* out) {
    double worst = 0.0;
    if (out) out->assign(nu, 0.0);
    std::size_t r = 0;
    for (int i : th_idx) {
      const auto [pc, qc] = calc_pq(i, vmv, thv);
      const auto [pl, ql] = load_pq(i, vmv[i]);
      const double mp = (mach_p[i] + inj_p[i] - pl) / base - pc;
      if (out) (*out)[r] = mp;
      worst = std::max(worst, std::fabs(mp));
      ++r;
    }
    for (int i : vm_idx) {
      const auto [pc, qc] = calc_pq(i, vmv, thv);
      const auto [pl, ql] = load_pq(i, vmv[i]);
      const double mq = (inj_q[i] - ql) / base - qc;
      if (out) (*out)[r] = mq;
      worst = std::max(worst, std::fabs(mq));
      ++r;
    }
    return worst;
  };

  std::vector<double> mm;
  double norm = mismatch(vm, th, &mm);
  int iter = 0;
  while (norm > s.solver.newton_tol && nu > 0) {
    if (iter >= s.solver.newton_max_iter) {
      std::ostringstream os;
      os << "power flow did not converge: mismatch " << norm << " pu after " << iter
         << " iterations";
      throw SolverError(os.str());
    }
    linalg::RealMatrix jac(nu, nu, 0.0);
    // Finite-difference Jacobian columns; the mismatch is cheap at these sizes.
    const double eps = 1e-7;
    std::vector<double> col(nu);
    std::size_t c = 0;
    for (int i : th_idx) {
      auto thp = th;
      thp[i] += eps;
      mismatch(vm, thp, &col);
      for (std::size_t r = 0; r < nu; ++r) jac(r, c) = (col[r] - mm[r]) / eps;
      ++c;
    }
    for (int i : vm_idx) {
      auto vmp = vm;
      vmp[i] += eps;
      mismatch(vmp, th, &col);
      for (std::size_t r = 0; r < nu; ++r) jac(r, c) = (col[r] - mm[r]) / eps;
      ++c;
    }
    linalg::Lu<double> lu(std::move(jac));
    if (lu.singular()) throw SolverError("power flow Jacobian singular");
    std::vector<double> rhs(nu);
    for (std::size_t k = 0; k < nu; ++k) rhs[k] = -mm[k];
    const auto dx = lu.solve(rhs);

    double alpha = 1.0;
    while (true) {
      auto vmt = vm;
      auto tht = th;
      std::size_t k = 0;
      for (int i : th_idx) tht[i] += alpha * dx[k++];
      for (int i : vm_idx) vmt[i] += alpha * dx[k++];
      const double ntrial = mismatch(vmt, tht, nullptr);
      if (ntrial < norm || alpha < 1e-6) {
        if (alpha < 1e-6)
          throw SolverError("power flow stalled (step below 1e-6), suspected voltage collapse");
        vm = std::move(vmt);
        th = std::move(tht);
        break;
      }
      alpha *= 0.5;
    }
    norm = mismatch(vm, th, &mm);
    ++iter;
  }

  OperatingPoint op;
  op.iterations = iter;
  op.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) op.v[i] = std::polar(vm[i], th[i]);

  // Per-bus generator totals: P from schedule (slack solves its own),
  // Q from the network solution net of local load and constant injections.
  std::vector<double> gen_p(n, 0.0), gen_q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_pv[i] && static_cast<int>(i) != slack) continue;
    const auto [pc, qc] = calc_pq(i, vm, th);
    const auto [pl, ql] = load_pq(i, vm[i]);
    gen_q[i] = qc * base + ql - inj_q[i];
    gen_p[i] = static_cast<int>(i) == slack ? pc * base + pl - inj_p[i] : mach_p[i];
  }

  std::vector<double> sn_at_bus(n, 0.0);
  for (const auto& m : s.machines) sn_at_bus[s.bus_index(m.bus)] += m.s_n_mva;

  for (const auto& m : s.machines) {
    const int b = s.bus_index(m.bus);
    const double share = m.s_n_mva / sn_at_bus[b];
    MachineInit mi;
    mi.p_mw = b == static_cast<int>(slack) ? gen_p[b] * share : m.p0_mw;
    mi.q_mvar = gen_q[b] * share;
    const Complex v = op.v[b];
    const Complex smach(mi.p_mw / base, mi.q_mvar / base);
    const Complex imach = std::conj(smach / v);
    const double x_sys = m.xd_prime_pu * base / m.s_n_mva;
    const Complex e = v + Complex(0.0, x_sys) * imach;
    mi.e_pu = std::abs(e);
    mi.delta_rad = std::arg(e);
    op.machines.push_back(mi);
    op.total_gen_mw += mi.p_mw;
  }
  for (const auto& h : s.hvdc_links) op.link_p_mw.push_back(h.p0_mw);
  for (const auto& l : s.loads) {
    const double vml = vm[s.bus_index(l.bus)];
    op.load_pq_mw.push_back({l.p0_mw * l.zip.factor(vml), l.q0_mvar * l.zip.factor(vml)});
    op.total_load_mw += op.load_pq_mw.back().first;
  }
  for (const auto& h : s.hvdc_links) op.hvdc_net_import_mw += h.p0_mw;
  op.hub_nps_injection_mw = hub_nps;
  op.losses_mw = op.total_gen_mw + op.hvdc_net_import_mw + hub_nps - op.total_load_mw;
  return op;
}

}  // namespace freqdyn
