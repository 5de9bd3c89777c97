#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "freqdyn/engine.hpp"
#include "freqdyn/hvdc.hpp"
#include "freqdyn/tuning.hpp"
#include "fixtures.hpp"

using namespace freqdyn;

namespace {

EpcSettings epc(double r, double headroom = 1e9) {
  EpcSettings e;
  e.enabled = true;
  e.r_pu = r;
  e.headroom_import_mw = headroom;
  e.headroom_export_mw = headroom;
  return e;
}

}  // namespace

TEST_CASE("epc: zero at and above the triggering threshold") {
  FrequencyTargets t;
  CHECK(epc_output(49.7, epc(0.33), 1000.0, t) == 0.0);
  CHECK(epc_output(49.6, epc(0.33), 1000.0, t) == 0.0);
  CHECK(epc_output(50.1, epc(0.33), 1000.0, t) == 0.0);
}

TEST_CASE("epc: droop law 0.2 Hz below threshold on a 1000 MW link at R=0.33") {
  FrequencyTargets t;
  const double p = epc_output(49.4, epc(0.33), 1000.0, t);
  CHECK(p == doctest::Approx((0.2 / 50.0) / 0.33 * 1000.0).epsilon(1e-12));
  CHECK(p == doctest::Approx(12.12).epsilon(1e-3));
}

TEST_CASE("epc: headroom clamps the correction") {
  FrequencyTargets t;
  CHECK(epc_output(49.4, epc(0.33, 5.0), 1000.0, t) == doctest::Approx(5.0));
}

TEST_CASE("epc: disabled controller contributes nothing") {
  FrequencyTargets t;
  EpcSettings e = epc(0.33);
  e.enabled = false;
  CHECK(epc_output(49.0, e, 1000.0, t) == 0.0);
}

TEST_CASE("epc: reset/linearity/headroom over random trajectories") {
  FrequencyTargets t;
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> uf(48.5, 50.2), ur(0.05, 1.0), uh(10.0, 500.0),
      up(200.0, 2000.0);
  for (int k = 0; k < 200; ++k) {
    const double r = ur(rng), h = uh(rng), pn = up(rng);
    const auto e = epc(r, h);
    for (int i = 0; i < 50; ++i) {
      const double f = uf(rng);
      const double p = epc_output(f, e, pn, t);
      if (f >= t.f_tfl) {
        CHECK(p == 0.0);
      } else {
        const double raw = pn * (t.f_tfl - f) / (r * t.f_n);
        CHECK(p == doctest::Approx(std::min(raw, h)).epsilon(1e-12));
        CHECK(p <= h + 1e-12);
        CHECK(p >= 0.0);
      }
    }
  }
}

TEST_CASE("converter: tracking reference gives zero derivative") {
  CHECK(converter_dynamics(500.0, 500.0, 0.1) == 0.0);
}

TEST_CASE("converter: first-order step reaches 95% in three time constants") {
  const double t_c = 0.05;
  double p = 0.0;
  const double dt = 1e-4;
  for (double t = 0.0; t < 3.0 * t_c; t += dt) p += dt * converter_dynamics(p, 100.0, t_c);
  CHECK(p == doctest::Approx(100.0 * (1.0 - std::exp(-3.0))).epsilon(1e-3));
  CHECK(p >= 95.0 * 0.995);
}

TEST_CASE("converter: steady ramp is tracked with lag T_c * slope") {
  const double t_c = 0.1, slope = 40.0;  // MW/s
  double p = 0.0;
  const double dt = 1e-4;
  double t = 0.0;
  for (; t < 2.0; t += dt) p += dt * converter_dynamics(p, slope * t, t_c);
  CHECK(slope * t - p == doctest::Approx(t_c * slope).epsilon(1e-3));
}

TEST_CASE("beta_h: one 1000 MW link at R=0.1 contributes 200 MW/Hz") {
  HvdcLinkSpec l;
  l.p_n_mw = 1000.0;
  l.epc = epc(0.1);
  CHECK(aggregate_beta_h({l}) == doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("beta_h: 8563.5 MW of links at R=0.33 give 519 MW/Hz") {
  std::vector<HvdcLinkSpec> links;
  const double ratings[] = {700, 700, 700, 700, 700, 700, 500, 500, 500, 500,
                            500, 500, 200, 200, 200, 200, 200, 200, 163.5};
  for (double p : ratings) {
    HvdcLinkSpec l;
    l.p_n_mw = p;
    l.epc = epc(0.33);
    links.push_back(l);
  }
  CHECK(aggregate_beta_h(links) == doctest::Approx(519.0).epsilon(1e-6));
}

TEST_CASE("beta_h: retuned droop 0.0465 lands near the reference 3715 MW/Hz") {
  std::vector<HvdcLinkSpec> links;
  HvdcLinkSpec l;
  l.p_n_mw = 8563.5;
  l.epc = epc(0.0465);
  links.push_back(l);
  // The published droop is rounded; 1% covers the rounding gap.
  CHECK(aggregate_beta_h(links) == doctest::Approx(3715.0).epsilon(0.01));
}

TEST_CASE("headroom safety: delivered link power never exceeds the rating") {
  // Deep under-frequency with a stiff EPC pushing against the rating.
  auto s = fixtures::smib(false, 0.5, 0.3);
  s.machines[0].p0_mw = 700.0;
  s.loads[0].p0_mw = 800.0;
  HvdcLinkSpec l;
  l.id = "H1";
  l.bus = "B2";
  l.p_n_mw = 300.0;
  l.p0_mw = 100.0;
  l.t_c_s = 0.1;
  l.epc.enabled = true;
  l.epc.r_pu = 0.02;  // aggressive droop; the clamp must hold
  l.epc.headroom_import_mw = 200.0;
  s.hvdc_links = {l};
  s.events = {{1.0, EventKind::LoadStep, "L1", 260.0}};
  s.solver.t_end_s = 30.0;
  auto res = run_simulation(s);
  const auto* p = res.channel("H1.p_mw");
  for (double v : *p) CHECK(std::fabs(v) <= 300.0 + 1e-9);
  // The clamp actually bound in this run.
  double peak = 0.0;
  for (double v : *p) peak = std::max(peak, v);
  CHECK(peak == doctest::Approx(300.0).epsilon(1e-3));
}

TEST_CASE("epc activation delay holds the correction back by the configured time") {
  auto make = [](double delay) {
    auto s = fixtures::smib(false, 0.5, 1.0);
    HvdcLinkSpec l;
    l.id = "H1";
    l.bus = "B2";
    l.p_n_mw = 400.0;
    l.p0_mw = 0.0;
    l.t_c_s = 0.1;
    l.epc.enabled = true;
    l.epc.r_pu = 0.2;
    l.epc.headroom_import_mw = 400.0;
    l.epc.delay_s = delay;
    s.hvdc_links = {l};
    s.events = {{1.0, EventKind::LoadStep, "L1", 200.0}};
    s.solver.t_end_s = 20.0;
    return run_simulation(s);
  };
  auto prompt = make(0.0);
  auto delayed = make(0.5);
  const auto* e0 = prompt.channel("H1.p_epc_mw");
  const auto* e1 = delayed.channel("H1.p_epc_mw");
  // Find first activation in each run.
  auto first_active = [&](const std::vector<double>& v, const std::vector<double>& t) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] > 1e-9) return t[i];
    return -1.0;
  };
  const double t0 = first_active(*e0, prompt.t_s);
  const double t1 = first_active(*e1, delayed.t_s);
  REQUIRE(t0 > 0.0);
  REQUIRE(t1 > 0.0);
  CHECK(t1 - t0 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("nadir monotonicity: stiffer EPC never lowers the nadir") {
  SmibProblem pb;
  pb.e_k_mws = 125000.0;
  pb.dp_dis_mw = 1450.0;
  pb.beta_g_mw_per_hz = 3648.0;
  pb.governor = GovernorSpec{.enabled = true};
  pb.horizon_s = 40.0;
  const double grid[] = {std::numeric_limits<double>::infinity(), 1.0, 0.33, 0.1, 0.0465};
  double prev_nadir = -1.0;
  for (double r : grid) {
    if (std::isfinite(r)) {
      SmibLink l;
      l.id = "agg";
      l.p_n_mw = 8563.5;
      l.r_pu = r;
      l.headroom_mw = 8563.5;
      pb.links = {l};
    } else {
      pb.links.clear();
    }
    const auto run = smib_simulate(pb);
    INFO("droop ", r, " nadir ", run.nadir_hz);
    CHECK(run.nadir_hz >= prev_nadir - 1e-9);
    prev_nadir = run.nadir_hz;
  }
}
