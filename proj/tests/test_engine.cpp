#include <doctest.h>

#include <cmath>
#include <vector>

#include "freqdyn/engine.hpp"
#include "fixtures.hpp"

using namespace freqdyn;

namespace {

double channel_at(const SimulationResult& res, const std::string& name, double t) {
  const auto* ch = res.channel(name);
  REQUIRE(ch != nullptr);
  for (std::size_t i = 0; i < res.t_s.size(); ++i)
    if (std::fabs(res.t_s[i] - t) < 1e-9) return (*ch)[i];
  FAIL("no sample at t=", t);
  return 0.0;
}

}  // namespace

TEST_CASE("equilibrium: no events, all channels constant over 60 s") {
  auto s = fixtures::smib(true);
  auto res = run_simulation(s);
  for (const auto& [name, v] : res.channels) {
    double lo = v.front(), hi = v.front();
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    INFO("channel ", name);
    CHECK(hi - lo <= 1e-9);
  }
  CHECK(res.metrics.rocof_hz_per_s == 0.0);
}

TEST_CASE("pure inertia: load step ramps frequency at dP f_n / (2 E_k)") {
  auto s = fixtures::smib(false, /*d_pu=*/0.0, /*load_p=*/1.0);
  s.events = {{1.0, EventKind::LoadStep, "L1", 100.0}};
  s.solver.t_end_s = 6.0;
  auto res = run_simulation(s);
  const double f1 = channel_at(res, "system.f_avg_hz", 2.0);
  const double f2 = channel_at(res, "system.f_avg_hz", 5.0);
  const double slope = (f2 - f1) / 3.0;
  const double expected = -100.0 * 50.0 / (2.0 * 4000.0);  // E_k = H S_N = 4000 MWs
  CHECK(slope == doctest::Approx(expected).epsilon(0.005));
}

TEST_CASE("apply_event: trip of a negligible machine leaves trajectories unchanged") {
  auto s = fixtures::smib(false);
  MachineSpec tiny;
  tiny.id = "G2";
  tiny.bus = "B2";
  tiny.s_n_mva = 1.0;
  tiny.h_s = 0.01;
  tiny.d_pu = 0.0;
  tiny.xd_prime_pu = 0.3;
  tiny.p0_mw = 0.0;
  s.machines.push_back(tiny);
  s.solver.t_end_s = 10.0;

  auto with_trip = s;
  with_trip.events = {{1.0, EventKind::GeneratorTrip, "G2", 0.0}};
  auto base = run_simulation(s);
  auto tripped = run_simulation(with_trip);
  const auto* f1 = base.channel("G1.speed_hz");
  const auto* f2 = tripped.channel("G1.speed_hz");
  for (std::size_t i = 0; i < f1->size(); ++i)
    CHECK(std::fabs((*f1)[i] - (*f2)[i]) < 2e-5);
}

TEST_CASE("apply_event: double trip of the same element fails") {
  auto s = fixtures::smib(false);
  Engine eng(s);
  eng.apply_event({1.0, EventKind::GeneratorTrip, "G1", 0.0});
  CHECK_THROWS_AS(eng.apply_event({2.0, EventKind::GeneratorTrip, "G1", 0.0}), SolverError);
}

TEST_CASE("apply_event: generator trip removes inertia from the RoCoF budget") {
  auto s = fixtures::smib(false, 0.0, 1.0);
  MachineSpec g2;
  g2.id = "G2";
  g2.bus = "B2";
  g2.s_n_mva = 500.0;
  g2.h_s = 3.0;
  g2.d_pu = 0.0;
  g2.xd_prime_pu = 0.3;
  g2.p0_mw = 100.0;
  s.machines.push_back(g2);
  s.loads[0].p0_mw = 600.0;
  s.solver.t_end_s = 4.0;
  s.events = {{1.0, EventKind::GeneratorTrip, "G2", 0.0}};
  auto res = run_simulation(s);

  const double ek_surviving = 1000.0 * 4.0;  // G2's H S_N is gone
  const double expected = -100.0 * 50.0 / (2.0 * ek_surviving);
  const double f0 = channel_at(res, "system.f_avg_hz", 1.0);
  const double f1 = channel_at(res, "system.f_avg_hz", 1.2);
  CHECK((f1 - f0) / 0.2 == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("event conservation: post-trip books balance against the lost injection") {
  auto s = fixtures::smib(false, 1.0, 0.0);  // voltage-dependent load
  MachineSpec g2;
  g2.id = "G2";
  g2.bus = "B2";
  g2.s_n_mva = 500.0;
  g2.h_s = 3.0;
  g2.d_pu = 1.0;
  g2.xd_prime_pu = 0.3;
  g2.p0_mw = 150.0;
  s.machines.push_back(g2);
  s.loads[0].p0_mw = 650.0;
  Engine eng(s);
  const auto pre = eng.snapshot();
  const double pe_tripped = pre.machine_pe_mw[1];
  eng.apply_event({1.0, EventKind::GeneratorTrip, "G2", 0.0});
  const auto post = eng.snapshot();

  // Net accelerating power on the survivor right after the trip equals the
  // lost injection less the instantaneous load relief and loss change.
  const double accel = pre.machine_pe_mw[0] - post.machine_pe_mw[0];
  const double relief = pre.p_load_mw - post.p_load_mw;
  const double dloss = post.losses_mw - pre.losses_mw;
  CHECK(relief > 0.0);  // voltage dip reduces ZIP load
  CHECK(accel == doctest::Approx(relief - dloss - pe_tripped).epsilon(1e-6));
}

TEST_CASE("metrics: constant series at 49.9") {
  std::vector<double> t, f;
  for (int i = 0; i <= 600; ++i) {
    t.push_back(i * 0.1);
    f.push_back(49.9);
  }
  auto m = metrics_from_series(t, f, 50.0, std::nullopt);
  CHECK(m.nadir_hz == doctest::Approx(49.9));
  CHECK(m.rocof_hz_per_s == 0.0);
  CHECK(m.max_ifd_hz == doctest::Approx(0.1));
  CHECK(m.ss_deviation_hz == doctest::Approx(-0.1));
}

TEST_CASE("metrics: damped sine nadir matches an exhaustive scan") {
  std::vector<double> t, f;
  for (int i = 0; i <= 6000; ++i) {
    const double tt = i * 0.01;
    t.push_back(tt);
    f.push_back(50.0 - 0.8 * std::exp(-tt / 8.0) * std::sin(0.9 * tt));
  }
  std::size_t imin = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] < f[imin]) imin = i;
  auto m = metrics_from_series(t, f, 50.0, 0.0);
  CHECK(m.nadir_hz == f[imin]);
  CHECK(m.t_nadir_s == t[imin]);
}

TEST_CASE("metrics: equal minima report the earlier timestamp") {
  std::vector<double> t{0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> f{50.0, 49.5, 49.9, 49.5, 49.8};
  auto m = metrics_from_series(t, f, 50.0, std::nullopt);
  CHECK(m.t_nadir_s == 1.0);
}

TEST_CASE("integrator order: RK4 error drops at least 8x when dt halves") {
  auto make = [](double dt) {
    auto s = fixtures::smib(false, 2.0, 0.0);
    MachineSpec g2;
    g2.id = "G2";
    g2.bus = "B2";
    g2.s_n_mva = 400.0;
    g2.h_s = 2.0;
    g2.d_pu = 2.0;
    g2.xd_prime_pu = 0.25;
    g2.p0_mw = 100.0;
    s.machines.push_back(g2);
    s.loads[0].p0_mw = 600.0;
    s.events = {{0.4, EventKind::LoadStep, "L1", 60.0}};
    s.solver.dt_s = dt;
    s.solver.t_end_s = 4.0;
    s.solver.newton_tol = 1e-12;
    return run_simulation(s);
  };
  auto ref = make(0.0025);
  auto coarse = make(0.04);
  auto fine = make(0.02);
  auto err_at_end = [&](const SimulationResult& run) {
    const auto* f = run.channel("G2.speed_hz");
    const auto* fr = ref.channel("G2.speed_hz");
    return std::fabs(f->back() - fr->back());
  };
  const double e_coarse = err_at_end(coarse);
  const double e_fine = err_at_end(fine);
  INFO("coarse ", e_coarse, " fine ", e_fine);
  CHECK(e_coarse / e_fine >= 8.0);
}

TEST_CASE("channel consistency: FCR-D + EPC + relief book against the lost unit") {
  auto s = fixtures::smib(true, 1.0, 0.0);
  MachineSpec g2;
  g2.id = "G2";
  g2.bus = "B2";
  g2.s_n_mva = 500.0;
  g2.h_s = 3.0;
  g2.d_pu = 1.0;
  g2.xd_prime_pu = 0.3;
  g2.p0_mw = 150.0;
  s.machines.push_back(g2);
  s.loads[0].p0_mw = 650.0;
  HvdcLinkSpec h;
  h.id = "H1";
  h.bus = "B2";
  h.p_n_mw = 400.0;
  h.p0_mw = 50.0;
  h.t_c_s = 0.1;
  h.epc.enabled = true;
  h.epc.r_pu = 0.2;
  h.epc.headroom_import_mw = 350.0;
  s.hvdc_links = {h};
  s.events = {{1.0, EventKind::GeneratorTrip, "G2", 0.0}};
  s.solver.t_end_s = 30.0;

  Engine probe(s);
  const double pe_lost = probe.snapshot().machine_pe_mw[1];

  auto res = run_simulation(s);
  const auto& t = res.t_s;
  const auto* fcrd = res.channel("system.p_fcrd_mw");
  const auto* load = res.channel("system.p_load_mw");
  const auto* loss = res.channel("system.p_loss_mw");
  const auto* link = res.channel("H1.p_mw");
  const auto* f1 = res.channel("G1.speed_hz");
  const double dt = s.solver.dt_s;
  const double domega0 = (49.9 - 50.0) / 50.0;

  for (double tp : {3.0, 8.0, 15.0, 29.0}) {
    std::size_t i = 0;
    while (t[i] < tp - 1e-9) ++i;
    const double dom_prev = (*f1)[i - 1] / 50.0 - 1.0;
    const double dom_next = (*f1)[i + 1] / 50.0 - 1.0;
    const double accel = 2.0 * 4.0 * 1000.0 * (dom_next - dom_prev) / (2.0 * dt);
    const double dom = (*f1)[i] / 50.0 - 1.0;
    const double damping_release = 1.0 * 1000.0 * (domega0 - dom);
    const double relief = (*load)[0] - (*load)[i];
    const double dloss = (*loss)[i] - (*loss)[0];
    const double epc_delivered = (*link)[i] - 50.0;
    const double lhs =
        (*fcrd)[i] + epc_delivered + relief - dloss + damping_release - accel;
    INFO("t=", tp, " lhs=", lhs, " lost=", pe_lost);
    CHECK(lhs == doctest::Approx(pe_lost).epsilon(0.002));
  }
}

TEST_CASE("trapezoidal integrator: preserves equilibrium and tracks RK4") {
  auto s = fixtures::smib(true);
  s.solver.integrator = Integrator::Trapezoidal;
  s.solver.t_end_s = 20.0;
  auto eq = run_simulation(s);
  for (const auto& [name, v] : eq.channels) {
    double lo = v.front(), hi = v.front();
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(hi - lo <= 1e-9);
  }

  s.events = {{1.0, EventKind::LoadStep, "L1", 80.0}};
  auto heun = run_simulation(s);
  s.solver.integrator = Integrator::Rk4;
  auto rk4 = run_simulation(s);
  const auto* a = heun.channel("system.f_avg_hz");
  const auto* b = rk4.channel("system.f_avg_hz");
  for (std::size_t i = 0; i < a->size(); ++i)
    CHECK(std::fabs((*a)[i] - (*b)[i]) < 1e-4);
}

TEST_CASE("determinism: identical runs give identical samples") {
  auto s = fixtures::smib(true);
  s.events = {{1.0, EventKind::LoadStep, "L1", 80.0}};
  s.solver.t_end_s = 10.0;
  auto a = run_simulation(s);
  auto b = run_simulation(s);
  REQUIRE(a.channels.size() == b.channels.size());
  bool identical = true;
  for (std::size_t c = 0; c < a.channels.size(); ++c)
    for (std::size_t i = 0; i < a.channels[c].second.size(); ++i)
      identical = identical && a.channels[c].second[i] == b.channels[c].second[i];
  CHECK(identical);
}
