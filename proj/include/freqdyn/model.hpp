#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqdyn {

/// Frequency thresholds and limits of the synchronous area, all in absolute Hz.
struct FrequencyTargets {
  double f_n = 50.0;        ///< nominal frequency
  double f_fcrd = 49.9;     ///< FCR-D activation threshold
  double f_tfl = 49.6;      ///< EPC triggering threshold
  double f_min = 49.0;      ///< lowest allowed frequency
  double f_shed = 48.8;     ///< under-frequency load-shedding threshold
  double df_ss_max = 0.5;   ///< maximum steady-state deviation from f_n

  bool ordered() const {
    return f_shed < f_min && f_min < f_tfl && f_tfl < f_fcrd && f_fcrd < f_n;
  }
};

struct Bus {
  std::string id;
  double kv = 400.0;
  bool slack = false;
  double v_set_pu = 1.0;  // voltage setpoint; used for slack and generator buses
};

struct Branch {
  std::string id;
  std::string from;
  std::string to;
  double r_pu = 0.0;
  double x_pu = 0.0;
  double b_pu = 0.0;   // total line charging susceptance
  double ratio = 1.0;  // off-nominal turns ratio at the "from" side
};

/// Hydro turbine/governor parameters (FCR-D provider).
struct GovernorSpec {
  bool enabled = false;
  double r_pu = 0.05;           ///< permanent droop on machine base
  double rt_pu = 0.4;           ///< transient droop
  double tr_s = 5.0;            ///< washout (reset) time constant
  double tg_s = 0.2;            ///< gate servo time constant
  double tw_s = 1.5;            ///< water time constant
  double gate_min = 0.0;        ///< absolute gate position limits, pu of P_N
  double gate_max = 1.0;
  double rate_limit_pu_s = 0.1; ///< gate rate limit
};

struct MachineSpec {
  std::string id;
  std::string bus;
  double s_n_mva = 0.0;
  double h_s = 0.0;          ///< inertia constant on machine base
  double d_pu = 1.0;         ///< damping on machine base (emulates AVR/PSS damping)
  double xd_prime_pu = 0.3;  ///< transient reactance on machine base
  double p0_mw = 0.0;
  double q0_mvar = 0.0;      ///< scheduled reactive output; refined by the initial power flow
  GovernorSpec governor;

  double kinetic_energy_mws() const { return h_s * s_n_mva; }
};

struct ZipCoefficients {
  double z = 0.0;
  double i = 0.0;
  double p = 1.0;

  double sum() const { return z + i + p; }
  /// Power multiplier at voltage v (pu of the reference V0 = 1).
  double factor(double v) const { return z * v * v + i * v + p; }
  double dfactor_dv(double v) const { return 2.0 * z * v + i; }
};

struct ZipLoadSpec {
  std::string id;
  std::string bus;
  double p0_mw = 0.0;   // negative values model small distributed generation
  double q0_mvar = 0.0;
  ZipCoefficients zip;
};

struct EpcSettings {
  bool enabled = false;
  double r_pu = 0.33;                   ///< frequency droop on link nominal power
  double headroom_import_mw = -1.0;     ///< <0 means "compute as P_N - |P0| at load time"
  double headroom_export_mw = -1.0;
  double delay_s = 0.0;                 ///< activation delay; local measurement, default 0
};

struct HvdcLinkSpec {
  std::string id;
  std::string bus;
  double p_n_mw = 0.0;   ///< converter nominal power
  double p0_mw = 0.0;    ///< operating point, import to the synchronous area positive
  double q0_mvar = 0.0;
  double t_c_s = 0.1;    ///< first-order converter response time constant
  EpcSettings epc;
};

enum class HubMode { LowInertia, ZeroInertia };
enum class ConverterControl { GridFollowing, GridForming };

struct HubConverter {
  std::string id;
  std::string area;       ///< remote area tag; "nps" marks the link to the synchronous area
  double p_n_mw = 2000.0;
  double p_set_mw = 0.0;  ///< injection into the hub island, positive = import to hub
  double r_pu = 0.01;     ///< frequency droop on converter nominal power
  double limit_mw = 2000.0;
  double t_c_s = 0.1;     ///< active-power response time constant (grid-following)
  ConverterControl control = ConverterControl::GridForming;
  EpcSettings epc;        ///< onshore-frequency EPC, meaningful on the nps link only
};

struct CondenserSpec {
  double s_n_mva = 300.0;
  double h_s = 2.0;
  double d_pu = 1.0;
};

struct HubCoordinator {
  double k_hc_pu_s = 1.65;              ///< integral gain, pu of hub base per second
  std::vector<double> participation;    ///< per converter, non-negative, sums to 1
};

struct HubSpec {
  HubMode mode = HubMode::LowInertia;
  std::string nps_bus;                  ///< onshore terminal bus of the nps link
  double wpp_mw = 0.0;                  ///< lumped wind injection, constant PQ
  std::vector<CondenserSpec> condensers;
  std::vector<HubConverter> converters;
  HubCoordinator coordinator;

  double converter_base_mw() const {
    double s = 0.0;
    for (const auto& c : converters) s += c.p_n_mw;
    return s;
  }
  double kinetic_energy_mws() const {
    double s = 0.0;
    for (const auto& c : condensers) s += c.h_s * c.s_n_mva;
    return s;
  }
};

enum class EventKind { GeneratorTrip, HvdcTrip, LoadStep };

struct Event {
  double t_s = 0.0;
  EventKind kind = EventKind::GeneratorTrip;
  std::string target;
  double magnitude_mw = 0.0;  // load-step only
};

enum class Integrator { Rk4, Trapezoidal };

struct SolverConfig {
  double dt_s = 0.01;
  double t_end_s = 60.0;
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  Integrator integrator = Integrator::Rk4;
};

/// Complete declarative system description.
struct Scenario {
  int schema_version = 1;
  double base_power_mva = 1000.0;
  double f0_hz = 49.9;  ///< initial system frequency; 49.9 Hz is the FCR-D edge
  FrequencyTargets targets;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<MachineSpec> machines;
  std::vector<ZipLoadSpec> loads;
  std::vector<HvdcLinkSpec> hvdc_links;
  std::optional<HubSpec> hub;
  std::vector<Event> events;
  SolverConfig solver;

  int bus_index(const std::string& id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == id) return static_cast<int>(k);
    return -1;
  }
  double total_kinetic_energy_mws() const {
    double s = 0.0;
    for (const auto& m : machines) s += m.kinetic_energy_mws();
    return s;
  }
};

struct Metrics {
  double nadir_hz = 0.0;
  double t_nadir_s = 0.0;
  double max_ifd_hz = 0.0;          ///< max |f - f_n| over the run
  double rocof_hz_per_s = 0.0;      ///< slope over the first 500 ms after the first event
  double ss_deviation_hz = 0.0;     ///< mean over the final 5 s, minus f_n (signed)
  double fcrd_power_at_nadir_mw = 0.0;
  std::vector<std::pair<std::string, double>> epc_peak_mw;  // per link, scenario order
};

/// Time series plus derived metrics. All channels share the time grid.
struct SimulationResult {
  std::vector<double> t_s;
  std::vector<std::pair<std::string, std::vector<double>>> channels;
  Metrics metrics;

  const std::vector<double>* channel(const std::string& name) const {
    for (const auto& [n, v] : channels)
      if (n == name) return &v;
    return nullptr;
  }
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace freqdyn
