#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqdyn/model.hpp"

namespace freqdyn {

namespace io_detail {

/// Shortest round-trip decimal form; locale-independent, byte-stable.
inline std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace io_detail

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["nadir_hz"] = m.nadir_hz;
  j["t_nadir_s"] = m.t_nadir_s;
  j["max_ifd_hz"] = m.max_ifd_hz;
  j["rocof_hz_per_s"] = m.rocof_hz_per_s;
  j["ss_deviation_hz"] = m.ss_deviation_hz;
  j["fcrd_power_at_nadir_mw"] = m.fcrd_power_at_nadir_mw;
  nlohmann::json peaks = nlohmann::json::object();
  for (const auto& [id, v] : m.epc_peak_mw) peaks[id] = v;
  j["epc_peak_mw"] = peaks;
  return j;
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.nadir_hz = j.value("nadir_hz", 0.0);
  m.t_nadir_s = j.value("t_nadir_s", 0.0);
  m.max_ifd_hz = j.value("max_ifd_hz", 0.0);
  m.rocof_hz_per_s = j.value("rocof_hz_per_s", 0.0);
  m.ss_deviation_hz = j.value("ss_deviation_hz", 0.0);
  m.fcrd_power_at_nadir_mw = j.value("fcrd_power_at_nadir_mw", 0.0);
  if (auto it = j.find("epc_peak_mw"); it != j.end())
    for (auto& [k, v] : it->items()) m.epc_peak_mw.push_back({k, v.get<double>()});
  std::sort(m.epc_peak_mw.begin(), m.epc_peak_mw.end());
  return m;
}

/// Minimal vector plot of one channel, deterministic output.
inline std::string render_svg(const std::string& name, const std::vector<double>& t,
                              const std::vector<double>& y) {
  using io_detail::fmt;
  const double w = 860.0, h = 480.0, ml = 70.0, mr = 20.0, mt = 30.0, mb = 40.0;
  double ymin = y.empty() ? 0.0 : y.front(), ymax = ymin;
  for (double v : y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  if (ymax - ymin < 1e-12) { ymax += 0.5; ymin -= 0.5; }
  const double t0 = t.empty() ? 0.0 : t.front(), t1 = t.empty() ? 1.0 : t.back();
  auto px = [&](double tv) { return ml + (tv - t0) / (t1 - t0) * (w - ml - mr); };
  auto py = [&](double yv) { return h - mb - (yv - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" +
         fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt(ml) + "\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" +
         name + "</text>\n";
  svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(h - mb) + "\" x2=\"" + fmt(w - mr) +
         "\" y2=\"" + fmt(h - mb) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(ml) +
         "\" y2=\"" + fmt(h - mb) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"5\" y=\"" + fmt(py(ymax) + 4) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt(ymax) + "</text>\n";
  svg += "<text x=\"5\" y=\"" + fmt(py(ymin) + 4) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt(ymin) + "</text>\n";
  svg += "<text x=\"" + fmt(ml) + "\" y=\"" + fmt(h - 10) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt(t0) + " s</text>\n";
  svg += "<text x=\"" + fmt(w - mr - 60) + "\" y=\"" + fmt(h - 10) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt(t1) + " s</text>\n";
  svg += "<polyline fill=\"none\" stroke=\"#1f6fb4\" stroke-width=\"1.2\" points=\"";
  // Decimate long series for plot size; values themselves are untouched.
  const std::size_t stride = std::max<std::size_t>(1, t.size() / 4000);
  for (std::size_t i = 0; i < t.size(); i += stride)
    svg += fmt(px(t[i])) + "," + fmt(py(y[i])) + " ";
  if (!t.empty() && (t.size() - 1) % stride != 0)
    svg += fmt(px(t.back())) + "," + fmt(py(y.back()));
  svg += "\"/>\n</svg>\n";
  return svg;
}

/// Writes timeseries.csv, metrics.json and one SVG per requested channel into
/// dir. Channel subset empty = all channels. Byte-stable for identical input.
inline std::vector<std::string> write_result(const SimulationResult& res,
                                             const std::string& dir,
                                             const std::vector<std::string>& channels = {},
                                             bool with_plots = true) {
  namespace fs = std::filesystem;
  using io_detail::fmt;
  if (res.t_s.empty()) throw ScenarioError("write_result: empty result");
  fs::create_directories(dir);
  std::vector<std::string> written;

  auto selected = [&](const std::string& name) {
    return channels.empty() ||
           std::find(channels.begin(), channels.end(), name) != channels.end();
  };

  {
    std::ofstream csv(fs::path(dir) / "timeseries.csv", std::ios::binary);
    if (!csv) throw ScenarioError("write_result: cannot write timeseries.csv");
    csv << "t_s";
    for (const auto& [name, v] : res.channels)
      if (selected(name)) csv << "," << name;
    csv << "\n";
    for (std::size_t k = 0; k < res.t_s.size(); ++k) {
      csv << fmt(res.t_s[k]);
      for (const auto& [name, v] : res.channels)
        if (selected(name)) csv << "," << fmt(v[k]);
      csv << "\n";
    }
    written.push_back("timeseries.csv");
  }
  {
    std::ofstream mj(fs::path(dir) / "metrics.json", std::ios::binary);
    if (!mj) throw ScenarioError("write_result: cannot write metrics.json");
    mj << metrics_to_json(res.metrics).dump(2) << "\n";
    written.push_back("metrics.json");
  }
  if (with_plots) {
    for (const auto& [name, v] : res.channels) {
      if (!selected(name)) continue;
      const std::string file = name + ".svg";
      std::ofstream svg(fs::path(dir) / file, std::ios::binary);
      if (!svg) throw ScenarioError("write_result: cannot write " + file);
      svg << render_svg(name, res.t_s, v);
      written.push_back(file);
    }
  }
  return written;
}

}  // namespace freqdyn
