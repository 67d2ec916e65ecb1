#pragma once

#include "harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratvcbf {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const SimLog& log) {
  for (std::size_t i = 0; i < kLogFields.size(); ++i) os << (i ? "," : "") << kLogFields[i];
  os << '\n';
  for (const auto& r : log.records) {
    const auto f = fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << fmt9(f[i]);
    os << '\n';
  }
}

inline nlohmann::json to_json(const RunSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mode", s.mode},
          {"seed", s.seed},
          {"ticks", s.ticks},
          {"activated", s.activated},
          {"activation_time", num(s.activation_time)},
          {"min_h_r", num(s.min_h_r)},
          {"min_robust_h", num(s.min_robust_h)},
          {"min_h_true", num(s.min_h_true)},
          {"min_h_r_edge", num(s.min_h_r_edge)},
          {"min_h_true_edge", num(s.min_h_true_edge)},
          {"violation_ticks", s.violation_ticks},
          {"violation_ticks_true", s.violation_ticks_true},
          {"edge_violation_ticks", s.edge_violation_ticks},
          {"edge_violation_ticks_true", s.edge_violation_ticks_true},
          {"mean_h", num(s.mean_h)},
          {"mrr_in_band_fraction", num(s.mrr_in_band_fraction)},
          {"infeasible_ticks", s.infeasible_ticks},
          {"smid_updates", s.smid_updates},
          {"smid_inconsistency_count", s.smid_inconsistency_count},
          {"smid_unsound_updates", s.smid_unsound_updates},
          {"smid_nesting_violations", s.smid_nesting_violations},
          {"vartheta_increase_events", s.vartheta_increase_events},
          {"containment_violations", s.containment_violations},
          {"gamma_condition_ok", s.gamma_condition_ok},
          {"pass", s.pass}};
}

inline nlohmann::json to_json(const Comparison& c) {
  nlohmann::json j;
  j["modes"] = nlohmann::json::array();
  for (const auto& r : c.runs) j["modes"].push_back(to_json(r.summary));
  j["conservatism_reduction_percent"] = c.conservatism_reduction_percent;
  j["mrr_band_compliance"] = nlohmann::json::object();
  for (const auto& r : c.runs) j["mrr_band_compliance"][r.summary.mode] = r.summary.mrr_in_band_fraction;
  j["baseline_violates"] = c.baseline_violates;
  j["robust_modes_safe"] = c.robust_modes_safe;
  j["reduction_in_range"] = c.reduction_in_range;
  j["pass"] = c.pass;
  return j;
}

// --- minimal static line plots

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  bool dashed = false;
};

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += ch;
    }
  }
  return o;
}

inline std::string svg_plot(const std::string& title, const std::string& ylabel, const std::vector<Series>& series) {
  const double W = 900, H = 420, L = 70, R = 170, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt9(std::round(yv * 1000) / 1000) << "</text>\n";
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt9(std::round(xv * 100) / 100) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t [s]</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(ylabel)
    << "</text>\n";
  if (y0 < 0 && y1 > 0)
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(0) << "\" y2=\"" << py(0)
      << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
  int row = 0;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\""
      << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    // at most ~3000 vertices per series
    const std::size_t step = std::max<std::size_t>(1, s.x.size() / 3000);
    for (std::size_t i = 0; i < s.x.size(); i += step)
      if (std::isfinite(s.y[i])) o << fmt9(px(s.x[i])) << ',' << fmt9(py(s.y[i])) << ' ';
    o << "\"/>\n";
    const double ly = T + 14 + 18 * row++;
    o << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 34 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    o << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline const char* mode_color(FilterMode m) {
  switch (m) {
    case FilterMode::TVCBF: return "#d62728";
    case FilterMode::RaTVCBF: return "#1f77b4";
    case FilterMode::RaTVCBF_SMID: return "#2ca02c";
  }
  return "black";
}

}  // namespace detail

inline void write_figures(const std::vector<const SimLog*>& logs, double mrr_desired, double band,
                          const std::filesystem::path& dir) {
  std::vector<Series> force, h, mrr;
  if (!logs.empty() && !logs.front()->records.empty()) {
    Series lo{"f_lower", "black", {}, {}, true}, up{"f_upper", "black", {}, {}, true};
    Series mlo{"MRR lower", "black", {}, {}, true}, mhi{"MRR upper", "black", {}, {}, true};
    for (const auto& r : logs.front()->records) {
      lo.x.push_back(r.t), lo.y.push_back(r.f_lower);
      up.x.push_back(r.t), up.y.push_back(r.f_upper);
      mlo.x.push_back(r.t), mlo.y.push_back((1 - band) * mrr_desired);
      mhi.x.push_back(r.t), mhi.y.push_back((1 + band) * mrr_desired);
    }
    force = {lo, up};
    mrr = {mlo, mhi};
  }
  for (const SimLog* L : logs) {
    Series f{mode_name(L->mode), detail::mode_color(L->mode), {}, {}}, hh = f, m = f;
    for (const auto& r : L->records) {
      f.x.push_back(r.t), f.y.push_back(r.f_c_true);
      hh.x.push_back(r.t), hh.y.push_back(r.active > 0 ? r.h_r : NAN);
      m.x.push_back(r.t), m.y.push_back(r.mrr_true);
    }
    force.push_back(f);
    h.push_back(hh);
    mrr.push_back(m);
  }
  detail::write_text(dir / "fig_force.svg", svg_plot("Contact force (plant)", "force [N]", force));
  detail::write_text(dir / "fig_h.svg", svg_plot("Barrier value h_r after activation", "h_r [N^2]", h));
  detail::write_text(dir / "fig_mrr.svg", svg_plot("Material removal rate", "MRR", mrr));
}

inline void emit_outputs(const SimLog& log, const RunSummary& summary, const SimConfig& cfg,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_csv(csv, log);
  detail::write_text(dir / ("trace_" + mode_name(log.mode) + ".csv"), csv.str());
  detail::write_text(dir / "summary.json", to_json(summary).dump(2) + "\n");
  write_figures({&log}, cfg.scenario.mrr_desired, cfg.scenario.mrr_band_frac, dir);
}

inline void emit_comparison(const Comparison& c, const SimConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<const SimLog*> logs;
  for (const auto& r : c.runs) {
    std::ostringstream csv;
    write_csv(csv, r.log);
    detail::write_text(dir / ("trace_" + mode_name(r.log.mode) + ".csv"), csv.str());
    logs.push_back(&r.log);
  }
  detail::write_text(dir / "summary.json", to_json(c).dump(2) + "\n");
  write_figures(logs, cfg.scenario.mrr_desired, cfg.scenario.mrr_band_frac, dir);
}

}  // namespace ratvcbf
