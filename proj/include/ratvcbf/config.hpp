#pragma once

#include "safety_filter.hpp"
#include "scenario.hpp"
#include "smid.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratvcbf {

enum class DerivativeSource { truth, central };

struct SimConfig {
  ScenarioConfig scenario;

  // plant
  double k_true = 1400.0;
  double b_true = 70.0;
  double m_o = 1.0;
  double p0 = 0.0;
  double p_dot0 = 0.0;

  DisturbanceSpec disturbance{0.0008, DisturbanceKind::sinusoid_plus_uniform, 1.0, 0, 1, 1e-3};

  FilterConfig filter{FilterMode::RaTVCBF, 20.0, 0.0, 0.2, 1.0, std::nullopt};

  // adaptation
  Vec theta_hat0 = (Vec(2) << 1000.0, 10.0).finished();
  Mat Gamma = (Vec(2) << 2e5, 4e4).finished().asDiagonal();
  ParamBox prior{(Vec(2) << 900.0, 5.0).finished(), (Vec(2) << 1500.0, 100.0).finished()};
  // empty: taken from the prior box at theta_hat0
  Vec vartheta0;
  bool adapt_from_start = true;

  // smid
  std::size_t smid_batch = 5;
  double smid_precision = 0.0008;
  DerivativeSource smid_derivative = DerivativeSource::truth;

  // sim
  double dt = 2e-4;
  double duration = -1.0;  // negative: one loop of the path
  std::uint64_t seed = 1;

  double run_duration() const { return duration < 0.0 ? default_duration(scenario) : duration; }
  TruePlant plant() const { return {Vec::Constant(1, k_true), Vec::Constant(1, b_true), m_o}; }
  Vec theta_true() const { return (Vec(2) << k_true, b_true).finished(); }
  Vec initial_vartheta() const { return vartheta0.size() ? vartheta0 : vartheta_from_box(prior, theta_hat0); }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::stringstream ss(s);
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline Vec parse_vec(const std::string& s, Eigen::Index n, const std::string& key) {
  const auto v = parse_list(s);
  if (static_cast<Eigen::Index>(v.size()) != n)
    throw std::invalid_argument(key + ": expected " + std::to_string(n) + " comma-separated values");
  return Eigen::Map<const Vec>(v.data(), n);
}

}  // namespace detail

inline void validate(const SimConfig& c) {
  validate(c.scenario);
  validate(c.filter);
  validate(c.plant());
  if (!(c.dt > 0.0)) throw std::invalid_argument("sim.dt must be positive");
  if (c.smid_batch == 0) throw std::invalid_argument("smid.batch must be positive");
  if (!(c.smid_precision > 0.0)) throw std::invalid_argument("smid.precision must be positive");
  if (c.disturbance.delta < 0.0) throw std::invalid_argument("disturbance.delta must be nonnegative");
  if (!c.prior.contains(c.theta_hat0)) throw std::invalid_argument("adaptation.theta_hat0 must lie in the prior box");
  check_gamma(c.Gamma);
  if (c.Gamma.rows() != 2) throw std::invalid_argument("adaptation.gamma must be 2x2");
  if (c.vartheta0.size() && (c.vartheta0.size() != 2 || (c.vartheta0.array() < 0.0).any()))
    throw std::invalid_argument("adaptation.vartheta0 needs two nonnegative values");
}

// Sectioned key = value text. Unknown keys are rejected so typos do not silently fall back to defaults.
inline boost::property_tree::ptree read_config_tree(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return tree;
}

// "section.key=value"
inline void apply_override(boost::property_tree::ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw std::invalid_argument("override '" + assignment + "' is not section.key=value");
  tree.put(boost::property_tree::ptree::path_type(assignment.substr(0, eq), '.'), assignment.substr(eq + 1));
}

inline SimConfig load_config(const boost::property_tree::ptree& tree) {
  SimConfig c;
  auto& sc = c.scenario;
  auto num = [](const std::string& v) { return detail::parse_vec(v, 1, "value")[0]; };

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw std::invalid_argument("config key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string k = section + "." + key;
      try {
        if (k == "scenario.plate_width") sc.plate.width = num(v);
        else if (k == "scenario.plate_height") sc.plate.height = num(v);
        else if (k == "scenario.tool_radius") sc.tool_radius = num(v);
        else if (k == "scenario.tool_speed") sc.tool_speed = num(v);
        else if (k == "scenario.path") {
          std::vector<Point2> path;
          std::stringstream ss(v);
          std::string pt;
          while (std::getline(ss, pt, ';')) {
            const Vec xy = detail::parse_vec(pt, 2, k);
            path.push_back({xy[0], xy[1]});
          }
          sc.path = path;
        } else if (k == "scenario.k_p") sc.k_p = num(v);
        else if (k == "scenario.mrr_desired") sc.mrr_desired = num(v);
        else if (k == "scenario.mrr_band_frac") sc.mrr_band_frac = num(v);
        else if (k == "scenario.force_band_frac") sc.force_band_frac = num(v);
        else if (k == "scenario.corridor") {
          if (v == "mrr_band") sc.corridor = CorridorSource::mrr_band;
          else if (v == "force_band") sc.corridor = CorridorSource::force_band;
          else throw std::invalid_argument("expected mrr_band or force_band");
        } else if (k == "scenario.reference") {
          if (v == "outside") sc.reference = ReferenceKind::outside;
          else if (v == "center") sc.reference = ReferenceKind::center;
          else throw std::invalid_argument("expected outside or center");
        } else if (k == "scenario.reference_offset") sc.reference_offset = num(v);
        else if (k == "scenario.reference_ramp") sc.reference_ramp = num(v);
        else if (k == "scenario.sample_period") sc.sample_period = num(v);
        else if (k == "scenario.nominal_gain") sc.nominal_gain = num(v);
        else if (k == "plant.k_true") c.k_true = num(v);
        else if (k == "plant.b_true") c.b_true = num(v);
        else if (k == "plant.m_o") c.m_o = num(v);
        else if (k == "plant.p0") c.p0 = num(v);
        else if (k == "plant.p_dot0") c.p_dot0 = num(v);
        else if (k == "disturbance.kind") {
          if (v == "zero") c.disturbance.kind = DisturbanceKind::zero;
          else if (v == "sinusoid") c.disturbance.kind = DisturbanceKind::sinusoid;
          else if (v == "sinusoid_plus_uniform") c.disturbance.kind = DisturbanceKind::sinusoid_plus_uniform;
          else throw std::invalid_argument("unknown disturbance kind");
        } else if (k == "disturbance.delta") c.disturbance.delta = num(v);
        else if (k == "disturbance.frequency") c.disturbance.frequency = num(v);
        else if (k == "disturbance.hold_period") c.disturbance.hold_period = num(v);
        else if (k == "filter.mode") c.filter.mode = parse_mode(v);
        else if (k == "filter.alpha0") c.filter.alpha0 = num(v);
        else if (k == "filter.C") c.filter.C = num(v);
        else if (k == "filter.delta") c.filter.delta = num(v);
        else if (k == "filter.issf_epsilon") c.filter.issf_epsilon = num(v);
        else if (k == "filter.input_box") {
          const Vec b = detail::parse_vec(v, 2, k);
          c.filter.input_box = InputBox{b.head(1), b.tail(1)};
        } else if (k == "adaptation.theta_hat0") c.theta_hat0 = detail::parse_vec(v, 2, k);
        else if (k == "adaptation.gamma") {
          const auto g = detail::parse_list(v);
          if (g.size() == 2) c.Gamma = Vec(Eigen::Map<const Vec>(g.data(), 2)).asDiagonal();
          else if (g.size() == 4) c.Gamma = Eigen::Map<const Eigen::Matrix2d>(g.data());
          else throw std::invalid_argument("expected 2 (diagonal) or 4 (row-major) values");
        } else if (k == "adaptation.box_lower") c.prior.lower = detail::parse_vec(v, 2, k);
        else if (k == "adaptation.box_upper") c.prior.upper = detail::parse_vec(v, 2, k);
        else if (k == "adaptation.vartheta0") c.vartheta0 = detail::parse_vec(v, 2, k);
        else if (k == "adaptation.adapt_from_start") c.adapt_from_start = (v == "true" || v == "1");
        else if (k == "smid.batch") c.smid_batch = static_cast<std::size_t>(std::stoul(v));
        else if (k == "smid.precision") c.smid_precision = num(v);
        else if (k == "smid.derivative") {
          if (v == "truth") c.smid_derivative = DerivativeSource::truth;
          else if (v == "central") c.smid_derivative = DerivativeSource::central;
          else throw std::invalid_argument("expected truth or central");
        } else if (k == "sim.dt") c.dt = num(v);
        else if (k == "sim.duration") c.duration = num(v);
        else if (k == "sim.seed") c.seed = std::stoull(v);
        else throw std::invalid_argument("unknown key");
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config key '" + k + "' = '" + v + "': " + e.what());
      } catch (const std::out_of_range& e) {
        throw std::invalid_argument("config key '" + k + "' = '" + v + "': out of range");
      }
    }
  }
  validate(c);
  return c;
}

inline SimConfig load_config(std::istream& in) { return load_config(read_config_tree(in)); }

inline boost::property_tree::ptree read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file '" + path + "'");
  return read_config_tree(f);
}

inline SimConfig load_config_file(const std::string& path) { return load_config(read_config_file(path)); }

}  // namespace ratvcbf
