#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdde/comparison.hpp"
#include "sdde/conditions.hpp"
#include "sdde/model.hpp"
#include "sdde/randomness.hpp"

namespace sdde::io {

using json = nlohmann::ordered_json;

// 17 significant digits round-trip any double exactly.
inline std::string format17(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// --- strict config access ---------------------------------------------------

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw std::invalid_argument(where + " must be a JSON object");
  }
}

inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      std::string message = where + ": unknown field \"" + key + "\" (expected one of:";
      for (const auto& a : allowed) message += " " + a;
      throw std::invalid_argument(message + ")");
    }
  }
}

inline double get_double(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing field \"" + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(where + ": field \"" + key + "\" must be a number");
  return v.get<double>();
}

inline double get_double_or(const json& j, const std::string& key, double fallback,
                            const std::string& where) {
  return j.contains(key) ? get_double(j, key, where) : fallback;
}

inline std::uint64_t get_uint(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing field \"" + key + "\"");
  const auto& v = j.at(key);
  const bool ok = v.is_number_unsigned() ||
                  (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (!ok) {
    throw std::invalid_argument(where + ": field \"" + key + "\" must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing field \"" + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_string()) throw std::invalid_argument(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

// --- mark space -------------------------------------------------------------

inline json to_json(const randomness::MarkSpace& space) {
  json j;
  switch (space.kind()) {
    case randomness::MarkSpace::Kind::kDegenerate:
      j["kind"] = "degenerate";
      j["mark"] = space.degenerate_mark();
      j["mass"] = space.total_mass();
      break;
    case randomness::MarkSpace::Kind::kUniformDensity:
      j["kind"] = "uniform_density";
      j["lo"] = space.lo();
      j["hi"] = space.hi();
      j["density"] = space.density();
      break;
    case randomness::MarkSpace::Kind::kFiniteDiscrete: {
      j["kind"] = "finite_discrete";
      json atoms = json::array();
      for (std::size_t i = 0; i < space.atom_marks().size(); ++i) {
        atoms.push_back(json::array({space.atom_marks()[i], space.atom_weights()[i]}));
      }
      j["atoms"] = std::move(atoms);
      break;
    }
  }
  return j;
}

inline randomness::MarkSpace mark_space_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  const std::string kind = get_string(j, "kind", where);
  if (kind == "degenerate") {
    require_keys(j, {"kind", "mark", "mass"}, where);
    return randomness::MarkSpace::degenerate(get_double(j, "mark", where),
                                             get_double(j, "mass", where));
  }
  if (kind == "uniform_density") {
    require_keys(j, {"kind", "lo", "hi", "density"}, where);
    return randomness::MarkSpace::uniform_density(
        get_double(j, "lo", where), get_double(j, "hi", where), get_double(j, "density", where));
  }
  if (kind == "finite_discrete") {
    require_keys(j, {"kind", "atoms"}, where);
    if (!j.contains("atoms") || !j.at("atoms").is_array()) {
      throw std::invalid_argument(where + ": \"atoms\" must be an array of [mark, weight] pairs");
    }
    std::vector<std::pair<double, double>> atoms;
    for (const auto& atom : j.at("atoms")) {
      if (!atom.is_array() || atom.size() != 2 || !atom[0].is_number() || !atom[1].is_number()) {
        throw std::invalid_argument(where + ": \"atoms\" must be an array of [mark, weight] pairs");
      }
      atoms.emplace_back(atom[0].get<double>(), atom[1].get<double>());
    }
    return randomness::MarkSpace::finite_discrete(std::move(atoms));
  }
  throw std::invalid_argument(where + ": unknown mark space kind \"" + kind +
                              "\" (expected degenerate, uniform_density, finite_discrete)");
}

// --- initial segments -------------------------------------------------------

inline json to_json(const model::Segment& segment) {
  json j;
  j["breakpoints"] = segment.breakpoints();
  j["values"] = segment.values();
  return j;
}

// A bare number means a constant segment; an object gives the breakpoints.
inline model::SegmentPtr segment_from_json(const json& j, double tau, const std::string& where) {
  if (j.is_number()) {
    return std::make_shared<model::Segment>(model::Segment::constant(tau, j.get<double>()));
  }
  require_keys(j, {"breakpoints", "values"}, where);
  if (!j.contains("breakpoints") || !j.contains("values") || !j.at("breakpoints").is_array() ||
      !j.at("values").is_array()) {
    throw std::invalid_argument(where + ": segment needs \"breakpoints\" and \"values\" arrays");
  }
  return std::make_shared<model::Segment>(tau, j.at("breakpoints").get<std::vector<double>>(),
                                          j.at("values").get<std::vector<double>>());
}

// --- reports ----------------------------------------------------------------

inline json to_json(const conditions::Witness& w) {
  json j;
  j["x"] = w.x;
  j["y"] = w.y;
  j["y2"] = w.y2;
  j["t"] = w.t;
  j["u"] = w.u;
  j["lhs"] = w.lhs;
  j["rhs"] = w.rhs;
  return j;
}

inline json to_json(const conditions::ConditionReport& report) {
  json j;
  j["structural_rejection"] = report.structural_rejection;
  if (report.structural_rejection) {
    j["structural_reason"] = report.structural_reason;
  }
  json checks = json::array();
  for (const auto& [key, result] : report.entries) {
    json entry;
    entry["key"] = conditions::to_string(key);
    entry["verdict"] = conditions::verdict_string(result);
    entry["margin"] = result.margin;
    entry["samples"] = result.samples;
    if (!result.passed) {
      entry["witness"] = to_json(result.witness);
    }
    checks.push_back(std::move(entry));
  }
  j["checks"] = std::move(checks);
  j["all_passed"] = report.all_passed();
  return j;
}

// Compact key -> verdict map for the summary.
inline json verdict_map(const conditions::ConditionReport& report) {
  json j;
  for (const auto& [key, result] : report.entries) {
    j[conditions::to_string(key)] = conditions::verdict_string(result);
  }
  return j;
}

inline json to_json(const comparison::CurvePoint& point) {
  json j;
  j["time"] = point.time;
  j["mean"] = point.mean;
  j["stderr"] = point.stderr_mean;
  return j;
}

inline json to_json(const comparison::OrderingReport& report, bool include_curve) {
  json j;
  j["n_paths"] = report.n_paths;
  j["epsilon"] = report.epsilon;
  j["window"] = {{"lo", report.window.lo}, {"hi", report.window.hi}};
  j["violation_prob"] = report.violation_prob;
  j["violation_prob_raw"] = report.violation_prob_raw;
  j["max_violation"] = report.max_violation;
  if (include_curve) {
    json curve = json::array();
    for (const auto& point : report.positive_part_curve) curve.push_back(to_json(point));
    j["positive_part_curve"] = std::move(curve);
  }
  return j;
}

inline json to_json(const comparison::TowerReport& report) {
  json j;
  j["beta"] = report.beta;
  j["contraction_bound"] = report.contraction_bound;
  j["epsilon"] = report.epsilon;
  j["n_paths"] = report.n_paths;
  j["max_level"] = report.max_level;
  json levels = json::array();
  for (const auto& level : report.levels) {
    json entry;
    entry["level"] = level.level;
    entry["chain_violation_fraction"] = level.chain_violation_fraction;
    entry["chain_violation_fraction_raw"] = level.chain_violation_fraction_raw;
    entry["max_chain_violation"] = level.max_chain_violation;
    entry["sup_gap_to_direct"] = level.sup_gap_to_direct;
    levels.push_back(std::move(entry));
  }
  j["levels"] = std::move(levels);
  j["iterate_norms"] = report.iterate_norms;
  j["norm_ratios"] = report.norm_ratios;
  return j;
}

inline json to_json(const model::ValidationReport& report) {
  json j;
  j["lipschitz_estimate"] = report.lipschitz_estimate;
  j["growth_ratio"] = report.growth_ratio;
  j["growth_ratio_inner"] = report.growth_ratio_inner;
  j["growth_warn"] = report.growth_warn;
  j["lipschitz_warn"] = report.lipschitz_warn;
  j["samples_used"] = report.samples_used;
  return j;
}

// --- CSV --------------------------------------------------------------------

inline void write_curve_csv(const std::vector<comparison::CurvePoint>& curve, std::ostream& out) {
  out << "time,mean,stderr\n";
  for (const auto& point : curve) {
    out << format17(point.time) << ',' << format17(point.mean) << ','
        << format17(point.stderr_mean) << '\n';
  }
}

}  // namespace sdde::io
