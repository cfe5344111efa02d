#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sdde/common.hpp"
#include "sdde/comparison.hpp"
#include "sdde/conditions.hpp"
#include "sdde/engine.hpp"
#include "sdde/io.hpp"
#include "sdde/model.hpp"
#include "sdde/scenarios.hpp"

namespace sdde::cli {

// Artifact kinds, in the order files are written and listed.
inline const std::vector<std::string>& emit_kinds() {
  static const std::vector<std::string> kinds = {"conditions", "ordering", "curve", "tower",
                                                 "paths"};
  return kinds;
}

inline constexpr std::size_t kPathExportCount = 5;
inline constexpr int kConditionDraws = 160;

// dt is carried as the string "tau/n" so exact division is syntactic, never a
// floating-point check.
inline std::size_t parse_dt_steps(const std::string& text) {
  const std::string prefix = "tau/";
  if (text.rfind(prefix, 0) != 0 || text.size() == prefix.size()) {
    throw std::invalid_argument("dt must have the form \"tau/<steps>\", got \"" + text + "\"");
  }
  std::size_t steps = 0;
  for (std::size_t i = prefix.size(); i < text.size(); ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw std::invalid_argument("dt must have the form \"tau/<steps>\", got \"" + text + "\"");
    }
    if (steps > 100000000) throw std::invalid_argument("dt denominator is out of range");
    steps = steps * 10 + static_cast<std::size_t>(c - '0');
  }
  if (steps == 0) throw std::invalid_argument("dt denominator must be positive");
  return steps;
}

inline std::string dt_string(std::size_t steps) { return "tau/" + std::to_string(steps); }

struct RunConfig {
  io::json scenario;  // id string or inline definition object
  io::json params;    // overrides for id scenarios; must be empty for inline
  std::size_t n_paths = 1000;
  std::size_t dt_steps = 64;
  std::uint64_t seed = 0;
  std::optional<double> epsilon;
  std::vector<std::string> emit;
};

inline RunConfig parse_run_config(const io::json& j) {
  io::require_keys(j, {"scenario", "params", "n_paths", "dt", "seed", "epsilon", "emit"},
                   "config");
  RunConfig config;
  if (!j.contains("scenario")) {
    throw std::invalid_argument("config: missing field \"scenario\"");
  }
  config.scenario = j.at("scenario");
  if (!config.scenario.is_string() && !config.scenario.is_object()) {
    throw std::invalid_argument(
        "config: \"scenario\" must be a scenario id or an inline definition object");
  }
  config.params = j.contains("params") ? j.at("params") : io::json::object();
  io::require_object(config.params, "config.params");
  if (config.scenario.is_object() && !config.params.empty()) {
    throw std::invalid_argument(
        "config: inline scenarios carry their parameters inside \"scenario\"; \"params\" must "
        "be empty");
  }

  config.n_paths = static_cast<std::size_t>(
      j.contains("n_paths") ? io::get_uint(j, "n_paths", "config") : 1000);
  if (config.n_paths == 0) throw std::invalid_argument("config: n_paths must be at least 1");

  config.dt_steps = parse_dt_steps(
      j.contains("dt") ? io::get_string(j, "dt", "config") : std::string("tau/64"));

  // Reproducibility is the product: no wall-clock fallback, ever.
  config.seed = io::get_uint(j, "seed", "config");

  if (j.contains("epsilon")) {
    const double eps = io::get_double(j, "epsilon", "config");
    if (!(std::isfinite(eps) && eps >= 0.0)) {
      throw std::invalid_argument("config: epsilon must be finite and nonnegative");
    }
    config.epsilon = eps;
  }

  std::vector<std::string> requested = {"conditions", "ordering", "curve"};
  if (j.contains("emit")) {
    if (!j.at("emit").is_array()) {
      throw std::invalid_argument("config: \"emit\" must be an array of artifact kinds");
    }
    requested = j.at("emit").get<std::vector<std::string>>();
  }
  for (const auto& kind : requested) {
    if (std::find(emit_kinds().begin(), emit_kinds().end(), kind) == emit_kinds().end()) {
      std::string message = "config: unknown emit kind \"" + kind + "\" (valid:";
      for (const auto& k : emit_kinds()) message += " " + k;
      throw std::invalid_argument(message + ")");
    }
  }
  for (const auto& kind : emit_kinds()) {
    if (std::find(requested.begin(), requested.end(), kind) != requested.end()) {
      config.emit.push_back(kind);
    }
  }
  return config;
}

// A scenario ready to run: either a ComparisonPair, or the quarantined
// delayed-diffusion system that the hypothesis class rejects.
struct BuiltScenario {
  std::string id;
  std::optional<model::ComparisonPair> pair;
  std::optional<engine::GeneralCoefficients> general;
  model::SegmentPtr general_upper;
  model::SegmentPtr general_lower;
  std::optional<randomness::MarkSpace> general_space;
  std::string structural_reason;  // nonempty: outside the admissible class
  double tau = 0.0;
  double horizon = 0.0;
  double lipschitz = 0.0;
  double claim_hi = 0.0;
  bool diffusive = false;
  io::json canonical_params;
};

namespace detail {

inline model::MarkProfile profile_from_json(const io::json& j, model::MarkProfile fallback,
                                            const std::string& where) {
  if (j.is_null()) return fallback;
  io::require_keys(j, {"p", "q"}, where);
  return model::MarkProfile{io::get_double_or(j, "p", fallback.p, where),
                            io::get_double_or(j, "q", fallback.q, where)};
}

inline io::json profile_json(const model::MarkProfile& profile) {
  return io::json{{"p", profile.p}, {"q", profile.q}};
}

inline io::json field_or_null(const io::json& j, const std::string& key) {
  return j.contains(key) ? j.at(key) : io::json();
}

inline randomness::MarkSpace space_or(const io::json& j, const std::string& key,
                                      const randomness::MarkSpace& fallback,
                                      const std::string& where) {
  if (!j.contains(key)) return fallback;
  return io::mark_space_from_json(j.at(key), where + "." + key);
}

inline BuiltScenario build_ex2_3(const io::json& p) {
  io::require_keys(p, {"c", "tau", "horizon", "profile", "mark_space"}, "params");
  scenarios::Ex2_3Params params;
  params.c = io::get_double_or(p, "c", params.c, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.profile = profile_from_json(field_or_null(p, "profile"), params.profile,
                                     "params.profile");
  params.mark_space = space_or(p, "mark_space", params.mark_space, "params");
  auto scenario = scenarios::make_ex2_3(params);

  BuiltScenario built;
  built.id = "ex2_3";
  built.pair = std::move(scenario.pair);
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"c", params.c},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"profile", profile_json(params.profile)},
                            {"mark_space", io::to_json(params.mark_space)}};
  return built;
}

inline BuiltScenario build_ex2_4(const io::json& p) {
  io::require_keys(p, {"c", "tau", "horizon", "lambda"}, "params");
  scenarios::Ex2_4Params params;
  params.c = io::get_double_or(p, "c", params.c, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.lambda = io::get_double_or(p, "lambda", params.lambda, "params");
  auto scenario = scenarios::make_ex2_4(params);

  BuiltScenario built;
  built.id = "ex2_4";
  built.general = std::move(scenario.coefficients);
  built.general_upper = scenario.xi_upper;
  built.general_lower = scenario.xi_lower;
  built.general_space = scenario.mark_space;
  built.structural_reason = scenario.structural_reason;
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"c", params.c},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"lambda", params.lambda}};
  return built;
}

inline BuiltScenario build_ex2_5(const io::json& p) {
  io::require_keys(p, {"c", "tau", "horizon", "lambda"}, "params");
  scenarios::Ex2_5Params params;
  params.c = io::get_double_or(p, "c", params.c, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.lambda = io::get_double_or(p, "lambda", params.lambda, "params");
  auto scenario = scenarios::make_ex2_5(params);

  BuiltScenario built;
  built.id = "ex2_5";
  built.pair = std::move(scenario.pair);
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"c", params.c},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"lambda", params.lambda}};
  return built;
}

inline BuiltScenario build_ex3_2(const io::json& p) {
  io::require_keys(p,
                   {"a", "b", "c0", "delta", "sigma", "rho", "xi_upper", "xi_lower", "tau",
                    "horizon", "mark_space"},
                   "params");
  scenarios::Ex3_2Params params;
  params.a = io::get_double_or(p, "a", params.a, "params");
  params.b = io::get_double_or(p, "b", params.b, "params");
  params.c0 = io::get_double_or(p, "c0", params.c0, "params");
  params.delta = io::get_double_or(p, "delta", params.delta, "params");
  params.sigma = io::get_double_or(p, "sigma", params.sigma, "params");
  params.rho = profile_from_json(field_or_null(p, "rho"), params.rho, "params.rho");
  params.xi_upper = io::get_double_or(p, "xi_upper", params.xi_upper, "params");
  params.xi_lower = io::get_double_or(p, "xi_lower", params.xi_lower, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.mark_space = space_or(p, "mark_space", params.mark_space, "params");
  auto scenario = scenarios::make_ex3_2(params);

  BuiltScenario built;
  built.id = "ex3_2";
  built.pair = std::move(scenario.pair);
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"a", params.a},
                            {"b", params.b},
                            {"c0", params.c0},
                            {"delta", params.delta},
                            {"sigma", params.sigma},
                            {"rho", profile_json(params.rho)},
                            {"xi_upper", params.xi_upper},
                            {"xi_lower", params.xi_lower},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"mark_space", io::to_json(params.mark_space)}};
  return built;
}

inline BuiltScenario build_affine_theorem(const io::json& p) {
  io::require_keys(p,
                   {"a", "b", "c0", "delta", "sigma", "kappa", "mu", "jump_c", "xi_upper",
                    "xi_lower", "tau", "horizon", "mark_space"},
                   "params");
  scenarios::AffineTheoremParams params;
  params.a = io::get_double_or(p, "a", params.a, "params");
  params.b = io::get_double_or(p, "b", params.b, "params");
  params.c0 = io::get_double_or(p, "c0", params.c0, "params");
  params.delta = io::get_double_or(p, "delta", params.delta, "params");
  params.sigma = io::get_double_or(p, "sigma", params.sigma, "params");
  params.kappa = io::get_double_or(p, "kappa", params.kappa, "params");
  params.mu = io::get_double_or(p, "mu", params.mu, "params");
  params.jump_c = io::get_double_or(p, "jump_c", params.jump_c, "params");
  params.xi_upper = io::get_double_or(p, "xi_upper", params.xi_upper, "params");
  params.xi_lower = io::get_double_or(p, "xi_lower", params.xi_lower, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.mark_space = space_or(p, "mark_space", params.mark_space, "params");
  auto scenario = scenarios::make_affine_theorem(params);

  BuiltScenario built;
  built.id = "affine_theorem";
  built.pair = std::move(scenario.pair);
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"a", params.a},
                            {"b", params.b},
                            {"c0", params.c0},
                            {"delta", params.delta},
                            {"sigma", params.sigma},
                            {"kappa", params.kappa},
                            {"mu", params.mu},
                            {"jump_c", params.jump_c},
                            {"xi_upper", params.xi_upper},
                            {"xi_lower", params.xi_lower},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"mark_space", io::to_json(params.mark_space)}};
  return built;
}

inline BuiltScenario build_lemma_pure_jump(const io::json& p) {
  io::require_keys(p,
                   {"a", "c0", "delta", "sigma", "kappa", "eta", "x_upper", "x_lower", "tau",
                    "horizon", "mark_space"},
                   "params");
  scenarios::LemmaPureJumpParams params;
  params.a = io::get_double_or(p, "a", params.a, "params");
  params.c0 = io::get_double_or(p, "c0", params.c0, "params");
  params.delta = io::get_double_or(p, "delta", params.delta, "params");
  params.sigma = io::get_double_or(p, "sigma", params.sigma, "params");
  params.kappa = io::get_double_or(p, "kappa", params.kappa, "params");
  params.eta = io::get_double_or(p, "eta", params.eta, "params");
  params.x_upper = io::get_double_or(p, "x_upper", params.x_upper, "params");
  params.x_lower = io::get_double_or(p, "x_lower", params.x_lower, "params");
  params.tau = io::get_double_or(p, "tau", params.tau, "params");
  params.horizon = io::get_double_or(p, "horizon", params.horizon, "params");
  params.mark_space = space_or(p, "mark_space", params.mark_space, "params");
  auto scenario = scenarios::make_lemma_pure_jump(params);

  BuiltScenario built;
  built.id = "lemma_pure_jump";
  built.pair = std::move(scenario.pair);
  built.tau = params.tau;
  built.horizon = params.horizon;
  built.lipschitz = scenario.lipschitz;
  built.claim_hi = scenario.claim_hi;
  built.diffusive = scenario.diffusive;
  built.canonical_params = {{"a", params.a},
                            {"c0", params.c0},
                            {"delta", params.delta},
                            {"sigma", params.sigma},
                            {"kappa", params.kappa},
                            {"eta", params.eta},
                            {"x_upper", params.x_upper},
                            {"x_lower", params.x_lower},
                            {"tau", params.tau},
                            {"horizon", params.horizon},
                            {"mark_space", io::to_json(params.mark_space)}};
  return built;
}

// --- inline scenario definitions ---------------------------------------------

struct InlineJump {
  model::JumpFn fn;
  io::json canonical;
};

inline InlineJump jump_from_json(const io::json& j, const std::string& where) {
  if (j.is_null()) {
    return InlineJump{model::zero_jump(), io::json{{"kind", "zero"}}};
  }
  const std::string kind = io::get_string(j, "kind", where);
  if (kind == "zero") {
    io::require_keys(j, {"kind"}, where);
    return InlineJump{model::zero_jump(), io::json{{"kind", "zero"}}};
  }
  if (kind == "linear") {
    io::require_keys(j, {"kind", "kappa", "mu", "c"}, where);
    model::LinearJump jump{io::get_double_or(j, "kappa", 0.0, where),
                           io::get_double_or(j, "mu", 0.0, where),
                           io::get_double_or(j, "c", 0.0, where)};
    return InlineJump{jump.fn(),
                      io::json{{"kind", "linear"},
                               {"kappa", jump.kappa},
                               {"mu", jump.mu},
                               {"c", jump.c}}};
  }
  if (kind == "mark_scaled") {
    io::require_keys(j, {"kind", "profile", "alpha", "beta", "c"}, where);
    model::MarkScaledJump jump{
        profile_from_json(field_or_null(j, "profile"), model::MarkProfile{1.0, 0.0},
                          where + ".profile"),
        io::get_double_or(j, "alpha", 0.0, where), io::get_double_or(j, "beta", 0.0, where),
        io::get_double_or(j, "c", 0.0, where)};
    return InlineJump{jump.fn(),
                      io::json{{"kind", "mark_scaled"},
                               {"profile", profile_json(jump.profile)},
                               {"alpha", jump.alpha},
                               {"beta", jump.beta},
                               {"c", jump.c}}};
  }
  if (kind == "indicator_gated") {
    io::require_keys(j, {"kind", "scale"}, where);
    model::IndicatorGatedJump jump{io::get_double_or(j, "scale", 1.0, where)};
    return InlineJump{jump.fn(), io::json{{"kind", "indicator_gated"}, {"scale", jump.scale}}};
  }
  throw std::invalid_argument(where + ": unknown jump kind \"" + kind +
                              "\" (valid: zero, linear, mark_scaled, indicator_gated)");
}

struct InlineMember {
  model::CoefficientSet coeffs;
  model::SegmentPtr xi;
  io::json canonical;
  bool has_diffusion = false;
};

inline InlineMember member_from_json(const io::json& j, double tau,
                                     const randomness::MarkSpace& space,
                                     const std::string& where) {
  io::require_keys(j, {"drift", "diffusion", "jump", "xi"}, where);
  model::AffineDrift drift;
  if (j.contains("drift")) {
    io::require_keys(j.at("drift"), {"a", "b", "c"}, where + ".drift");
    drift.a = io::get_double_or(j.at("drift"), "a", 0.0, where + ".drift");
    drift.b = io::get_double_or(j.at("drift"), "b", 0.0, where + ".drift");
    drift.c = io::get_double_or(j.at("drift"), "c", 0.0, where + ".drift");
  }
  model::LinearDiffusion diffusion;
  if (j.contains("diffusion")) {
    io::require_keys(j.at("diffusion"), {"sigma", "c"}, where + ".diffusion");
    diffusion.sigma = io::get_double_or(j.at("diffusion"), "sigma", 0.0, where + ".diffusion");
    diffusion.c = io::get_double_or(j.at("diffusion"), "c", 0.0, where + ".diffusion");
  }
  const auto jump = jump_from_json(field_or_null(j, "jump"), where + ".jump");
  if (!j.contains("xi")) {
    throw std::invalid_argument(where + ": missing initial segment \"xi\"");
  }

  InlineMember member;
  member.coeffs.drift = drift.fn();
  member.coeffs.diffusion = diffusion.fn();
  member.coeffs.jump = jump.fn;
  member.coeffs.mark_space = space;
  member.xi = io::segment_from_json(j.at("xi"), tau, where + ".xi");
  member.has_diffusion = diffusion.sigma != 0.0 || diffusion.c != 0.0;
  member.canonical = {
      {"drift", io::json{{"a", drift.a}, {"b", drift.b}, {"c", drift.c}}},
      {"diffusion", io::json{{"sigma", diffusion.sigma}, {"c", diffusion.c}}},
      {"jump", jump.canonical},
      {"xi", io::to_json(*member.xi)}};
  return member;
}

inline BuiltScenario build_inline(const io::json& j) {
  io::require_keys(j,
                   {"tau", "horizon", "jump_form", "mark_space", "upper", "lower", "shared_jump",
                    "lipschitz"},
                   "scenario");
  const double tau = io::get_double(j, "tau", "scenario");
  const double horizon = io::get_double(j, "horizon", "scenario");
  const std::string form_name = io::get_string(j, "jump_form", "scenario");
  model::JumpForm form;
  if (form_name == "pure") {
    form = model::JumpForm::kPure;
  } else if (form_name == "compensated") {
    form = model::JumpForm::kCompensated;
  } else {
    throw std::invalid_argument("scenario: jump_form must be \"pure\" or \"compensated\"");
  }
  if (!j.contains("mark_space")) {
    throw std::invalid_argument("scenario: missing field \"mark_space\"");
  }
  const auto space = io::mark_space_from_json(j.at("mark_space"), "scenario.mark_space");
  if (!j.contains("upper") || !j.contains("lower")) {
    throw std::invalid_argument("scenario: inline definitions need \"upper\" and \"lower\"");
  }
  auto upper = member_from_json(j.at("upper"), tau, space, "scenario.upper");
  auto lower = member_from_json(j.at("lower"), tau, space, "scenario.lower");

  bool shared_jump = upper.canonical.at("jump") == lower.canonical.at("jump");
  if (j.contains("shared_jump")) {
    if (!j.at("shared_jump").is_boolean()) {
      throw std::invalid_argument("scenario: shared_jump must be a boolean");
    }
    shared_jump = j.at("shared_jump").get<bool>();
  }

  auto upper_problem = model::make_problem(upper.coeffs, upper.xi, tau, horizon, form);
  auto lower_problem = model::make_problem(lower.coeffs, lower.xi, tau, horizon, form);

  double lipschitz = 0.0;
  if (j.contains("lipschitz")) {
    lipschitz = io::get_double(j, "lipschitz", "scenario");
    if (!(std::isfinite(lipschitz) && lipschitz > 0.0)) {
      throw std::invalid_argument("scenario: lipschitz must be positive");
    }
  } else {
    // Sampled square-gain estimate; deterministic for the fixed probe seed.
    const auto up_report = model::validate_problem(upper_problem, 400);
    const auto low_report = model::validate_problem(lower_problem, 400);
    lipschitz = std::max(up_report.lipschitz_estimate, low_report.lipschitz_estimate);
    if (lipschitz <= 0.0) lipschitz = 1.0;  // all-constant coefficients
  }

  BuiltScenario built;
  built.id = "inline";
  built.pair = model::make_comparison_pair(std::move(upper_problem), std::move(lower_problem),
                                           shared_jump);
  built.tau = tau;
  built.horizon = horizon;
  built.lipschitz = lipschitz;
  built.claim_hi = horizon;
  built.diffusive = upper.has_diffusion || lower.has_diffusion;
  built.canonical_params = {{"tau", tau},
                            {"horizon", horizon},
                            {"jump_form", form_name},
                            {"mark_space", io::to_json(space)},
                            {"upper", upper.canonical},
                            {"lower", lower.canonical},
                            {"shared_jump", shared_jump},
                            {"lipschitz", lipschitz}};
  return built;
}

}  // namespace detail

inline BuiltScenario build_scenario(const io::json& scenario, const io::json& params) {
  if (scenario.is_object()) return detail::build_inline(scenario);
  const std::string id = scenario.get<std::string>();
  const auto parsed = scenarios::parse_scenario_id(id);
  if (!parsed) {
    std::string message = "unknown scenario id \"" + id + "\" (valid:";
    for (const auto& name : scenarios::scenario_names()) message += " " + name;
    throw std::invalid_argument(message + ", or an inline definition object)");
  }
  switch (*parsed) {
    case scenarios::ScenarioId::kEx2_3: return detail::build_ex2_3(params);
    case scenarios::ScenarioId::kEx2_4: return detail::build_ex2_4(params);
    case scenarios::ScenarioId::kEx2_5: return detail::build_ex2_5(params);
    case scenarios::ScenarioId::kEx3_2: return detail::build_ex3_2(params);
    case scenarios::ScenarioId::kAffineTheorem: return detail::build_affine_theorem(params);
    case scenarios::ScenarioId::kLemmaPureJump: return detail::build_lemma_pure_jump(params);
  }
  throw std::logic_error("unreachable scenario id");
}

// Echo of everything that determines the run's outputs. out_dir and thread
// count are deliberately excluded: they change where and how fast, never what.
inline io::json canonical_config(const RunConfig& config, const BuiltScenario& built,
                                 double resolved_epsilon) {
  io::json j;
  if (built.id == "inline") {
    j["scenario"] = built.canonical_params;
  } else {
    j["scenario"] = built.id;
    j["params"] = built.canonical_params;
  }
  j["n_paths"] = config.n_paths;
  j["dt"] = dt_string(config.dt_steps);
  j["seed"] = config.seed;
  j["epsilon"] = resolved_epsilon;
  j["emit"] = config.emit;
  return j;
}

// Thread resolution for the front door: explicit flag, then the environment,
// then single-threaded.
inline int resolve_thread_request(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SDDE_LAB_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && parsed > 0 && parsed < 4096) {
      return static_cast<int>(parsed);
    }
    throw std::invalid_argument("SDDE_LAB_THREADS must be a small positive integer");
  }
  return 1;
}

struct RunOutcome {
  int exit_code = 0;
  io::json summary;
  std::vector<std::string> artifacts;
};

namespace detail {

inline bool wants(const RunConfig& config, const std::string& kind) {
  return std::find(config.emit.begin(), config.emit.end(), kind) != config.emit.end();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline io::json estimate_json(const scenarios::Estimate& e) {
  return io::json{{"estimate", e.value}, {"stderr", e.stderr_mean}, {"n_paths", e.n_paths}};
}

// Closed-form cross-checks for the scenarios that have one; reported in the
// summary so a run is self-certifying.
inline io::json oracle_block(const BuiltScenario& built, const RunConfig& config,
                             const engine::GridSpec& grid, const randomness::RngPolicy& policy,
                             int threads) {
  if (built.id == "ex2_3") {
    auto scenario = scenarios::make_ex2_3(scenarios::Ex2_3Params{
        io::get_double(built.canonical_params, "c", "params"),
        io::get_double(built.canonical_params, "tau", "params"),
        io::get_double(built.canonical_params, "horizon", "params"),
        profile_from_json(built.canonical_params.at("profile"), {}, "params.profile"),
        io::mark_space_from_json(built.canonical_params.at("mark_space"), "params.mark_space")});
    const auto report = scenarios::ex2_3_oracle_deviation(scenario, config.n_paths, grid, policy);
    return io::json{{"kind", "first_window_closed_form"},
                    {"max_abs_error", report.max_abs_error},
                    {"lower_stays_negative", report.lower_stays_negative},
                    {"upper_stays_zero", report.upper_stays_zero},
                    {"n_paths", report.n_paths}};
  }
  if (built.id == "ex2_5") {
    auto scenario = scenarios::make_ex2_5(scenarios::Ex2_5Params{
        io::get_double(built.canonical_params, "c", "params"),
        io::get_double(built.canonical_params, "tau", "params"),
        io::get_double(built.canonical_params, "horizon", "params"),
        io::get_double(built.canonical_params, "lambda", "params")});
    const auto estimate = scenarios::ex2_5_positive_probability(scenario, built.tau,
                                                                config.n_paths, grid, policy,
                                                                threads);
    io::json j{{"kind", "positive_probability_at_delay"}};
    j.update(estimate_json(estimate));
    j["exact"] = scenario.exact_positive_probability(built.tau);
    return j;
  }
  if (built.id == "ex2_4") {
    auto scenario = scenarios::make_ex2_4(scenarios::Ex2_4Params{
        io::get_double(built.canonical_params, "c", "params"),
        io::get_double(built.canonical_params, "tau", "params"),
        io::get_double(built.canonical_params, "horizon", "params"),
        io::get_double(built.canonical_params, "lambda", "params")});
    const auto report = scenarios::ex2_4_positivity(scenario, config.n_paths, grid, policy,
                                                    threads);
    return io::json{{"kind", "sign_flip_frequency"},
                    {"any_positive", estimate_json(report.any_positive)},
                    {"brownian_below", estimate_json(report.brownian_below)},
                    {"continuous_reference", report.continuous_reference},
                    {"oracle_max_error", report.oracle_max_error},
                    {"upper_stays_zero", report.upper_stays_zero}};
  }
  return io::json();
}

}  // namespace detail

inline RunOutcome run(const RunConfig& config, const std::filesystem::path& out_dir,
                      int threads) {
  auto built = build_scenario(config.scenario, config.params);
  const engine::GridSpec grid(built.tau, config.dt_steps, built.horizon);
  const double epsilon = config.epsilon.value_or(built.diffusive ? grid.dt() : 0.0);
  const randomness::RngPolicy policy{config.seed};
  const bool structural = !built.structural_reason.empty();

  std::filesystem::create_directories(out_dir);

  // Hypothesis verdicts, always.
  conditions::ConditionReport condition_report =
      structural ? conditions::structurally_rejected(built.structural_reason)
                 : conditions::evaluate_pair(
                       *built.pair, conditions::make_domain_sample(*built.pair, kConditionDraws,
                                                                   config.seed));

  // Ordering statistics over the scenario's claim window, always: the
  // violation probability is the headline number of every run.
  comparison::TimeWindow window;
  window.hi = built.claim_hi;
  comparison::OrderingReport ordering_report;
  if (structural) {
    ordering_report = comparison::detail::ordering_core(
        comparison::detail::SystemView{*built.general, built.general_upper},
        comparison::detail::SystemView{*built.general, built.general_lower},
        *built.general_space, config.n_paths, grid, policy, epsilon, window, threads);
  } else {
    ordering_report = comparison::ordering_statistics(*built.pair, config.n_paths, grid, policy,
                                                      epsilon, window, threads);
  }

  RunOutcome outcome;
  outcome.exit_code = (structural || !condition_report.all_passed()) ? 2 : 0;

  io::json summary;
  summary["schema"] = std::string(kReportSchema);
  summary["library"] = {{"name", std::string(kLibraryName)},
                        {"version", std::string(kLibraryVersion)}};
  summary["config"] = canonical_config(config, built, epsilon);
  summary["seed"] = config.seed;
  summary["scenario"] = {{"id", built.id},
                         {"tau", built.tau},
                         {"horizon", built.horizon},
                         {"claim_window", io::json{{"lo", 0.0}, {"hi", built.claim_hi}}},
                         {"diffusive", built.diffusive},
                         {"lipschitz", built.lipschitz}};
  summary["conditions"] = {{"structural_rejection", condition_report.structural_rejection},
                           {"verdicts", io::verdict_map(condition_report)},
                           {"all_passed", condition_report.all_passed()}};
  if (condition_report.structural_rejection) {
    summary["conditions"]["structural_reason"] = condition_report.structural_reason;
  }
  summary["ordering"] = io::to_json(ordering_report, /*include_curve=*/false);

  const auto oracle = detail::oracle_block(built, config, grid, policy, threads);
  if (!oracle.is_null()) summary["oracle"] = oracle;

  if (detail::wants(config, "conditions")) {
    detail::write_text_file(out_dir / "conditions.json",
                            io::to_json(condition_report).dump(2) + "\n");
    outcome.artifacts.push_back("conditions.json");
  }
  if (detail::wants(config, "ordering")) {
    detail::write_text_file(out_dir / "ordering.json",
                            io::to_json(ordering_report, /*include_curve=*/true).dump(2) + "\n");
    outcome.artifacts.push_back("ordering.json");
  }
  if (detail::wants(config, "curve")) {
    std::ofstream csv(out_dir / "curve_positive_part.csv");
    if (!csv) throw std::runtime_error("cannot open curve_positive_part.csv for writing");
    io::write_curve_csv(ordering_report.positive_part_curve, csv);
    outcome.artifacts.push_back("curve_positive_part.csv");
  }
  if (detail::wants(config, "tower")) {
    io::json tower_json;
    if (structural) {
      tower_json = {{"skipped", built.structural_reason}};
    } else {
      comparison::IterationConfig iteration;
      iteration.lipschitz = built.lipschitz > 0.0 ? built.lipschitz : 1.0;
      const auto tower = comparison::picard_tower_report(*built.pair, config.n_paths, grid,
                                                         policy, iteration, threads);
      tower_json = io::to_json(tower);
    }
    detail::write_text_file(out_dir / "tower.json", tower_json.dump(2) + "\n");
    summary["tower"] = tower_json;
    outcome.artifacts.push_back("tower.json");
  }
  if (detail::wants(config, "paths")) {
    const std::size_t count = std::min<std::size_t>(kPathExportCount, config.n_paths);
    const auto& space = structural ? *built.general_space
                                   : built.pair->upper.coefficients.mark_space;
    for (std::size_t i = 0; i < count; ++i) {
      const auto noise = engine::realize_noise(policy, i, space, grid);
      engine::PathRecord upper_record =
          structural
              ? engine::integrate_general(*built.general, built.general_upper, noise, grid)
              : engine::integrate_path(built.pair->upper, noise, grid);
      engine::PathRecord lower_record =
          structural
              ? engine::integrate_general(*built.general, built.general_lower, noise, grid)
              : engine::integrate_path(built.pair->lower, noise, grid);
      const std::string stem = "paths_" + std::to_string(i);
      for (const auto& [suffix, record] :
           {std::pair<const char*, const engine::PathRecord*>{"upper", &upper_record},
            std::pair<const char*, const engine::PathRecord*>{"lower", &lower_record}}) {
        std::ofstream csv(out_dir / (stem + "_" + suffix + ".csv"));
        if (!csv) throw std::runtime_error("cannot open path CSV for writing");
        engine::write_path_csv(*record, csv);
        outcome.artifacts.push_back(stem + "_" + suffix + ".csv");
      }
    }
  }

  summary["artifacts"] = outcome.artifacts;
  summary["exit_code"] = outcome.exit_code;
  detail::write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
  outcome.summary = std::move(summary);
  return outcome;
}

}  // namespace sdde::cli
