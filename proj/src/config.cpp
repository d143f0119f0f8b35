#include "quasidiag/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "quasidiag/errors.hpp"

namespace quasidiag {

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& where = "") {
  std::string name = where.empty() ? key : where + "." + key;
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing required field '" + name + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& v, const std::string& name) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + name + "' has the wrong type");
  }
}

template <class T>
T required(const json& j, const std::string& key, const std::string& where = "") {
  return get_as<T>(require(j, key, where), where.empty() ? key : where + "." + key);
}

template <class T>
void optional(const json& j, const std::string& key, T& into) {
  if (j.contains(key)) into = get_as<T>(j.at(key), key);
}

PotentialSpec parse_potential(const json& j) {
  std::string kind = required<std::string>(j, "kind", "potential");
  double alpha = 1.0;
  if (j.contains("alpha")) alpha = get_as<double>(j.at("alpha"), "potential.alpha");
  Interpolation interp = Interpolation::Linear;
  if (j.contains("interpolation")) {
    std::string s = get_as<std::string>(j.at("interpolation"), "potential.interpolation");
    if (s == "linear") interp = Interpolation::Linear;
    else if (s == "step") interp = Interpolation::Step;
    else throw ConfigError("field 'potential.interpolation' must be 'linear' or 'step'");
  }
  if (kind == "sawtooth") {
    double power = 1.0;
    if (j.contains("power")) power = get_as<double>(j.at("power"), "potential.power");
    if (!(power > 0)) throw ConfigError("field 'potential.power' must be positive");
    return PotentialSpec::sawtooth(power, alpha);
  }
  if (kind == "maryland") return PotentialSpec::maryland(alpha);
  if (kind == "table") {
    if (j.contains("csv")) return PotentialSpec::table_from_csv(get_as<std::string>(j.at("csv"), "potential.csv"), alpha, interp);
    auto xs = required<std::vector<double>>(j, "x", "potential");
    auto fs = required<std::vector<double>>(j, "f", "potential");
    return PotentialSpec::table(xs, fs, alpha, interp);
  }
  throw ConfigError("field 'potential.kind' must be sawtooth, maryland or table");
}

}  // namespace

std::vector<std::string> RunConfig::notes() const {
  std::vector<std::string> out;
  if (!scheme.parameter_order_ok())
    out.push_back("magn(1) < 1: M is not large relative to 1/beta, so the order monitors are not in their regime");
  if (!(scheme.eps * magn(1, scheme.M, scheme.beta, scheme.gamma()) < 1.0))
    out.push_back("eps * magn(1) >= 1: eps is not small relative to M");
  return out;
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  SchemeParams& p = c.scheme;
  p.potential = parse_potential(require(j, "potential"));
  const json& fj = require(j, "frequency");
  p.freq.omega = required<std::vector<double>>(fj, "omega", "frequency");
  p.freq.rho = required<double>(fj, "rho", "frequency");
  p.freq.mu = required<double>(fj, "mu", "frequency");
  p.eps = required<double>(j, "eps");
  p.delta = required<double>(j, "delta");
  p.beta = required<double>(j, "beta");
  p.M = required<double>(j, "M");
  p.s_max = required<int>(j, "s_max");
  c.box_radius = required<int>(j, "box_radius");
  c.x0 = required<double>(j, "x0");

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    optional(t, "dominance_margin", p.dominance_margin);
    optional(t, "residual_target", p.residual_target);
    optional(t, "monotone_tol", c.monotone_tol);
    optional(t, "lipschitz_eta", c.lipschitz_eta);
    optional(t, "min_gap_width", c.min_gap_width);
    optional(t, "gap_stability", c.gap_stability);
    optional(t, "branch_floor", c.branch_floor);
    optional(t, "oracle_energy", c.oracle_energy_tol);
    optional(t, "oracle_alignment", c.oracle_alignment_tol);
    optional(t, "family_orthogonality", c.family_orthogonality_tol);
  }
  optional(j, "stop_early", p.stop_early);
  optional(j, "enforce_conv3", p.enforce_conv3);
  optional(j, "ind2_grid", p.ind2_grid);
  optional(j, "phase_grid", c.phase_grid);
  optional(j, "family_radius", c.family_radius);
  optional(j, "decay_radius", c.decay_radius);
  optional(j, "box_sizes", c.box_sizes);
  optional(j, "ids_phases", c.ids_phases);
  optional(j, "gap_phases", c.gap_phases);
  optional(j, "t_count", c.t_count);
  optional(j, "t_span", c.t_span);
  optional(j, "rank_one_sites", c.rank_one_sites);
  optional(j, "min_gaps", c.min_gaps);
  optional(j, "diophantine_N", c.diophantine_N);
  optional(j, "holder_grid", c.holder_grid);
  optional(j, "region_n_max", c.region_n_max);
  optional(j, "region_s_max", c.region_s_max);
  optional(j, "absorption_k2_max", c.absorption_k2_max);
  optional(j, "absorption_M", c.absorption_M);
  optional(j, "monotone_pairs", c.monotone_pairs);
  optional(j, "branch_phases", c.branch_phases);
  optional(j, "out_dir", c.out_dir);
  optional(j, "workers", c.workers);
  optional(j, "seed", c.seed);

  p.validate();
  for (double w : p.freq.omega)
    if (!std::isfinite(w)) throw ConfigError("field 'frequency.omega' must be finite");
  if (!(p.freq.rho > 0)) throw ConfigError("field 'frequency.rho' must be positive");
  if (c.box_radius < 3 * p.s_max + 2)
    throw ConfigError("field 'box_radius' must be at least 3*s_max+2 = " + std::to_string(3 * p.s_max + 2));
  if (c.phase_grid < 2) throw ConfigError("field 'phase_grid' must be at least 2");
  if (c.box_sizes.empty()) throw ConfigError("field 'box_sizes' must not be empty");
  for (int L : c.box_sizes)
    if (L < 2) throw ConfigError("field 'box_sizes' entries must be at least 2");
  if (c.ids_phases < 1 || c.gap_phases < 1) throw ConfigError("phase counts must be positive");
  if (c.t_count < 1) throw ConfigError("field 't_count' must be positive");
  if (c.rank_one_sites < 1) throw ConfigError("field 'rank_one_sites' must be positive");
  if (c.workers < 1) throw ConfigError("field 'workers' must be positive");
  if (!(c.min_gap_width > 0)) throw ConfigError("field 'tolerances.min_gap_width' must be positive");
  if (c.absorption_M < 0) throw ConfigError("field 'absorption_M' must be non-negative");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = parse_config(j);
  c.raw_text = ss.str();
  return c;
}

json config_to_json(const RunConfig& c) {
  const SchemeParams& p = c.scheme;
  json pot = {{"name", p.potential.name()}, {"alpha", p.potential.alpha}};
  return {{"potential", pot},
          {"frequency", {{"omega", p.freq.omega}, {"rho", p.freq.rho}, {"mu", p.freq.mu}}},
          {"eps", p.eps},
          {"delta", p.delta},
          {"beta", p.beta},
          {"M", p.M},
          {"s_max", p.s_max},
          {"box_radius", c.box_radius},
          {"x0", c.x0},
          {"workers", c.workers},
          {"seed", c.seed}};
}

}  // namespace quasidiag
