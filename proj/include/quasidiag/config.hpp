#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "quasidiag/model.hpp"
#include "quasidiag/scheme.hpp"

namespace quasidiag {

struct RunConfig {
  SchemeParams scheme;  // potential, frequency, eps, delta, beta, M, s_max, tolerances
  int box_radius = 0;
  double x0 = 0.0;

  // grids
  int phase_grid = 64;        // E(x) table and monotonicity
  int family_radius = 4;      // eigen_family sites |n| <= this
  int decay_radius = 8;
  std::vector<int> box_sizes{400, 800};
  int ids_phases = 64;
  int gap_phases = 256;
  int t_count = 100;
  double t_span = 2.0;
  int rank_one_sites = 200;

  // tolerances and thresholds
  double monotone_tol = 1e-10;
  double lipschitz_eta = 0.05;
  double min_gap_width = 1e-4;
  double gap_stability = 1e-3;
  int min_gaps = 3;
  double branch_floor = 1e-10;
  double oracle_energy_tol = 1e-10;
  double oracle_alignment_tol = 1e-9;
  double family_orthogonality_tol = 1e-10;

  // verify suite sizes
  int diophantine_N = 50;
  int holder_grid = 256;
  int region_n_max = 50;
  int region_s_max = 8;
  int absorption_k2_max = 30;
  double absorption_M = 0.0;  // 0 means use M
  int monotone_pairs = 32;
  int branch_phases = 8;

  std::string out_dir = "out";
  int workers = 1;
  std::uint64_t seed = 0;

  std::string raw_text;  // exact bytes read, hashed into the manifest

  LatticeBox ambient() const { return LatticeBox::centered(scheme.freq.dim(), box_radius); }
  std::vector<std::string> notes() const;  // parameter-order remarks
};

// throws ConfigError naming the offending field
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& c);

}  // namespace quasidiag
