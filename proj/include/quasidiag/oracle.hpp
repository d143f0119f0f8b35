#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "quasidiag/model.hpp"
#include "quasidiag/scheme.hpp"

namespace quasidiag {

struct EigenResult {
  std::vector<double> values;  // ascending, a deflated site first as -inf
  Eigen::MatrixXd vectors;     // columns
  int sweeps = 0;
  int infinite_site = -1;
};

// cyclic Jacobi; at most one -inf diagonal entry, which is deflated
EigenResult dense_eig(const Eigen::MatrixXd& A, int max_sweeps = 50);
EigenResult dense_eig(const SymOperator& A, int max_sweeps = 50);

// max |A - V diag V^T| over the finite block, and max |V^T V - 1|
double reconstruction_error(const Eigen::MatrixXd& A, const EigenResult& r);
double orthonormality_error(const EigenResult& r);
double max_residual(const Eigen::MatrixXd& A, const EigenResult& r);

// eigenvalues only, via Eigen (tridiagonal path for d = 1)
std::vector<double> spectrum_values(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                                    const LatticeBox& box);

double multiset_distance(std::vector<double> a, std::vector<double> b);

struct Branch {
  Site n;
  double phase = 0.0;
  double E = 0.0;
  Eigen::VectorXd v;
};

struct BranchTable {
  LatticeBox box;
  double x = 0.0;
  std::vector<Branch> branches;  // ascending phase, hence ascending E
  const Branch& at(const Site& n) const;
};

BranchTable label_branches(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                           const LatticeBox& box);

// E_m <= E_n iff {x+m.w} <= {x+n.w} for every pair, with no ties
bool pairing_consistent(const BranchTable& t);

// E_n on `points` phases inside the continuity interval [-n.w, -n.w + 1)
std::vector<double> branch_on_grid(const PotentialSpec& spec, double eps, const Frequency& freq,
                                   const LatticeBox& box, const Site& n, int points);

struct BranchDistanceReport {
  double x = 0.0;
  int s = 0;
  double f_value = 0.0;
  double E0 = 0.0;
  double distance = 0.0;
  double log_bound = 0.0;  // log(3^d eps^{s+2} magn(s+2))
  double tolerance = 0.0;  // max(bound, floor)
  bool ok = false;
  int domain_size = 0;
};

// Lambda_{s+1}: union over sampled x in I_{s+1} of the extended region of 0 at step s+1
SiteSet theorem_domain(const SchemeParams& p, double x0, int s, const LatticeBox& ambient, int grid = 64);

// throws DomainConditionViolated unless the domain contains the region of 0, avoids the other
// regions and keeps ||n.w|| >= 10 |I_{s+1}| off the origin
void check_domain(const SchemeParams& p, double x0, int s, const LatticeBox& ambient, const SiteSet& domain,
                  int grid = 64);

BranchDistanceReport branch_distance_check(const SchemeParams& p, double x0, double x, int s,
                                           const LatticeBox& ambient, const SiteSet& domain, double floor = 1e-10);

struct MonotoneGridReport {
  std::vector<double> xs;
  std::vector<double> E;
  long violations = 0;
  long lipschitz_pairs = 0;
  long lipschitz_violations = 0;
  double worst_lipschitz_ratio = std::numeric_limits<double>::infinity();
};

// E(x) = run_scheme at x0 = x; pairs checked for E(y) - E(x) >= (1 - eta)(y - x) when eta is given
MonotoneGridReport eigenvalue_function(const SchemeParams& p, const std::vector<double>& xs,
                                       const LatticeBox& ambient, double tol = 1e-10,
                                       std::optional<double> eta = std::nullopt, int workers = 1);

LatticeBox box_with_sites(int dim, int sites);
std::vector<double> uniform_phases(int count);

struct IdsTable {
  std::vector<int> box_sizes;
  std::vector<double> E_grid;
  std::vector<std::vector<double>> N;  // [box][energy]
};

IdsTable ids(const PotentialSpec& spec, double eps, const Frequency& freq, const std::vector<int>& box_sizes,
             const std::vector<double>& E_grid, int phases = 64, int workers = 1);

struct Gap {
  double left = 0.0;
  double right = 0.0;
  double width() const { return right - left; }
};

struct SpectrumReport {
  std::vector<int> box_sizes;
  std::vector<std::vector<double>> spectra;  // union over phases, per box
  std::vector<std::vector<Gap>> raw_gaps;    // per box
  std::vector<Gap> gaps;                     // stable ones, endpoints from the largest box
  double stability_tol = 0.0;
  double min_width = 0.0;
  int phases = 0;
};

SpectrumReport gap_detect(const PotentialSpec& spec, double eps, const Frequency& freq,
                          const std::vector<int>& box_sizes, double min_width, double stability_tol = 1e-3,
                          int phases = 256, int workers = 1);

// gaps of width >= min_width between consecutive sorted values, inside [min, max]
std::vector<Gap> find_gaps(const std::vector<double>& sorted, double min_width);

struct RankOneTrace {
  std::vector<double> t_grid;                 // arc order through infinity
  std::vector<std::vector<double>> spectra;   // per t, ascending, +inf slot at t = inf
  std::vector<std::vector<double>> trajectories;  // [trajectory][t]
  long monotonicity_violations = 0;
  std::vector<Gap> gaps;
  std::vector<int> witnessed;                 // per gap: index into t_grid or -1
  std::vector<double> witness_value;
};

// t grid in arc order [f(1-0), inf) then inf then (-inf, f(0)]
std::vector<double> arc_t_grid(const PotentialSpec& spec, int count, double span = 2.0);

RankOneTrace rank_one_sweep(const PotentialSpec& spec, double eps, const Frequency& freq, const LatticeBox& box,
                            const std::vector<double>& t_grid, const std::vector<Gap>& gaps, double tol = 1e-12,
                            int workers = 1);

nlohmann::json to_json(const SpectrumReport& r);
nlohmann::json to_json(const RankOneTrace& r);
nlohmann::json to_json(const BranchDistanceReport& r);

}  // namespace quasidiag
