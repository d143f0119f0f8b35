#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "quasidiag/model.hpp"
#include "quasidiag/regions.hpp"

namespace quasidiag {

struct SchemeParams {
  PotentialSpec potential;
  Frequency freq;
  double eps = 0.0;
  double delta = 0.5;
  double beta = 0.05;
  double M = 1e4;
  int s_max = 5;
  double dominance_margin = 1e-3;  // relative: |h| <= (1 - margin)|b - a|
  double residual_target = 1e-12;
  bool stop_early = true;
  bool enforce_conv3 = false;
  int ind2_grid = 64;

  double alpha() const { return potential.alpha; }
  double gamma() const { return (1.0 + 2.0 / freq.mu) * potential.alpha; }
  void validate() const;
  // false when magn(1) < 1, i.e. M was not taken large after beta
  bool parameter_order_ok() const;
};

// log of M^{k-1/2} beta^{12 gamma k / ln(k+1)}; the beta factor is 1 at k = 0
double log_magn(int k, double M, double beta, double gamma);
double magn(int k, double M, double beta, double gamma);

struct AbsorptionResult {
  bool holds = false;
  double log_lhs = 0.0;
  double log_rhs = 0.0;
  double margin() const { return log_rhs - log_lhs; }
};

// throws InvalidAbsorptionQuery unless |n| = k2 >= k1 >= level(n), k1 >= 1
AbsorptionResult absorption_check(int k1, int k2, const Site& n, const Frequency& freq, double M, double beta,
                                  double gamma, double alpha);

// eps-weighted comparison between absorption bounds at k1' <= k1 (same k2); returns log(rhs) - log(lhs)
double worst_level_margin(int k1_prime, int k1, int k2, double eps, double M, double beta, double gamma);

// tan of the small rotation angle diagonalizing [[a,h],[h,b]]; no dominance requirement
double rotation_tangent(double a, double b, double h);

// Columns are eigenvectors; the first one tends to e_0 as h -> 0.
Eigen::Matrix2d jacobi_rotation_2x2(double a, double b, double h, double margin);

struct Rotation {
  int i = -1;
  int j = -1;
  double c = 1.0;
  double s = 0.0;
  bool identity() const { return s == 0.0; }
};

struct StepRecord {
  int s = 0;
  int active_sites = 0;
  bool clipped = false;
  double max_dominance_ratio = 0.0;
  double u_minus_one = 0.0;
  double conv3_bound = 0.0;
  bool conv3_ok = true;
  double row0_residual = 0.0;
  double f0 = 0.0;
  double drift = 0.0;
  double log_ind3_bound = 0.0;
  bool ind3_ok = true;
  double orthogonality = 0.0;
  bool support_ok = true;
  double w_beyond_range = 0.0;
  double h_beyond_range = 0.0;
};

struct SchemeState {
  int s = 0;
  double x = 0.0;
  double x0 = 0.0;
  Frequency freq;
  std::vector<TorusInterval> intervals;  // I_0 .. I_{s_max}
  LatticeBox box;
  int origin = -1;
  Eigen::MatrixXd H0;
  Eigen::MatrixXd H;
  Eigen::MatrixXd W;
  std::vector<double> f_history;  // f^(0..s) at the origin
  std::vector<StepRecord> records;
  std::vector<SiteSet> support;   // components of the support of W
  std::vector<SiteSet> last_regions;

  double f0() const { return H(origin, origin); }
  double phase(int i) const;
};

SchemeState init_state(const SchemeParams& p, double x, double x0, const LatticeBox& ambient);

// rotations for the blocks {center, center+m}, 0 < |m| <= s1, lexicographic in m,
// computed from the current H; blocks leaving the box are skipped
std::vector<Rotation> build_U0(const SchemeState& st, int s1, const Site& center, double margin,
                               double* max_ratio = nullptr, bool* clipped = nullptr);

struct CovariantU {
  int step = 0;
  std::vector<Site> centers;
  std::vector<SiteSet> regions;
  std::vector<Rotation> rotations;
  bool clipped = false;
  double max_ratio = 0.0;
};

// throws RegionOverlap when basic regions of active centers meet
CovariantU extend_covariant(const SchemeState& st, const SchemeParams& p, int s1);

Eigen::MatrixXd dense_rotations(const std::vector<Rotation>& rots, int n);
void conjugate(Eigen::MatrixXd& H, const Rotation& r);  // H <- G^T H G

SchemeState step(const SchemeState& st, const SchemeParams& p);

struct OrderReport {
  int s = 0;
  long checked = 0;
  long ind1_violations = 0;
  long ind2_violations = 0;
  long ind2_checked = 0;
  double ind1_worst_log_margin = 0.0;
  double ind2_worst_log_margin = 0.0;
  long beyond_range_nonzero = 0;
  double beyond_range_max = 0.0;
  bool ok() const { return ind1_violations == 0 && ind2_violations == 0; }
};

// declared order max(|m-n|, k+1), k the deepest interval holding a phase of m or n
int declared_order(const SchemeState& st, int i, int j);
OrderReport check_orders(const SchemeState& st, const SchemeParams& p);
void merge(OrderReport& into, const OrderReport& other);

struct DriftReport {
  std::vector<double> drift;          // index s-1 for s = 1..
  std::vector<double> log_bound;
  std::vector<double> decay_ratio;    // drift_{s+1} / drift_s
  int violations = 0;
  bool ok() const { return violations == 0; }
};

DriftReport check_diag_drift(const SchemeState& st, const SchemeParams& p);

struct GridMonitor {
  int s = 0;
  long phases = 0;
  OrderReport orders;
  int drift_violations = 0;
  double drift_worst_log_margin = 0.0;  // log bound - log drift, min over phases and steps
  bool ok() const { return orders.ok() && drift_violations == 0; }
};

// ind1-ind3 over x0, ind2_grid phases in each I_k (k = 1..s) and ind2_grid phases on the circle
GridMonitor monitor_grid(const SchemeParams& p, double x0, const LatticeBox& ambient, int s);
std::vector<double> phase_grid(const SchemeParams& p, double x0, int s);

struct PhasePair {
  double x = 0.0;
  double y = 0.0;
};

struct MonotoneReport {
  long pairs = 0;
  long violations = 0;
  double worst_margin = 0.0;
  long k0_violations = 0;    // pairs failing with k = 0, where the correction is 4^d magn(0)
  long kpos_violations = 0;
  double worst_margin_k0 = std::numeric_limits<double>::infinity();
  double worst_margin_kpos = std::numeric_limits<double>::infinity();
  long ratio_checks = 0;
  long ratio_violations = 0;
  double worst_ratio = 0.0;  // compared with 2^{-alpha}
  bool ok() const { return violations == 0 && ratio_violations == 0; }
};

// f^(s)(., x0) at phase x, scheme forced to exactly s steps
double diagonal_entry(const SchemeParams& p, double x, double x0, int s, const LatticeBox& ambient);

MonotoneReport check_approx_monotone(const SchemeParams& p, double x0, int s, const LatticeBox& ambient,
                                     const std::vector<PhasePair>& pairs, int ratio_samples = 4,
                                     double tol = 1e-12);

struct SchemeResult {
  double E = 0.0;
  Eigen::VectorXd psi;
  SchemeState state;
  std::string stop_reason;
  double residual = 0.0;      // ||H(x) psi - E psi|| against the assembled operator
  double decay_worst = 0.0;   // max_n |psi(n)| / eps^{(1-delta)|n|}, n != 0
  double psi0_defect = 0.0;   // |psi(0) - 1|
};

// throws NoConvergence when the residual target is missed at s_max
SchemeResult run_scheme(const SchemeParams& p, double x0, const LatticeBox& ambient,
                        std::optional<double> x = std::nullopt);

Eigen::VectorXd apply_extended(const Eigen::MatrixXd& H, const Eigen::VectorXd& v);

struct FamilyMember {
  Site n;
  Site localized_at;  // -n
  double E = 0.0;
  Eigen::VectorXd psi;  // on the ambient box
};

// psi_n = T^n psi(x0 - n.omega), E_n = E(x0 - n.omega)
std::vector<FamilyMember> eigen_family(const SchemeParams& p, double x0, const LatticeBox& ambient,
                                       const std::vector<Site>& sites);

nlohmann::json to_json(const StepRecord& r);
nlohmann::json diagnostics_json(const SchemeResult& r);

}  // namespace quasidiag
