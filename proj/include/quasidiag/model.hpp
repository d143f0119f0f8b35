#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace quasidiag {

using Site = std::vector<int>;

int l1_norm(const Site& n);
int l1_dist(const Site& a, const Site& b);
Site add(const Site& a, const Site& b);
Site sub(const Site& a, const Site& b);

// Fractional part in [0,1) and distance to the nearest integer.
double frac(double x);
double circle_norm(double x);

enum class PotentialKind { SawtoothPower, MarylandTan, Table };
enum class Interpolation { Linear, Step };

struct PotentialSpec {
  PotentialKind kind = PotentialKind::SawtoothPower;
  double alpha = 1.0;
  double power = 1.0;
  std::vector<double> table_x;
  std::vector<double> table_f;
  Interpolation interp = Interpolation::Linear;

  static PotentialSpec sawtooth(double power = 1.0, double alpha = 1.0);
  static PotentialSpec maryland(double alpha = 1.0);
  // throws MonotonicityViolation on non-increasing data
  static PotentialSpec table(std::vector<double> xs, std::vector<double> fs, double alpha = 1.0,
                             Interpolation interp = Interpolation::Linear);
  static PotentialSpec table_from_csv(const std::string& path, double alpha = 1.0,
                                      Interpolation interp = Interpolation::Linear);

  std::string name() const;
  double value_at_zero() const;     // f(0)
  double left_limit_at_one() const; // f(1-0)
};

double sample_potential(const PotentialSpec& spec, double x);

struct HolderReport {
  bool ok = true;
  double worst_margin = 0.0;
  double worst_x = 0.0;
  double worst_y = 0.0;
};

HolderReport check_holder_monotone(const PotentialSpec& spec, double alpha, int grid_size,
                                   double tol = 1e-12);

struct Frequency {
  std::vector<double> omega;
  double rho = 1.0;
  double mu = 1.0;
  int dim() const { return static_cast<int>(omega.size()); }
};

double phase_of(const Frequency& freq, double x, const Site& n);  // {x + n.omega}
double dot(const Frequency& freq, const Site& n);
double norm_n_omega(const Frequency& freq, const Site& n);      // ||n.omega||

struct DiophantineReport {
  bool ok = true;
  Site worst_n;
  double worst_margin = 0.0;  // log||n.w|| + rho |n|^{1/(1+mu)}
  double worst_norm = 0.0;
};

// all 0 < |n| <= N; exact resonance throws ResonantFrequency
DiophantineReport check_diophantine(const Frequency& freq, int N);

// Sites of the l1 sphere / ball, lexicographic.
std::vector<Site> l1_sphere(int dim, int radius);
std::vector<Site> l1_ball(const Site& center, int radius);

class LatticeBox {
 public:
  LatticeBox() = default;
  explicit LatticeBox(int dim, std::vector<Site> sites);
  static LatticeBox cube(int dim, int lo, int hi);
  static LatticeBox centered(int dim, int radius) { return cube(dim, -radius, radius); }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(sites_.size()); }
  const std::vector<Site>& sites() const { return sites_; }
  const Site& site(int i) const { return sites_[static_cast<size_t>(i)]; }
  int find(const Site& n) const;  // -1 when absent
  bool contains(const Site& n) const { return find(n) >= 0; }
  LatticeBox translated(const Site& shift) const;

 private:
  int dim_ = 1;
  std::vector<Site> sites_;
  std::map<Site, int> index_;
};

struct SymOperator {
  LatticeBox box;
  std::vector<double> diag;                        // -inf allowed
  std::map<std::pair<int, int>, double> offdiag;   // i < j
  double eps = 0.0;
  double x = 0.0;
  Frequency freq;

  double entry(int i, int j) const;
  int infinite_site() const;  // index of the -inf diagonal entry, or -1
  Eigen::MatrixXd dense() const;
  double max_abs() const;     // over finite entries
};

SymOperator assemble_operator(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                              const LatticeBox& box);
SymOperator shift_phase(const SymOperator& op, const Site& n);
double max_entry_difference(const SymOperator& a, const SymOperator& b);

}  // namespace quasidiag
