#include "quasidiag/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "quasidiag/errors.hpp"

namespace quasidiag {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string site_str(const Site& n) {
  std::string s = "(";
  for (size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
  return s + ")";
}

void validate_table(const std::vector<double>& xs, const std::vector<double>& fs, Interpolation interp) {
  if (xs.size() != fs.size()) throw std::invalid_argument("table: x and f columns differ in length");
  size_t need = interp == Interpolation::Linear ? 2 : 1;
  if (xs.size() < need) throw std::invalid_argument("table: too few rows");
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] >= 0.0 && xs[i] < 1.0))
      throw MonotonicityViolation("table: x=" + std::to_string(xs[i]) + " outside [0,1)");
    if (!std::isfinite(fs[i])) throw MonotonicityViolation("table: non-finite f value");
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw MonotonicityViolation("table: x not strictly increasing at row " + std::to_string(i));
    if (i > 0 && !(fs[i] > fs[i - 1]))
      throw MonotonicityViolation("table: f not increasing at row " + std::to_string(i));
  }
}

double table_value(const PotentialSpec& p, double y) {
  const auto& xs = p.table_x;
  const auto& fs = p.table_f;
  auto it = std::upper_bound(xs.begin(), xs.end(), y);
  if (p.interp == Interpolation::Step) {
    if (it == xs.begin()) return fs.front();
    return fs[static_cast<size_t>(it - xs.begin()) - 1];
  }
  size_t k;
  if (it == xs.begin()) k = 0;
  else if (it == xs.end()) k = xs.size() - 2;
  else k = std::min(static_cast<size_t>(it - xs.begin()) - 1, xs.size() - 2);
  double slope = (fs[k + 1] - fs[k]) / (xs[k + 1] - xs[k]);
  return fs[k] + slope * (y - xs[k]);
}
}  // namespace

int l1_norm(const Site& n) {
  int s = 0;
  for (int v : n) s += std::abs(v);
  return s;
}

int l1_dist(const Site& a, const Site& b) {
  int s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

Site add(const Site& a, const Site& b) {
  Site r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Site sub(const Site& a, const Site& b) {
  Site r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

double frac(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;
  return r;
}

double circle_norm(double x) {
  double r = frac(x);
  return std::min(r, 1.0 - r);
}

PotentialSpec PotentialSpec::sawtooth(double power, double alpha) {
  if (!(power > 0)) throw std::invalid_argument("sawtooth power must be positive");
  PotentialSpec p;
  p.kind = PotentialKind::SawtoothPower;
  p.power = power;
  p.alpha = alpha;
  return p;
}

PotentialSpec PotentialSpec::maryland(double alpha) {
  PotentialSpec p;
  p.kind = PotentialKind::MarylandTan;
  p.alpha = alpha;
  return p;
}

PotentialSpec PotentialSpec::table(std::vector<double> xs, std::vector<double> fs, double alpha,
                                   Interpolation interp) {
  validate_table(xs, fs, interp);
  PotentialSpec p;
  p.kind = PotentialKind::Table;
  p.alpha = alpha;
  p.table_x = std::move(xs);
  p.table_f = std::move(fs);
  p.interp = interp;
  return p;
}

PotentialSpec PotentialSpec::table_from_csv(const std::string& path, double alpha, Interpolation interp) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open table " + path);
  std::vector<double> xs, fs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, f;
    if (!(ss >> x >> f)) continue;  // header row
    xs.push_back(x);
    fs.push_back(f);
  }
  return table(std::move(xs), std::move(fs), alpha, interp);
}

std::string PotentialSpec::name() const {
  switch (kind) {
    case PotentialKind::SawtoothPower: return "sawtooth-power";
    case PotentialKind::MarylandTan: return "maryland-tan";
    case PotentialKind::Table: return "table";
  }
  return "?";
}

double PotentialSpec::value_at_zero() const { return sample_potential(*this, 0.0); }

double PotentialSpec::left_limit_at_one() const {
  switch (kind) {
    case PotentialKind::SawtoothPower: return 1.0;
    case PotentialKind::MarylandTan: return std::numeric_limits<double>::infinity();
    case PotentialKind::Table:
      if (interp == Interpolation::Step) return table_f.back();
      return table_value(*this, 1.0);
  }
  return 0.0;
}

double sample_potential(const PotentialSpec& spec, double x) {
  double y = frac(x);
  switch (spec.kind) {
    case PotentialKind::SawtoothPower:
      return std::pow(y, spec.power);
    case PotentialKind::MarylandTan:
      if (y == 0.0) return kNegInf;
      return std::tan(std::numbers::pi * (y - 0.5));
    case PotentialKind::Table:
      return table_value(spec, y);
  }
  return 0.0;
}

HolderReport check_holder_monotone(const PotentialSpec& spec, double alpha, int grid_size, double tol) {
  if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
  std::vector<double> xs(static_cast<size_t>(grid_size)), fs(xs.size());
  for (int i = 0; i < grid_size; ++i) {
    xs[static_cast<size_t>(i)] = static_cast<double>(i) / grid_size;
    fs[static_cast<size_t>(i)] = sample_potential(spec, xs[static_cast<size_t>(i)]);
  }
  HolderReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < xs.size(); ++i) {
    for (size_t j = i + 1; j < xs.size(); ++j) {
      double m = fs[j] - fs[i] - std::pow(xs[j] - xs[i], alpha);
      if (m < rep.worst_margin) {
        rep.worst_margin = m;
        rep.worst_x = xs[i];
        rep.worst_y = xs[j];
      }
    }
  }
  rep.ok = rep.worst_margin >= -tol;
  return rep;
}

double dot(const Frequency& freq, const Site& n) {
  double s = 0.0;
  for (size_t i = 0; i < n.size(); ++i) s += n[i] * freq.omega[i];
  return s;
}

double phase_of(const Frequency& freq, double x, const Site& n) { return frac(x + dot(freq, n)); }

double norm_n_omega(const Frequency& freq, const Site& n) { return circle_norm(dot(freq, n)); }

std::vector<Site> l1_sphere(int dim, int radius) {
  std::vector<Site> out;
  Site cur(static_cast<size_t>(dim), 0);
  auto rec = [&](auto&& self, int k, int left) -> void {
    if (k == dim - 1) {
      if (left == 0) {
        cur[static_cast<size_t>(k)] = 0;
        out.push_back(cur);
      } else {
        cur[static_cast<size_t>(k)] = -left;
        out.push_back(cur);
        cur[static_cast<size_t>(k)] = left;
        out.push_back(cur);
      }
      return;
    }
    for (int v = -left; v <= left; ++v) {
      cur[static_cast<size_t>(k)] = v;
      self(self, k + 1, left - std::abs(v));
    }
  };
  rec(rec, 0, radius);
  return out;
}

std::vector<Site> l1_ball(const Site& center, int radius) {
  const int dim = static_cast<int>(center.size());
  std::vector<Site> out;
  Site cur(center.size(), 0);
  auto rec = [&](auto&& self, int k, int left) -> void {
    if (k == dim) {
      out.push_back(add(center, cur));
      return;
    }
    for (int v = -left; v <= left; ++v) {
      cur[static_cast<size_t>(k)] = v;
      self(self, k + 1, left - std::abs(v));
    }
  };
  if (radius >= 0) rec(rec, 0, radius);
  return out;
}

DiophantineReport check_diophantine(const Frequency& freq, int N) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  DiophantineReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= N; ++r) {
    auto sphere = l1_sphere(freq.dim(), r);
    std::reverse(sphere.begin(), sphere.end());
    double bound_exp = freq.rho * std::pow(static_cast<double>(r), 1.0 / (1.0 + freq.mu));
    for (const auto& n : sphere) {
      double v = norm_n_omega(freq, n);
      if (v == 0.0) throw ResonantFrequency("exact resonance ||n.omega|| = 0 at n=" + site_str(n));
      double margin = std::log(v) + bound_exp;
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_n = n;
        rep.worst_norm = v;
      }
    }
  }
  rep.ok = rep.worst_margin >= 0.0;
  return rep;
}

LatticeBox::LatticeBox(int dim, std::vector<Site> sites) : dim_(dim), sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  for (size_t i = 0; i < sites_.size(); ++i) {
    if (static_cast<int>(sites_[i].size()) != dim_) throw std::invalid_argument("site dimension mismatch");
    if (i > 0 && sites_[i] == sites_[i - 1]) throw std::invalid_argument("duplicate site in box");
    index_.emplace(sites_[i], static_cast<int>(i));
  }
}

LatticeBox LatticeBox::cube(int dim, int lo, int hi) {
  std::vector<Site> sites;
  Site cur(static_cast<size_t>(dim), lo);
  if (hi < lo) return LatticeBox(dim, {});
  while (true) {
    sites.push_back(cur);
    int k = dim - 1;
    while (k >= 0 && cur[static_cast<size_t>(k)] == hi) {
      cur[static_cast<size_t>(k)] = lo;
      --k;
    }
    if (k < 0) break;
    ++cur[static_cast<size_t>(k)];
  }
  return LatticeBox(dim, std::move(sites));
}

int LatticeBox::find(const Site& n) const {
  auto it = index_.find(n);
  return it == index_.end() ? -1 : it->second;
}

LatticeBox LatticeBox::translated(const Site& shift) const {
  std::vector<Site> s;
  s.reserve(sites_.size());
  for (const auto& n : sites_) s.push_back(add(n, shift));
  return LatticeBox(dim_, std::move(s));
}

double SymOperator::entry(int i, int j) const {
  if (i == j) return diag[static_cast<size_t>(i)];
  auto it = offdiag.find({std::min(i, j), std::max(i, j)});
  return it == offdiag.end() ? 0.0 : it->second;
}

int SymOperator::infinite_site() const {
  for (size_t i = 0; i < diag.size(); ++i)
    if (std::isinf(diag[i]) && diag[i] < 0) return static_cast<int>(i);
  return -1;
}

Eigen::MatrixXd SymOperator::dense() const {
  const int n = box.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) A(i, i) = diag[static_cast<size_t>(i)];
  for (const auto& [ij, v] : offdiag) {
    A(ij.first, ij.second) = v;
    A(ij.second, ij.first) = v;
  }
  return A;
}

double SymOperator::max_abs() const {
  double m = 0.0;
  for (double d : diag)
    if (std::isfinite(d)) m = std::max(m, std::abs(d));
  for (const auto& kv : offdiag) m = std::max(m, std::abs(kv.second));
  return m;
}

SymOperator assemble_operator(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                              const LatticeBox& box) {
  if (!(eps >= 0)) throw std::invalid_argument("eps must be >= 0");
  if (freq.dim() != box.dim()) throw std::invalid_argument("frequency and box dimensions differ");
  SymOperator op;
  op.box = box;
  op.eps = eps;
  op.x = x;
  op.freq = freq;
  const int n = box.size();
  op.diag.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) op.diag[static_cast<size_t>(i)] = sample_potential(spec, x + dot(freq, box.site(i)));
  if (eps != 0.0) {
    for (int i = 0; i < n; ++i) {
      Site nb = box.site(i);
      for (int k = 0; k < box.dim(); ++k) {
        ++nb[static_cast<size_t>(k)];
        int j = box.find(nb);
        if (j >= 0) op.offdiag[{std::min(i, j), std::max(i, j)}] = eps;
        --nb[static_cast<size_t>(k)];
      }
    }
  }
  return op;
}

SymOperator shift_phase(const SymOperator& op, const Site& n) {
  SymOperator out = op;
  Site neg(n.size());
  for (size_t i = 0; i < n.size(); ++i) neg[i] = -n[i];
  out.box = op.box.translated(neg);
  out.x = op.x + dot(op.freq, n);
  return out;
}

double max_entry_difference(const SymOperator& a, const SymOperator& b) {
  if (a.box.sites() != b.box.sites()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (size_t i = 0; i < a.diag.size(); ++i) {
    if (a.diag[i] == b.diag[i]) continue;
    m = std::max(m, std::abs(a.diag[i] - b.diag[i]));
  }
  for (const auto& [ij, v] : a.offdiag) m = std::max(m, std::abs(v - b.entry(ij.first, ij.second)));
  for (const auto& [ij, v] : b.offdiag) m = std::max(m, std::abs(v - a.entry(ij.first, ij.second)));
  return m;
}

}  // namespace quasidiag
