#include "quasidiag/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "quasidiag/errors.hpp"
#include "quasidiag/pool.hpp"
#include "quasidiag/regions.hpp"

namespace quasidiag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Jacobi sweeps on a finite symmetric matrix; returns unsorted values, vectors in columns
int jacobi_sweeps(Eigen::MatrixXd a, Eigen::VectorXd& d, Eigen::MatrixXd& v, int max_sweeps) {
  const int n = static_cast<int>(a.rows());
  v = Eigen::MatrixXd::Identity(n, n);
  d = a.diagonal();
  Eigen::VectorXd b = d, z = Eigen::VectorXd::Zero(n);
  auto rot = [](double& g0, double& h0, double s, double tau) {
    double g = g0, h = h0;
    g0 = g - s * (h + g * tau);
    h0 = h + s * (g - h * tau);
  };
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double sm = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) sm += std::fabs(a(p, q));
    if (sm == 0.0) return sweep - 1;
    double tresh = sweep < 4 ? 0.2 * sm / (n * n) : 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double g = 100.0 * std::fabs(a(p, q));
        if (sweep > 4 && std::fabs(d(p)) + g == std::fabs(d(p)) && std::fabs(d(q)) + g == std::fabs(d(q))) {
          a(p, q) = 0.0;
        } else if (std::fabs(a(p, q)) > tresh) {
          // same branch as the scheme's 2x2 rotation, opposite orientation
          double t = -rotation_tangent(d(p), d(q), a(p, q));
          double c = 1.0 / std::sqrt(1.0 + t * t);
          double s = t * c;
          double tau = s / (1.0 + c);
          double h = t * a(p, q);
          z(p) -= h;
          z(q) += h;
          d(p) -= h;
          d(q) += h;
          a(p, q) = 0.0;
          for (int j = 0; j < p; ++j) rot(a(j, p), a(j, q), s, tau);
          for (int j = p + 1; j < q; ++j) rot(a(p, j), a(j, q), s, tau);
          for (int j = q + 1; j < n; ++j) rot(a(p, j), a(q, j), s, tau);
          for (int j = 0; j < n; ++j) rot(v(j, p), v(j, q), s, tau);
        }
      }
    }
    b += z;
    d = b;
    z.setZero();
  }
  throw NoConvergence("Jacobi eigensolver did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

std::vector<int> finite_indices(const Eigen::MatrixXd& A, std::vector<int>* infinite = nullptr) {
  std::vector<int> keep;
  for (int i = 0; i < A.rows(); ++i) {
    if (std::isinf(A(i, i))) {
      if (infinite) infinite->push_back(i);
    } else {
      keep.push_back(i);
    }
  }
  return keep;
}

Eigen::MatrixXd restrict(const Eigen::MatrixXd& A, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  Eigen::MatrixXd B(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) B(i, j) = A(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  return B;
}

std::vector<double> eigenvalues_of(const SymOperator& op) {
  const int n = op.box.size();
  std::vector<double> out;
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    double v = op.diag[static_cast<size_t>(i)];
    if (std::isinf(v)) out.push_back(v);
    else keep.push_back(i);
  }
  bool chain = op.box.dim() == 1;
  for (size_t k = 1; chain && k < keep.size(); ++k)
    chain = op.box.site(keep[k])[0] == op.box.site(keep[k - 1])[0] + 1;
  if (chain && !keep.empty()) {
    const int k = static_cast<int>(keep.size());
    Eigen::VectorXd dg(k), sub(std::max(k - 1, 0));
    for (int i = 0; i < k; ++i) dg(i) = op.diag[static_cast<size_t>(keep[static_cast<size_t>(i)])];
    for (int i = 0; i + 1 < k; ++i) sub(i) = op.entry(keep[static_cast<size_t>(i)], keep[static_cast<size_t>(i) + 1]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(dg, sub, Eigen::EigenvaluesOnly);
    for (int i = 0; i < k; ++i) out.push_back(es.eigenvalues()(i));
  } else if (!keep.empty()) {
    Eigen::MatrixXd B = restrict(op.dense(), keep);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B, Eigen::EigenvaluesOnly);
    for (int i = 0; i < B.rows(); ++i) out.push_back(es.eigenvalues()(i));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

EigenResult dense_eig(const Eigen::MatrixXd& A, int max_sweeps) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw std::invalid_argument("dense_eig: matrix must be square");
  std::vector<int> inf;
  std::vector<int> keep = finite_indices(A, &inf);
  if (inf.size() > 1) throw std::invalid_argument("dense_eig: more than one infinite diagonal entry");
  for (int i : inf)
    if (A(i, i) > 0) throw std::invalid_argument("dense_eig: +inf diagonal entry");

  EigenResult res;
  Eigen::VectorXd d;
  Eigen::MatrixXd v;
  res.sweeps = jacobi_sweeps(restrict(A, keep), d, v, max_sweeps);
  const int k = static_cast<int>(keep.size());
  std::vector<int> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d(a) < d(b); });

  res.vectors = Eigen::MatrixXd::Zero(n, n);
  int col = 0;
  if (!inf.empty()) {
    res.infinite_site = inf[0];
    res.values.push_back(-kInf);
    res.vectors(inf[0], col++) = 1.0;
  }
  for (int o : order) {
    res.values.push_back(d(o));
    Eigen::VectorXd u = v.col(o);
    Eigen::Index big = 0;
    u.cwiseAbs().maxCoeff(&big);
    if (u(big) < 0) u = -u;
    for (int i = 0; i < k; ++i) res.vectors(keep[static_cast<size_t>(i)], col) = u(i);
    ++col;
  }
  return res;
}

EigenResult dense_eig(const SymOperator& A, int max_sweeps) { return dense_eig(A.dense(), max_sweeps); }

double reconstruction_error(const Eigen::MatrixXd& A, const EigenResult& r) {
  std::vector<int> keep = finite_indices(A);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(A.rows(), A.cols());
  for (size_t c = 0; c < r.values.size(); ++c) {
    if (std::isinf(r.values[c])) continue;
    R += r.values[c] * r.vectors.col(static_cast<Eigen::Index>(c)) * r.vectors.col(static_cast<Eigen::Index>(c)).transpose();
  }
  double e = 0.0;
  for (int i : keep)
    for (int j : keep) e = std::max(e, std::fabs(A(i, j) - R(i, j)));
  return e;
}

double orthonormality_error(const EigenResult& r) {
  const auto n = r.vectors.cols();
  return (r.vectors.transpose() * r.vectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

double max_residual(const Eigen::MatrixXd& A, const EigenResult& r) {
  std::vector<int> keep = finite_indices(A);
  Eigen::MatrixXd B = restrict(A, keep);
  double worst = 0.0;
  for (size_t c = 0; c < r.values.size(); ++c) {
    if (std::isinf(r.values[c])) continue;
    Eigen::VectorXd u(static_cast<Eigen::Index>(keep.size()));
    for (size_t i = 0; i < keep.size(); ++i) u(static_cast<Eigen::Index>(i)) = r.vectors(keep[i], static_cast<Eigen::Index>(c));
    worst = std::max(worst, (B * u - r.values[c] * u).norm());
  }
  return worst;
}

std::vector<double> spectrum_values(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                                    const LatticeBox& box) {
  return eigenvalues_of(assemble_operator(spec, eps, freq, x, box));
}

double multiset_distance(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size())
    throw CardinalityMismatch("multisets of sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    m = std::max(m, std::fabs(a[i] - b[i]));
  }
  return m;
}

const Branch& BranchTable::at(const Site& n) const {
  for (const auto& b : branches)
    if (b.n == n) return b;
  throw std::out_of_range("no branch for the requested site");
}

BranchTable label_branches(const PotentialSpec& spec, double eps, const Frequency& freq, double x,
                           const LatticeBox& box) {
  EigenResult er = dense_eig(assemble_operator(spec, eps, freq, x, box));
  BranchTable t;
  t.box = box;
  t.x = x;
  std::vector<int> order(static_cast<size_t>(box.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ph(order.size());
  for (int i = 0; i < box.size(); ++i) ph[static_cast<size_t>(i)] = phase_of(freq, x, box.site(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ph[static_cast<size_t>(a)] < ph[static_cast<size_t>(b)]; });
  for (size_t r = 0; r < order.size(); ++r) {
    Branch b;
    b.n = box.site(order[r]);
    b.phase = ph[static_cast<size_t>(order[r])];
    b.E = er.values[r];
    b.v = er.vectors.col(static_cast<Eigen::Index>(r));
    t.branches.push_back(std::move(b));
  }
  return t;
}

bool pairing_consistent(const BranchTable& t) {
  const auto& br = t.branches;
  for (size_t i = 0; i < br.size(); ++i) {
    for (size_t j = 0; j < br.size(); ++j) {
      if (i == j) continue;
      if (br[i].phase == br[j].phase || br[i].E == br[j].E) return false;
      if ((br[i].E <= br[j].E) != (br[i].phase <= br[j].phase)) return false;
    }
  }
  return true;
}

std::vector<double> branch_on_grid(const PotentialSpec& spec, double eps, const Frequency& freq,
                                   const LatticeBox& box, const Site& n, int points) {
  std::vector<double> out;
  double start = frac(-dot(freq, n));
  for (int k = 0; k < points; ++k) {
    double x = start + (k + 0.5) / points;
    out.push_back(label_branches(spec, eps, freq, x, box).at(n).E);
  }
  return out;
}

SiteSet theorem_domain(const SchemeParams& p, double x0, int s, const LatticeBox& ambient, int grid) {
  auto I = make_intervals(x0, p.beta, std::max(p.s_max, s + 1));
  return union_region(Site(static_cast<size_t>(ambient.dim()), 0), s + 1, I, p.freq, ambient, grid);
}

void check_domain(const SchemeParams& p, double x0, int s, const LatticeBox& ambient, const SiteSet& domain,
                  int grid) {
  SiteSet core = theorem_domain(p, x0, s, ambient, grid);
  if (!is_subset(core, domain))
    throw DomainConditionViolated("domain misses part of the region of the origin at step " + std::to_string(s + 1));
  auto I = make_intervals(x0, p.beta, std::max(p.s_max, s + 1));
  const TorusInterval& J = I[static_cast<size_t>(s + 1)];
  std::vector<double> xs{J.center};
  for (int i = 0; i < grid; ++i) xs.push_back(J.center + J.radius * (2.0 * (i + 0.5) / grid - 1.0));
  Site zero(static_cast<size_t>(ambient.dim()), 0);
  for (double x : xs) {
    RegionBuilder rb(x, p.freq, I, ambient);
    for (const auto& r : rb.extended(s + 1).regions)
      if (r.center != zero && intersects(r.sites, domain))
        throw DomainConditionViolated("domain meets the region centered off the origin");
  }
  const double need = 10.0 * 2.0 * J.radius;
  for (const auto& n : domain) {
    if (l1_norm(n) == 0) continue;
    if (norm_n_omega(p.freq, n) < need)
      throw DomainConditionViolated("||n.omega|| below 10|I_" + std::to_string(s + 1) + "| inside the domain");
  }
}

BranchDistanceReport branch_distance_check(const SchemeParams& p, double x0, double x, int s,
                                           const LatticeBox& ambient, const SiteSet& domain, double floor) {
  check_domain(p, x0, s, ambient, domain);
  BranchDistanceReport r;
  r.x = x;
  r.s = s;
  r.domain_size = static_cast<int>(domain.size());
  r.f_value = diagonal_entry(p, x, x0, s + 1, ambient);
  LatticeBox lam(ambient.dim(), domain);
  r.E0 = label_branches(p.potential, p.eps, p.freq, x, lam).at(Site(static_cast<size_t>(ambient.dim()), 0)).E;
  r.distance = (std::isinf(r.f_value) && r.f_value == r.E0) ? 0.0 : std::fabs(r.f_value - r.E0);
  r.log_bound = ambient.dim() * std::log(3.0) + (s + 2) * (p.eps > 0 ? std::log(p.eps) : -kInf) +
                log_magn(s + 2, p.M, p.beta, p.gamma());
  r.tolerance = std::max(std::exp(r.log_bound), floor);
  r.ok = r.distance <= r.tolerance;
  return r;
}

MonotoneGridReport eigenvalue_function(const SchemeParams& p, const std::vector<double>& xs,
                                       const LatticeBox& ambient, double tol, std::optional<double> eta, int workers) {
  MonotoneGridReport rep;
  rep.xs = xs;
  rep.E = parallel_map(static_cast<int>(xs.size()), workers,
                       [&](int i) { return run_scheme(p, xs[static_cast<size_t>(i)], ambient).E; });
  for (size_t i = 1; i < xs.size(); ++i)
    if (rep.E[i] < rep.E[i - 1] - tol) ++rep.violations;
  if (eta) {
    for (size_t i = 0; i < xs.size(); ++i) {
      for (size_t j = i + 1; j < xs.size(); ++j) {
        double dx = xs[j] - xs[i];
        if (dx <= 0) continue;
        double ratio = (rep.E[j] - rep.E[i]) / dx;
        ++rep.lipschitz_pairs;
        rep.worst_lipschitz_ratio = std::min(rep.worst_lipschitz_ratio, ratio);
        if (ratio < 1.0 - *eta) ++rep.lipschitz_violations;
      }
    }
  }
  return rep;
}

LatticeBox box_with_sites(int dim, int sites) {
  if (dim == 1) return LatticeBox::cube(1, -sites / 2, -sites / 2 + sites - 1);
  int side = static_cast<int>(std::lround(std::pow(static_cast<double>(sites), 1.0 / dim)));
  return LatticeBox::cube(dim, -side / 2, -side / 2 + side - 1);
}

std::vector<double> uniform_phases(int count) {
  std::vector<double> xs;
  for (int k = 0; k < count; ++k) xs.push_back((k + 0.5) / count);
  return xs;
}

IdsTable ids(const PotentialSpec& spec, double eps, const Frequency& freq, const std::vector<int>& box_sizes,
             const std::vector<double>& E_grid, int phases, int workers) {
  IdsTable t;
  t.box_sizes = box_sizes;
  t.E_grid = E_grid;
  auto xs = uniform_phases(phases);
  for (int L : box_sizes) {
    LatticeBox box = box_with_sites(freq.dim(), L);
    auto spectra = parallel_map(phases, workers, [&](int k) {
      return spectrum_values(spec, eps, freq, xs[static_cast<size_t>(k)], box);
    });
    std::vector<double> all;
    for (auto& s : spectra) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    std::vector<double> N;
    const double total = static_cast<double>(all.size());
    for (double E : E_grid)
      N.push_back(static_cast<double>(std::upper_bound(all.begin(), all.end(), E) - all.begin()) / total);
    t.N.push_back(std::move(N));
  }
  return t;
}

std::vector<Gap> find_gaps(const std::vector<double>& sorted, double min_width) {
  std::vector<Gap> out;
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (std::isinf(sorted[i]) || std::isinf(sorted[i - 1])) continue;
    if (sorted[i] - sorted[i - 1] >= min_width) out.push_back({sorted[i - 1], sorted[i]});
  }
  return out;
}

SpectrumReport gap_detect(const PotentialSpec& spec, double eps, const Frequency& freq,
                          const std::vector<int>& box_sizes, double min_width, double stability_tol, int phases,
                          int workers) {
  SpectrumReport rep;
  rep.box_sizes = box_sizes;
  rep.min_width = min_width;
  rep.stability_tol = stability_tol;
  rep.phases = phases;
  auto xs = uniform_phases(phases);
  for (int L : box_sizes) {
    LatticeBox box = box_with_sites(freq.dim(), L);
    auto spectra = parallel_map(phases, workers, [&](int k) {
      return spectrum_values(spec, eps, freq, xs[static_cast<size_t>(k)], box);
    });
    std::vector<double> all;
    for (auto& s : spectra) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    rep.raw_gaps.push_back(find_gaps(all, min_width));
    rep.spectra.push_back(std::move(all));
  }
  if (rep.raw_gaps.empty()) return rep;
  std::vector<size_t> order(box_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return box_sizes[a] < box_sizes[b]; });
  const auto& big = rep.raw_gaps[order.back()];
  if (order.size() == 1) {
    rep.gaps = big;
    return rep;
  }
  const auto& prev = rep.raw_gaps[order[order.size() - 2]];
  for (const auto& g : big) {
    for (const auto& h : prev) {
      if (std::fabs(g.left - h.left) <= stability_tol && std::fabs(g.right - h.right) <= stability_tol) {
        rep.gaps.push_back(g);
        break;
      }
    }
  }
  return rep;
}

std::vector<double> arc_t_grid(const PotentialSpec& spec, int count, double span) {
  double f0 = spec.value_at_zero();
  double f1 = spec.left_limit_at_one();
  std::vector<double> t;
  if (count <= 0) return t;
  int upper = (count - 1) / 2;
  int lower = count - 1 - upper;
  if (std::isfinite(f1))
    for (int k = 0; k < upper; ++k) t.push_back(f1 + span * k / std::max(upper - 1, 1));
  t.push_back(kInf);
  if (std::isfinite(f0))
    for (int k = 0; k < lower; ++k) t.push_back(f0 - span + span * k / std::max(lower - 1, 1));
  if (lower == 1 && std::isfinite(f0)) t.back() = f0;
  return t;
}

RankOneTrace rank_one_sweep(const PotentialSpec& spec, double eps, const Frequency& freq, const LatticeBox& box,
                            const std::vector<double>& t_grid, const std::vector<Gap>& gaps, double tol, int workers) {
  RankOneTrace tr;
  tr.t_grid = t_grid;
  tr.gaps = gaps;
  const int origin = box.find(Site(static_cast<size_t>(box.dim()), 0));
  if (origin < 0) throw std::invalid_argument("rank_one_sweep: box must contain the origin");
  SymOperator base = assemble_operator(spec, eps, freq, 0.0, box);
  tr.spectra = parallel_map(static_cast<int>(t_grid.size()), workers, [&](int k) {
    SymOperator op = base;
    op.diag[static_cast<size_t>(origin)] = t_grid[static_cast<size_t>(k)];
    return eigenvalues_of(op);
  });

  const int L = box.size();
  int inf_at = -1;
  for (size_t k = 0; k < t_grid.size(); ++k)
    if (std::isinf(t_grid[k]) && t_grid[k] > 0) inf_at = static_cast<int>(k);
  tr.trajectories.assign(static_cast<size_t>(L), {});
  for (int j = 0; j < L; ++j) {
    auto& traj = tr.trajectories[static_cast<size_t>(j)];
    for (size_t k = 0; k < t_grid.size(); ++k) {
      int idx = (inf_at >= 0 && static_cast<int>(k) > inf_at) ? (j + 1) % L : j;
      traj.push_back(tr.spectra[k][static_cast<size_t>(idx)]);
    }
    for (size_t k = 1; k < traj.size(); ++k) {
      if (std::isinf(traj[k - 1]) && traj[k - 1] > 0) continue;  // passage through infinity
      if (traj[k] < traj[k - 1] - tol * std::max(1.0, std::fabs(traj[k - 1]))) ++tr.monotonicity_violations;
    }
  }

  for (const auto& g : gaps) {
    int hit = -1;
    double val = 0.0;
    for (size_t k = 0; k < t_grid.size() && hit < 0; ++k) {
      for (double e : tr.spectra[k]) {
        if (e > g.left && e < g.right) {
          hit = static_cast<int>(k);
          val = e;
          break;
        }
      }
    }
    tr.witnessed.push_back(hit);
    tr.witness_value.push_back(val);
  }
  return tr;
}

nlohmann::json to_json(const SpectrumReport& r) {
  nlohmann::json j;
  j["box_sizes"] = r.box_sizes;
  j["phases"] = r.phases;
  j["min_width"] = r.min_width;
  j["stability_tol"] = r.stability_tol;
  j["raw_gap_counts"] = nlohmann::json::array();
  for (const auto& g : r.raw_gaps) j["raw_gap_counts"].push_back(g.size());
  j["gaps"] = nlohmann::json::array();
  for (const auto& g : r.gaps) j["gaps"].push_back({{"left", g.left}, {"right", g.right}, {"width", g.width()}});
  j["gap_count"] = r.gaps.size();
  return j;
}

nlohmann::json to_json(const RankOneTrace& r) {
  nlohmann::json j;
  j["t_count"] = r.t_grid.size();
  j["monotonicity_violations"] = r.monotonicity_violations;
  j["witnesses"] = nlohmann::json::array();
  for (size_t i = 0; i < r.gaps.size(); ++i) {
    nlohmann::json w = {{"left", r.gaps[i].left}, {"right", r.gaps[i].right}};
    if (r.witnessed[i] >= 0) {
      w["t"] = r.t_grid[static_cast<size_t>(r.witnessed[i])];
      w["eigenvalue"] = r.witness_value[i];
    } else {
      w["t"] = nullptr;
    }
    j["witnesses"].push_back(w);
  }
  return j;
}

nlohmann::json to_json(const BranchDistanceReport& r) {
  return {{"x", r.x},           {"s", r.s},         {"f", r.f_value},           {"E0", r.E0},
          {"distance", r.distance}, {"log_bound", r.log_bound}, {"tolerance", r.tolerance},
          {"ok", r.ok},         {"domain_size", r.domain_size}};
}

}  // namespace quasidiag
