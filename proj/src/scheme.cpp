#include "quasidiag/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "quasidiag/errors.hpp"

namespace quasidiag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string site_str(const Site& n) {
  std::string s = "(";
  for (size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
  return s + ")";
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : -kInf; }

// log of the order-r threshold for an entry at distance dist on scale s
double log_order_bound(int r, int dist, int s, const SchemeParams& p) {
  double branch = dist <= s ? std::log((s + 1.0) / (s + 2.0)) : -std::log(static_cast<double>(dist - s));
  return branch + log_magn(r, p.M, p.beta, p.gamma()) + r * safe_log(p.eps);
}

}  // namespace

void SchemeParams::validate() const {
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("eps must lie in [0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
  if (!(M > 1.0)) throw ConfigError("M must exceed 1");
  if (s_max < 0) throw ConfigError("s_max must be non-negative");
  if (freq.dim() < 1) throw ConfigError("omega must have at least one component");
  if (!(freq.mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(potential.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(dominance_margin >= 0.0 && dominance_margin < 1.0)) throw ConfigError("dominance_margin must lie in [0,1)");
  if (ind2_grid < 1) throw ConfigError("ind2_grid must be positive");
}

bool SchemeParams::parameter_order_ok() const { return log_magn(1, M, beta, gamma()) >= 0.0; }

double log_magn(int k, double M, double beta, double gamma) {
  if (k < 0) throw std::invalid_argument("magn: negative order");
  double lm = (k - 0.5) * std::log(M);
  if (k > 0) lm += 12.0 * gamma * k / std::log(k + 1.0) * std::log(beta);
  return lm;
}

double magn(int k, double M, double beta, double gamma) { return std::exp(log_magn(k, M, beta, gamma)); }

AbsorptionResult absorption_check(int k1, int k2, const Site& n, const Frequency& freq, double M, double beta,
                                  double gamma, double alpha) {
  if (l1_norm(n) != k2) throw InvalidAbsorptionQuery("|n| != k2 for n=" + site_str(n));
  if (k1 < 1 || k1 > k2) throw InvalidAbsorptionQuery("need 1 <= k1 <= k2");
  int lv = level(n, freq, beta);
  if (k1 < lv)
    throw InvalidAbsorptionQuery("k1=" + std::to_string(k1) + " below level " + std::to_string(lv) + " of n=" +
                                 site_str(n));
  AbsorptionResult r;
  double lk = std::log(k1 + 1.0);
  r.log_lhs = log_magn(k1, M, beta, gamma) + log_magn(k2, M, beta, gamma) -
              2.0 * alpha * std::log(norm_n_omega(freq, n));
  r.log_rhs = -0.5 * std::log(M) + gamma * k1 / (lk * lk) * std::log(beta) + log_magn(k1 + k2, M, beta, gamma);
  r.holds = r.log_lhs <= r.log_rhs;
  return r;
}

double worst_level_margin(int k1_prime, int k1, int k2, double eps, double M, double beta, double gamma) {
  auto side = [&](int a) {
    double la = std::log(a + 1.0);
    return (a + k2) * std::log(eps) - 0.5 * std::log(M) + gamma * a / (la * la) * std::log(beta) +
           log_magn(a + k2, M, beta, gamma);
  };
  return side(k1_prime) - side(k1);
}

double rotation_tangent(double a, double b, double h) {
  if (h == 0.0 || std::isinf(a) || std::isinf(b)) return 0.0;
  double zeta = (b - a) / (2.0 * h);
  double sg = zeta >= 0.0 ? 1.0 : -1.0;
  return -sg / (std::fabs(zeta) + std::hypot(1.0, zeta));
}

Eigen::Matrix2d jacobi_rotation_2x2(double a, double b, double h, double margin) {
  Eigen::Matrix2d U = Eigen::Matrix2d::Identity();
  if (std::isinf(a) || std::isinf(b) || h == 0.0) return U;
  if (!(std::fabs(h) <= (1.0 - margin) * std::fabs(b - a))) throw DominanceViolation(a, b, h);
  double t = rotation_tangent(a, b, h);
  double c = 1.0 / std::sqrt(1.0 + t * t);
  double s = t * c;
  U << c, -s, s, c;
  return U;
}

double SchemeState::phase(int i) const { return phase_of(freq, x, box.site(i)); }

SchemeState init_state(const SchemeParams& p, double x, double x0, const LatticeBox& ambient) {
  SchemeState st;
  st.x = x;
  st.x0 = x0;
  st.freq = p.freq;
  st.intervals = make_intervals(x0, p.beta, p.s_max);
  st.box = ambient;
  st.origin = ambient.find(Site(static_cast<size_t>(ambient.dim()), 0));
  if (st.origin < 0) throw std::invalid_argument("ambient box must contain the origin");
  st.H0 = assemble_operator(p.potential, p.eps, p.freq, x, ambient).dense();
  st.H = st.H0;
  st.W = Eigen::MatrixXd::Identity(ambient.size(), ambient.size());
  st.f_history.push_back(st.f0());
  return st;
}

std::vector<Rotation> build_U0(const SchemeState& st, int s1, const Site& center, double margin, double* max_ratio,
                               bool* clipped) {
  std::vector<Rotation> out;
  int i = st.box.find(center);
  if (i < 0) return out;
  Site zero(center.size(), 0);
  for (const auto& m : l1_ball(zero, s1)) {
    if (l1_norm(m) == 0) continue;
    int j = st.box.find(add(center, m));
    if (j < 0) {
      if (clipped) *clipped = true;
      continue;
    }
    double a = st.H(i, i);
    double b = st.H(j, j);
    double h = st.H(i, j);
    if (h == 0.0 || std::isinf(a) || std::isinf(b)) continue;
    double ratio = std::fabs(h) / std::fabs(b - a);
    if (max_ratio) *max_ratio = std::max(*max_ratio, ratio);
    if (!(std::fabs(h) <= (1.0 - margin) * std::fabs(b - a)))
      throw DominanceViolation(a, b, h,
                               "step " + std::to_string(s1) + " center " + site_str(center) + " m=" + site_str(m) +
                                   " phase x=" + std::to_string(st.x));
    double t = rotation_tangent(a, b, h);
    double c = 1.0 / std::sqrt(1.0 + t * t);
    out.push_back({i, j, c, t * c});
  }
  return out;
}

CovariantU extend_covariant(const SchemeState& st, const SchemeParams& p, int s1) {
  if (s1 < 1 || s1 >= static_cast<int>(st.intervals.size()))
    throw std::invalid_argument("extend_covariant: step beyond the configured interval sequence");
  CovariantU cu;
  cu.step = s1;
  RegionBuilder rb(st.x, p.freq, st.intervals, st.box);
  RegionFamily fam = rb.basic(s1);
  std::map<Site, Site> owner;
  for (const auto& r : fam.regions) {
    for (const auto& m : r.sites) {
      auto [it, fresh] = owner.emplace(m, r.center);
      if (!fresh)
        throw RegionOverlap("basic regions at step " + std::to_string(s1) + " centered at " + site_str(it->second) +
                            " and " + site_str(r.center) + " share site " + site_str(m));
    }
  }
  for (const auto& r : fam.regions) {
    cu.centers.push_back(r.center);
    cu.regions.push_back(r.sites);
    cu.clipped = cu.clipped || r.clipped;
    auto rots = build_U0(st, s1, r.center, p.dominance_margin, &cu.max_ratio, &cu.clipped);
    cu.rotations.insert(cu.rotations.end(), rots.begin(), rots.end());
  }
  return cu;
}

Eigen::MatrixXd dense_rotations(const std::vector<Rotation>& rots, int n) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  for (const auto& r : rots) {
    Eigen::VectorXd ci = Q.col(r.i);
    Eigen::VectorXd cj = Q.col(r.j);
    Q.col(r.i) = r.c * ci + r.s * cj;
    Q.col(r.j) = -r.s * ci + r.c * cj;
  }
  return Q;
}

void conjugate(Eigen::MatrixXd& H, const Rotation& r) {
  const int n = static_cast<int>(H.rows());
  const double c = r.c, s = r.s;
  for (int k = 0; k < n; ++k) {
    if (k == r.i || k == r.j) continue;
    double hi = H(k, r.i), hj = H(k, r.j);
    double ni = c * hi + s * hj;
    double nj = -s * hi + c * hj;
    H(k, r.i) = H(r.i, k) = ni;
    H(k, r.j) = H(r.j, k) = nj;
  }
  double a = H(r.i, r.i), b = H(r.j, r.j), h = H(r.i, r.j);
  H(r.i, r.i) = c * c * a + 2.0 * c * s * h + s * s * b;
  H(r.j, r.j) = s * s * a - 2.0 * c * s * h + c * c * b;
  H(r.i, r.j) = H(r.j, r.i) = c * s * (b - a) + (c * c - s * s) * h;
}

SchemeState step(const SchemeState& st, const SchemeParams& p) {
  const int s1 = st.s + 1;
  CovariantU cu = extend_covariant(st, p, s1);
  SchemeState nx = st;
  nx.s = s1;
  std::set<int> touched;
  for (const auto& r : cu.rotations) {
    bool fresh = !touched.count(r.i) && !touched.count(r.j);
    conjugate(nx.H, r);
    if (fresh) nx.H(r.i, r.j) = nx.H(r.j, r.i) = 0.0;
    Eigen::VectorXd ci = nx.W.col(r.i);
    Eigen::VectorXd cj = nx.W.col(r.j);
    nx.W.col(r.i) = r.c * ci + r.s * cj;
    nx.W.col(r.j) = -r.s * ci + r.c * cj;
    touched.insert(r.i);
    touched.insert(r.j);
  }

  StepRecord rec;
  rec.s = s1;
  rec.active_sites = static_cast<int>(cu.centers.size());
  rec.clipped = cu.clipped;
  rec.max_dominance_ratio = cu.max_ratio;

  // operator norm of U - 1, block by block
  size_t pos = 0;
  for (size_t b = 0; b < cu.centers.size(); ++b) {
    const auto& sites = cu.regions[b];
    std::map<int, int> local;
    for (const auto& m : sites) local.emplace(st.box.find(m), static_cast<int>(local.size()));
    std::vector<Rotation> mine;
    int ci = st.box.find(cu.centers[b]);
    while (pos < cu.rotations.size() && cu.rotations[pos].i == ci) {
      Rotation r = cu.rotations[pos++];
      r.i = local.at(r.i);
      r.j = local.at(r.j);
      mine.push_back(r);
    }
    if (mine.empty()) continue;
    int k = static_cast<int>(local.size());
    Eigen::MatrixXd D = dense_rotations(mine, k) - Eigen::MatrixXd::Identity(k, k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D);
    rec.u_minus_one = std::max(rec.u_minus_one, svd.singularValues()(0));
  }
  rec.conv3_bound = std::pow(p.eps, s1 * (1.0 - p.delta / 10.0));
  rec.conv3_ok = rec.u_minus_one <= rec.conv3_bound;
  if (!rec.conv3_ok && p.enforce_conv3)
    throw ToleranceBreach("||U^(" + std::to_string(s1) + ") - 1|| = " + std::to_string(rec.u_minus_one) +
                          " exceeds " + std::to_string(rec.conv3_bound));

  const int o = nx.origin;
  double r0 = 0.0;
  if (!std::isinf(nx.H(o, o)))
    for (int k = 0; k < nx.H.cols(); ++k)
      if (k != o && !std::isinf(nx.H(k, k))) r0 += nx.H(o, k) * nx.H(o, k);
  rec.row0_residual = std::sqrt(r0);

  rec.f0 = nx.f0();
  double prev = st.f0();
  rec.drift = (std::isinf(rec.f0) && std::isinf(prev)) ? 0.0 : std::fabs(rec.f0 - prev);
  rec.log_ind3_bound = (2 * s1 - 1) * safe_log(p.eps) + log_magn(2 * s1 - 1, p.M, p.beta, p.gamma());
  rec.ind3_ok = rec.drift == 0.0 || std::log(rec.drift) <= rec.log_ind3_bound;
  nx.f_history.push_back(rec.f0);

  const int n = nx.box.size();
  rec.orthogonality = (nx.W.transpose() * nx.W - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();

  nx.support = compose_supports(st.support, cu.regions);
  nx.last_regions = cu.regions;
  std::vector<int> label(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) label[static_cast<size_t>(i)] = -1 - i;
  for (size_t c = 0; c < nx.support.size(); ++c)
    for (const auto& m : nx.support[c]) label[static_cast<size_t>(nx.box.find(m))] = static_cast<int>(c);
  const double range = s1 * (1.0 + p.delta / 10.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      double w = nx.W(i, j);
      int dist = l1_dist(nx.box.site(i), nx.box.site(j));
      if (w != 0.0) {
        if (label[static_cast<size_t>(i)] != label[static_cast<size_t>(j)]) rec.support_ok = false;
        if (dist > range) rec.w_beyond_range = std::max(rec.w_beyond_range, std::fabs(w));
      }
      if (dist > range && nx.H(i, j) != 0.0) rec.h_beyond_range = std::max(rec.h_beyond_range, std::fabs(nx.H(i, j)));
    }
  }
  nx.records.push_back(rec);
  return nx;
}

int declared_order(const SchemeState& st, int i, int j) {
  int dist = l1_dist(st.box.site(i), st.box.site(j));
  int k = 0;
  double pi = st.phase(i), pj = st.phase(j);
  for (int l = 1; l <= st.s && l < static_cast<int>(st.intervals.size()); ++l)
    if (st.intervals[static_cast<size_t>(l)].contains(pi) || st.intervals[static_cast<size_t>(l)].contains(pj)) k = l;
  return std::max(dist, k > 0 ? k + 1 : 0);
}

OrderReport check_orders(const SchemeState& st, const SchemeParams& p) {
  OrderReport rep;
  rep.s = st.s;
  const int n = st.box.size();
  const double range = st.s * (1.0 + p.delta / 10.0);
  bool first1 = true, first2 = true;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double v = std::fabs(st.H(i, j));
      if (v == 0.0) continue;
      ++rep.checked;
      int dist = l1_dist(st.box.site(i), st.box.site(j));
      if (dist > range) {
        ++rep.beyond_range_nonzero;
        rep.beyond_range_max = std::max(rep.beyond_range_max, v);
      }
      double m1 = log_order_bound(dist, dist, st.s, p) - std::log(v);
      if (first1 || m1 < rep.ind1_worst_log_margin) rep.ind1_worst_log_margin = m1;
      first1 = false;
      if (m1 < 0.0) ++rep.ind1_violations;
      int r = declared_order(st, i, j);
      if (r > dist) {
        ++rep.ind2_checked;
        double m2 = log_order_bound(r, dist, st.s, p) - std::log(v);
        if (first2 || m2 < rep.ind2_worst_log_margin) rep.ind2_worst_log_margin = m2;
        first2 = false;
        if (m2 < 0.0) ++rep.ind2_violations;
      }
    }
  }
  if (first1) rep.ind1_worst_log_margin = kInf;
  if (first2) rep.ind2_worst_log_margin = kInf;
  return rep;
}

void merge(OrderReport& into, const OrderReport& other) {
  bool empty = into.checked == 0 && into.ind1_worst_log_margin == 0.0;
  into.s = std::max(into.s, other.s);
  into.checked += other.checked;
  into.ind1_violations += other.ind1_violations;
  into.ind2_violations += other.ind2_violations;
  into.ind2_checked += other.ind2_checked;
  into.ind1_worst_log_margin =
      empty ? other.ind1_worst_log_margin : std::min(into.ind1_worst_log_margin, other.ind1_worst_log_margin);
  into.ind2_worst_log_margin =
      empty ? other.ind2_worst_log_margin : std::min(into.ind2_worst_log_margin, other.ind2_worst_log_margin);
  into.beyond_range_nonzero += other.beyond_range_nonzero;
  into.beyond_range_max = std::max(into.beyond_range_max, other.beyond_range_max);
}

DriftReport check_diag_drift(const SchemeState& st, const SchemeParams& p) {
  DriftReport rep;
  for (size_t k = 1; k < st.f_history.size(); ++k) {
    int s = static_cast<int>(k);
    double a = st.f_history[k], b = st.f_history[k - 1];
    double d = (std::isinf(a) && std::isinf(b)) ? 0.0 : std::fabs(a - b);
    double lb = (2 * s - 1) * safe_log(p.eps) + log_magn(2 * s - 1, p.M, p.beta, p.gamma());
    rep.drift.push_back(d);
    rep.log_bound.push_back(lb);
    if (d != 0.0 && std::log(d) > lb) ++rep.violations;
  }
  for (size_t k = 1; k < rep.drift.size(); ++k)
    rep.decay_ratio.push_back(rep.drift[k - 1] > 0.0 ? rep.drift[k] / rep.drift[k - 1] : 0.0);
  return rep;
}

std::vector<double> phase_grid(const SchemeParams& p, double x0, int s) {
  std::vector<double> xs{frac(x0)};
  const int g = p.ind2_grid;
  for (int i = 0; i < g; ++i) xs.push_back((i + 0.5) / g);
  for (int k = 1; k <= s; ++k) {
    double r = beta_s(p.beta, k);
    for (int i = 0; i < g; ++i) xs.push_back(frac(x0 + r * (2.0 * (i + 0.5) / g - 1.0)));
  }
  return xs;
}

GridMonitor monitor_grid(const SchemeParams& p, double x0, const LatticeBox& ambient, int s) {
  SchemeParams q = p;
  q.s_max = std::max(p.s_max, s);
  GridMonitor gm;
  gm.s = s;
  bool first = true;
  for (double x : phase_grid(q, x0, s)) {
    SchemeState st = init_state(q, x, x0, ambient);
    merge(gm.orders, check_orders(st, q));
    for (int k = 0; k < s; ++k) {
      st = step(st, q);
      merge(gm.orders, check_orders(st, q));
    }
    DriftReport dr = check_diag_drift(st, q);
    gm.drift_violations += dr.violations;
    for (size_t k = 0; k < dr.drift.size(); ++k) {
      double m = dr.drift[k] == 0.0 ? kInf : dr.log_bound[k] - std::log(dr.drift[k]);
      if (first || m < gm.drift_worst_log_margin) gm.drift_worst_log_margin = m;
      first = false;
    }
    ++gm.phases;
  }
  return gm;
}

double diagonal_entry(const SchemeParams& p, double x, double x0, int s, const LatticeBox& ambient) {
  SchemeParams q = p;
  q.s_max = std::max(p.s_max, s);
  SchemeState st = init_state(q, x, x0, ambient);
  for (int k = 0; k < s; ++k) st = step(st, q);
  return st.f0();
}

MonotoneReport check_approx_monotone(const SchemeParams& p, double x0, int s, const LatticeBox& ambient,
                                     const std::vector<PhasePair>& pairs, int ratio_samples, double tol) {
  MonotoneReport rep;
  SchemeParams q = p;
  q.s_max = std::max(p.s_max, s);
  auto I = make_intervals(x0, q.beta, q.s_max);
  std::map<double, double> cache;
  auto f = [&](double x) {
    auto it = cache.find(x);
    if (it != cache.end()) return it->second;
    double v = diagonal_entry(q, x, x0, s, ambient);
    cache.emplace(x, v);
    return v;
  };
  const int d = q.freq.dim();
  const double a = q.alpha();
  bool first = true;
  for (auto pr : pairs) {
    double x = pr.x, y = pr.y;
    if (!(0.0 <= x && x < y && y < 1.0)) continue;
    bool xs = I[static_cast<size_t>(s)].contains(x), ys = I[static_cast<size_t>(s)].contains(y);
    if (!xs && !ys) continue;
    ++rep.pairs;
    double diff = f(y) - f(x);
    double main = std::pow(2.0, 1.0 - a) * std::pow(y - x, a);
    bool bad0 = false, badk = false;
    for (int k = 0; k <= s; ++k) {
      bool ok_k = (xs && I[static_cast<size_t>(k)].contains(y)) || (ys && I[static_cast<size_t>(k)].contains(x));
      if (!ok_k) continue;
      double corr = std::pow(4.0, d) * (1.0 - 1.0 / (s - k + 2.0)) *
                    std::exp(k * safe_log(q.eps) + log_magn(k, q.M, q.beta, q.gamma()));
      if (k == 0) corr = std::pow(4.0, d) * (1.0 - 1.0 / (s + 2.0)) * magn(0, q.M, q.beta, q.gamma());
      double margin = diff - main + corr;
      if (first || margin < rep.worst_margin) rep.worst_margin = margin;
      first = false;
      if (k == 0) rep.worst_margin_k0 = std::min(rep.worst_margin_k0, margin);
      else rep.worst_margin_kpos = std::min(rep.worst_margin_kpos, margin);
      if (margin < -tol) {
        if (k == 0) bad0 = true;
        else badk = true;
      }
    }
    if (bad0 || badk) ++rep.violations;
    if (bad0) ++rep.k0_violations;
    if (badk) ++rep.kpos_violations;
  }

  if (s >= 1 && ratio_samples > 0) {
    const double r = beta_s(q.beta, s);
    const double lower = std::pow(2.0, -a);
    bool firstr = true;
    Site zero(static_cast<size_t>(d), 0);
    for (int t = 0; t < ratio_samples; ++t) {
      double x = ratio_samples == 1 ? frac(x0) : frac(x0 + r * 0.9 * (2.0 * t / (ratio_samples - 1) - 1.0));
      if (!I[static_cast<size_t>(s)].contains(x)) continue;
      double fx = f(x);
      for (const auto& n : l1_ball(zero, 10 * s)) {
        if (l1_norm(n) == 0) continue;
        if (norm_n_omega(q.freq, n) < 10.0 * 2.0 * r) continue;
        double xn = phase_of(q.freq, x, n);
        double fn = diagonal_entry(q, xn, x0, s, ambient);
        double dx = frac(x) - xn;
        double den = (dx > 0 ? 1.0 : -1.0) * std::pow(std::fabs(dx), a);
        double ratio = (fx - fn) / den;
        ++rep.ratio_checks;
        if (firstr || ratio < rep.worst_ratio) rep.worst_ratio = ratio;
        firstr = false;
        if (ratio < lower - tol) ++rep.ratio_violations;
      }
    }
  }
  return rep;
}

Eigen::VectorXd apply_extended(const Eigen::MatrixXd& H, const Eigen::VectorXd& v) {
  const int n = static_cast<int>(H.rows());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int c = 0; c < n; ++c) {
      if (v(c) == 0.0) continue;
      acc += H(r, c) * v(c);
    }
    y(r) = acc;
  }
  return y;
}

SchemeResult run_scheme(const SchemeParams& p, double x0, const LatticeBox& ambient, std::optional<double> x) {
  p.validate();
  const int R = 3 * p.s_max + 2;
  const int d = ambient.dim();
  {
    Site c(static_cast<size_t>(d), -R);
    while (true) {
      if (!ambient.contains(c))
        throw std::invalid_argument("ambient box must contain the cube of radius " + std::to_string(R));
      int k = 0;
      while (k < d && c[static_cast<size_t>(k)] == R) c[static_cast<size_t>(k++)] = -R;
      if (k == d) break;
      ++c[static_cast<size_t>(k)];
    }
  }
  SchemeResult res;
  SchemeState st = init_state(p, x.value_or(x0), x0, ambient);
  const int o = st.origin;
  res.stop_reason = "s_max";
  if (std::isinf(st.f0())) {
    res.stop_reason = "infinite coupling";
  } else {
    auto row0 = [&](const SchemeState& s) {
      double acc = 0.0;
      for (int k = 0; k < s.H.cols(); ++k)
        if (k != o && !std::isinf(s.H(k, k))) acc += s.H(o, k) * s.H(o, k);
      return std::sqrt(acc);
    };
    if (p.stop_early && row0(st) < p.residual_target) res.stop_reason = "residual";
    else
      for (int k = 0; k < p.s_max; ++k) {
        st = step(st, p);
        if (p.stop_early && row0(st) < p.residual_target) {
          res.stop_reason = "residual";
          break;
        }
      }
  }
  res.E = st.f0();
  const int n = st.box.size();
  if (std::isinf(res.E)) {
    res.psi = Eigen::VectorXd::Zero(n);
    res.psi(o) = 1.0;
    res.residual = 0.0;
  } else {
    res.psi = st.W.col(o);
    res.psi /= res.psi.norm();
    Eigen::VectorXd r = apply_extended(st.H0, res.psi) - res.E * res.psi;
    res.residual = r.norm();
  }
  res.psi0_defect = std::fabs(res.psi(o) - 1.0);
  for (int k = 0; k < n; ++k) {
    if (k == o || res.psi(k) == 0.0) continue;
    int len = l1_norm(st.box.site(k));
    double bound = std::pow(p.eps, (1.0 - p.delta) * len);
    res.decay_worst = std::max(res.decay_worst, bound > 0.0 ? std::fabs(res.psi(k)) / bound : kInf);
  }
  res.state = std::move(st);
  if (!(res.residual <= p.residual_target))
    throw NoConvergence("residual " + std::to_string(res.residual) + " above target after " +
                        std::to_string(res.state.s) + " steps");
  return res;
}

std::vector<FamilyMember> eigen_family(const SchemeParams& p, double x0, const LatticeBox& ambient,
                                       const std::vector<Site>& sites) {
  std::vector<FamilyMember> out;
  for (const auto& n : sites) {
    double xn = frac(x0 - dot(p.freq, n));
    SchemeResult r = run_scheme(p, xn, ambient);
    FamilyMember fm;
    fm.n = n;
    fm.localized_at = sub(Site(n.size(), 0), n);
    fm.E = r.E;
    fm.psi = Eigen::VectorXd::Zero(ambient.size());
    for (int i = 0; i < ambient.size(); ++i) {
      int j = ambient.find(add(ambient.site(i), n));
      if (j >= 0) fm.psi(i) = r.psi(j);
    }
    out.push_back(std::move(fm));
  }
  return out;
}

nlohmann::json to_json(const StepRecord& r) {
  return {{"s", r.s},
          {"active_sites", r.active_sites},
          {"clipped", r.clipped},
          {"max_dominance_ratio", r.max_dominance_ratio},
          {"u_minus_one", r.u_minus_one},
          {"conv3_bound", r.conv3_bound},
          {"conv3_ok", r.conv3_ok},
          {"row0_residual", r.row0_residual},
          {"f0", r.f0},
          {"drift", r.drift},
          {"log_ind3_bound", r.log_ind3_bound},
          {"ind3_ok", r.ind3_ok},
          {"orthogonality", r.orthogonality},
          {"support_ok", r.support_ok},
          {"w_beyond_range", r.w_beyond_range},
          {"h_beyond_range", r.h_beyond_range}};
}

nlohmann::json diagnostics_json(const SchemeResult& r) {
  nlohmann::json j;
  j["E"] = r.E;
  j["steps"] = r.state.s;
  j["stop_reason"] = r.stop_reason;
  j["residual"] = r.residual;
  j["decay_worst"] = r.decay_worst;
  j["psi0_defect"] = r.psi0_defect;
  j["records"] = nlohmann::json::array();
  for (const auto& rec : r.state.records) j["records"].push_back(to_json(rec));
  return j;
}

}  // namespace quasidiag
