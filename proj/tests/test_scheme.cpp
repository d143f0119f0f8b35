#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "quasidiag/errors.hpp"
#include "quasidiag/oracle.hpp"
#include "quasidiag/scheme.hpp"

using namespace quasidiag;

namespace {
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

SchemeParams desk(double eps = 1e-3) {
  SchemeParams p;
  p.potential = PotentialSpec::sawtooth();
  p.freq = Frequency{{kGolden}, 1.0, 1.0};
  p.eps = eps;
  p.delta = 0.5;
  p.beta = 0.05;
  p.M = 1e140;
  p.s_max = 5;
  return p;
}

std::vector<double> eigs(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const auto& v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}
}  // namespace

TEST_CASE("magn values") {
  double lm = log_magn(1, 10.0, 0.1, 3.0) / std::log(10.0);
  CHECK(lm == doctest::Approx(0.5 - 36.0 / std::log(2.0)).epsilon(1e-12));
  CHECK(log_magn(0, 1e4, 0.05, 3.0) == doctest::Approx(-0.5 * std::log(1e4)));
  const double M = 1e4, b = 0.05, g = 3.0;
  for (int k1 = 1; k1 <= 40; ++k1)
    for (int k2 = 1; k2 <= 40; ++k2) {
      double lhs = log_magn(k1, M, b, g) + log_magn(k2, M, b, g) - log_magn(k1 + k2, M, b, g);
      CHECK(lhs <= -0.5 * std::log(M) + 1e-9);
      CHECK(log_magn(k1 + k2, M, b, g) <= k2 * std::log(M) + log_magn(k1, M, b, g) + 1e-9);
    }
}

TEST_CASE("absorption") {
  Frequency g{{kGolden}, 1.0, 1.0};
  const double M = 1e4, beta = 0.05, gamma = 3.0;
  CHECK_THROWS_AS(absorption_check(1, 2, {3}, g, M, beta, gamma, 1.0), InvalidAbsorptionQuery);
  CHECK_THROWS_AS(absorption_check(3, 2, {2}, g, M, beta, gamma, 1.0), InvalidAbsorptionQuery);
  Frequency close{{0.001}, 1.0, 1.0};
  REQUIRE(level({1}, close, beta) == 2);
  CHECK_THROWS_AS(absorption_check(1, 1, {1}, close, M, beta, gamma, 1.0), InvalidAbsorptionQuery);
  long checked = 0;
  for (int k2 = 1; k2 <= 30; ++k2)
    for (const Site& n : {Site{k2}, Site{-k2}}) {
      int lv = level(n, g, beta);
      for (int k1 = std::max(1, lv); k1 <= k2; ++k1) {
        CHECK(absorption_check(k1, k2, n, g, M, beta, gamma, 1.0).holds);
        for (int kp = 1; kp <= k1; ++kp) CHECK(worst_level_margin(kp, k1, k2, 1e-3, M, beta, gamma) >= 0.0);
        ++checked;
      }
    }
  CHECK(checked > 400);
}

TEST_CASE("jacobi rotation") {
  CHECK(jacobi_rotation_2x2(0.0, 1.0, 0.0, 1e-3).isIdentity());
  CHECK(jacobi_rotation_2x2(-INFINITY, 1.0, 0.3, 1e-3).isIdentity());

  Eigen::Matrix2d A;
  A << 0.0, 0.5, 0.5, 2.0;
  auto U = jacobi_rotation_2x2(0.0, 2.0, 0.5, 1e-3);
  Eigen::Matrix2d D = U.transpose() * A * U;
  CHECK(D(0, 0) == doctest::Approx(1.0 - std::sqrt(1.25)).epsilon(1e-14));
  CHECK(D(1, 1) == doctest::Approx(1.0 + std::sqrt(1.25)).epsilon(1e-14));
  CHECK(std::fabs(D(0, 1)) < 1e-15);
  CHECK((U.transpose() * U - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  for (double tau : {0.1, 0.05, 0.01, -0.07, 1e-4}) {
    double a = 0.3, b = 1.1, h = tau * (b - a);
    Eigen::Matrix2d first;
    first << 1.0, tau, -tau, 1.0;
    auto R = jacobi_rotation_2x2(a, b, h, 1e-3);
    CHECK((R - first).norm() <= 10.0 * tau * tau);
    auto L = jacobi_rotation_2x2(b, a, h, 1e-3);
    CHECK(std::fabs(L(0, 0)) > 0.9);
  }

  CHECK_THROWS_AS(jacobi_rotation_2x2(0.0, 1.0, 1.0, 1e-3), DominanceViolation);
  CHECK_THROWS_AS(jacobi_rotation_2x2(0.0, 0.0, 1e-9, 1e-3), DominanceViolation);
}

TEST_CASE("two-site step zeroes the coupling") {
  auto p = desk(0.01);
  p.s_max = 2;
  auto box = LatticeBox::cube(1, 0, 1);
  auto st = init_state(p, 0.1, 0.1, box);
  auto a = st.H(0, 0), b = st.H(1, 1), h = st.H(0, 1);
  auto next = step(st, p);
  CHECK(next.H(0, 1) == 0.0);
  CHECK(next.H(1, 0) == 0.0);
  CHECK(next.f0() == doctest::Approx((a + b - std::sqrt((b - a) * (b - a) + 4 * h * h)) / 2).epsilon(1e-15));
  double drift = std::fabs(next.f0() - a);
  CHECK(drift <= h * h / std::fabs(b - a));
}

TEST_CASE("eps zero") {
  auto p = desk(0.0);
  auto box = LatticeBox::centered(1, 20);
  auto r = run_scheme(p, 0.37, box);
  CHECK(r.E == sample_potential(p.potential, 0.37));
  CHECK(r.psi0_defect == 0.0);
  for (int i = 0; i < r.psi.size(); ++i) CHECK(r.psi(i) == (i == r.state.origin ? 1.0 : 0.0));
  auto st = init_state(p, 0.37, 0.37, box);
  auto nx = step(st, p);
  CHECK((nx.H - st.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK(nx.W.isIdentity());
  auto d = check_diag_drift(r.state, p);
  for (double v : d.drift) CHECK(v == 0.0);
}

TEST_CASE("u0 shapes") {
  auto p = desk();
  auto box = LatticeBox::centered(1, 20);
  auto st = init_state(p, 0.37, 0.37, box);
  auto rots = build_U0(st, 1, {0}, p.dominance_margin);
  REQUIRE(rots.size() == 2);
  for (const auto& r : rots) CHECK(std::abs(box.site(r.i)[0]) + std::abs(box.site(r.j)[0]) <= 1);
  auto zero = st;
  zero.H = zero.H.diagonal().asDiagonal();
  for (const auto& r : build_U0(zero, 2, {0}, p.dominance_margin)) CHECK(r.identity());
}

TEST_CASE("covariant extension") {
  auto p = desk();
  auto box = LatticeBox::centered(1, 20);
  auto st = init_state(p, 0.37, 0.37, box);
  auto cu = extend_covariant(st, p, 1);
  CHECK(cu.centers.size() == 1);
  auto far = init_state(p, 0.37 + 0.2, 0.37, box);
  auto none = extend_covariant(far, p, 3);
  auto U = dense_rotations(none.rotations, box.size());
  for (const auto& c : none.centers) CHECK(box.contains(c));
  // blocks of different regions never couple
  for (size_t a = 0; a < cu.regions.size(); ++a)
    for (size_t b = a + 1; b < cu.regions.size(); ++b) CHECK_FALSE(intersects(cu.regions[a], cu.regions[b]));
  CHECK((U.transpose() * U - Eigen::MatrixXd::Identity(box.size(), box.size())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("desk run") {
  auto p = desk();
  auto box = LatticeBox::centered(1, 20);
  auto r = run_scheme(p, 0.37, box);
  CHECK(r.residual <= 1e-12);
  CHECK(r.decay_worst <= 1.0);
  CHECK(r.psi0_defect < std::pow(p.eps, 1 - p.delta));
  for (const auto& rec : r.state.records) {
    CHECK(rec.orthogonality <= 1e-12);
    CHECK(rec.support_ok);
    CHECK(rec.ind3_ok);
  }
  auto orders = check_orders(r.state, p);
  CHECK(orders.ok());
  CHECK(orders.ind1_worst_log_margin >= std::log(10.0));

  auto oracle = dense_eig(assemble_operator(p.potential, p.eps, p.freq, 0.37, box));
  double best = 0.0, E = 0.0;
  for (int k = 0; k < oracle.vectors.cols(); ++k)
    if (std::fabs(oracle.vectors(r.state.origin, k)) > best) {
      best = std::fabs(oracle.vectors(r.state.origin, k));
      E = oracle.values[static_cast<size_t>(k)];
    }
  CHECK(std::fabs(E - r.E) <= 1e-12);

  double Hn = r.state.H0.cwiseAbs().maxCoeff();
  auto st = init_state(p, 0.37, 0.37, box);
  auto base = eigs(st.H);
  for (int s = 0; s < 4; ++s) {
    st = step(st, p);
    CHECK(multiset_distance(base, eigs(st.H)) <= 1e-11 * Hn);
    Eigen::MatrixXd back = st.W.transpose() * st.H0 * st.W;
    CHECK((back - st.H).cwiseAbs().maxCoeff() <= 1e-11 * Hn);
  }

  auto drift = check_diag_drift(r.state, p);
  CHECK(drift.ok());
  for (double q : drift.decay_ratio) CHECK(q < 1.0);
}

TEST_CASE("grid monitors and monotonicity") {
  auto p = desk();
  p.s_max = 3;
  auto box = LatticeBox::centered(1, 16);
  auto g = monitor_grid(p, 0.37, box, 3);
  CHECK(g.phases > 64);
  CHECK(g.ok());

  auto p0 = desk(0.0);
  p0.s_max = 2;
  std::vector<PhasePair> pairs{{0.37, 0.371}, {0.37, 0.39}, {0.2, 0.8}};
  auto m0 = check_approx_monotone(p0, 0.37, 0, box, pairs);
  CHECK(m0.ok());
  auto m = check_approx_monotone(p, 0.37, 2, box, pairs);
  CHECK(m.ok());
}

TEST_CASE("eigen family") {
  auto p = desk();
  p.s_max = 5;
  auto box = LatticeBox::centered(1, 24);
  std::vector<Site> sites;
  for (int n = -4; n <= 4; ++n) sites.push_back({n});
  auto fam = eigen_family(p, 0.37, box, sites);
  REQUIRE(fam.size() == 9);
  auto base = run_scheme(p, 0.37, box);
  for (const auto& m : fam)
    if (m.n == Site{0}) {
      CHECK(m.E == base.E);
      CHECK((m.psi - base.psi).cwiseAbs().maxCoeff() == 0.0);
    }
  double worst = 0.0;
  for (size_t a = 0; a < fam.size(); ++a)
    for (size_t b = 0; b < fam.size(); ++b)
      worst = std::max(worst, std::fabs(fam[a].psi.dot(fam[b].psi) - (a == b ? 1.0 : 0.0)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("box too small") {
  auto p = desk();
  CHECK_THROWS(run_scheme(p, 0.37, LatticeBox::centered(1, 5)));
}
