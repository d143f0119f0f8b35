#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "quasidiag/errors.hpp"
#include "quasidiag/oracle.hpp"

using namespace quasidiag;

namespace {
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
Frequency golden() { return Frequency{{kGolden}, 1.0, 1.0}; }

SchemeParams desk(double eps = 1e-3) {
  SchemeParams p;
  p.potential = PotentialSpec::sawtooth();
  p.freq = golden();
  p.eps = eps;
  p.beta = 0.05;
  p.M = 1e140;
  p.s_max = 5;
  return p;
}

Eigen::MatrixXd random_sym(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = g(rng);
  return A;
}

PotentialSpec two_step() { return PotentialSpec::table({0.0, 0.5}, {0.4, 0.6}, 1.0, Interpolation::Step); }
}  // namespace

TEST_CASE("dense_eig basics") {
  Eigen::MatrixXd D = Eigen::Vector3d(2.0, -1.0, 0.5).asDiagonal();
  auto r = dense_eig(D);
  CHECK(r.values == std::vector<double>{-1.0, 0.5, 2.0});
  CHECK(r.vectors(1, 0) == 1.0);
  CHECK(r.vectors(2, 1) == 1.0);
  CHECK(r.vectors(0, 2) == 1.0);

  Eigen::Matrix2d S;
  S << 0, 1, 1, 0;
  auto s = dense_eig(S);
  CHECK(s.values[0] == doctest::Approx(-1.0));
  CHECK(s.values[1] == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto A = random_sym(rng, 8);
    auto e = dense_eig(A);
    CHECK(reconstruction_error(A, e) <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()));
    CHECK(orthonormality_error(e) <= 1e-12);
    CHECK(max_residual(A, e) <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()));
    for (int k = 0; k < 8; ++k) {
      Eigen::Index at;
      e.vectors.col(k).cwiseAbs().maxCoeff(&at);
      CHECK(e.vectors(at, k) > 0);
    }
  }
}

TEST_CASE("dense_eig deflates minus infinity") {
  auto op = assemble_operator(PotentialSpec::maryland(), 0.1, golden(), 0.0, LatticeBox::centered(1, 4));
  auto r = dense_eig(op);
  REQUIRE(r.infinite_site == op.box.find({0}));
  CHECK(std::isinf(r.values[0]));
  CHECK(r.values[0] < 0);
  for (size_t k = 1; k < r.values.size(); ++k) CHECK(std::isfinite(r.values[k]));
  CHECK(r.vectors(r.infinite_site, 0) == 1.0);
}

TEST_CASE("multiset distance") {
  CHECK(multiset_distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(multiset_distance({1.0, 3.0}, {2.0, 3.0}) == 1.0);
  CHECK(multiset_distance({3.0, 1.0}, {3.0, 2.0}) == 1.0);
  CHECK_THROWS_AS(multiset_distance({1.0}, {1.0, 2.0}), CardinalityMismatch);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto A = random_sym(rng, 6);
    Eigen::MatrixXd P = 0.01 * random_sym(rng, 6);
    double norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(multiset_distance(dense_eig(A).values, dense_eig(Eigen::MatrixXd(A + P)).values) <= norm + 1e-12);
  }
}

TEST_CASE("branch labels") {
  auto f = PotentialSpec::sawtooth();
  auto box = LatticeBox::centered(1, 5);
  auto t0 = label_branches(f, 0.0, golden(), 0.3, box);
  for (const auto& b : t0.branches) CHECK(b.E == doctest::Approx(b.phase).epsilon(1e-14));
  auto t = label_branches(f, 0.05, golden(), 0.3, box);
  CHECK(pairing_consistent(t));
  CHECK(t.branches.size() == 11);

  auto E = branch_on_grid(f, 0.05, golden(), box, {2}, 40);
  for (size_t k = 1; k < E.size(); ++k) CHECK(E[k] >= E[k - 1]);
  // sampled Holder bound inside the continuity interval
  for (size_t k = 1; k < E.size(); ++k) CHECK(E[k] - E[k - 1] >= 1.0 / 40 - 1e-12);
}

TEST_CASE("branch labels brute force") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> sz(2, 12);
  for (int t = 0; t < 100; ++t) {
    int L = sz(rng);
    auto box = LatticeBox::cube(1, 0, L - 1);
    auto tab = label_branches(PotentialSpec::sawtooth(), 0.02 * u(rng), golden(), u(rng), box);
    CHECK(pairing_consistent(tab));
  }
  Frequency two{{std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0}, 3.0, 1.0};
  for (int t = 0; t < 100; ++t) {
    auto tab = label_branches(PotentialSpec::sawtooth(), 0.02 * u(rng), two, u(rng), LatticeBox::centered(2, 1));
    CHECK(pairing_consistent(tab));
  }
}

TEST_CASE("branch distance") {
  auto box = LatticeBox::centered(1, 20);
  auto p = desk();
  int s = 3;
  auto dom = theorem_domain(p, 0.37, s, box);
  check_domain(p, 0.37, s, box, dom);
  auto r = branch_distance_check(p, 0.37, 0.37, s, box, dom);
  CHECK(r.ok);
  CHECK(r.distance <= 1e-10);
  auto p0 = desk(0.0);
  CHECK(branch_distance_check(p0, 0.37, 0.37, s, box, theorem_domain(p0, 0.37, s, box)).distance == 0.0);
  SiteSet tiny{{0}};
  CHECK_THROWS_AS(check_domain(p, 0.37, s, box, tiny), DomainConditionViolated);
}

TEST_CASE("eigenvalue function") {
  auto box = LatticeBox::centered(1, 20);
  std::vector<double> xs;
  for (int k = 0; k < 64; ++k) xs.push_back((k + 0.5) / 64);
  auto r0 = eigenvalue_function(desk(0.0), xs, box);
  for (size_t k = 0; k < xs.size(); ++k) CHECK(r0.E[k] == sample_potential(PotentialSpec::sawtooth(), xs[k]));
  auto r = eigenvalue_function(desk(), xs, box, 1e-10, 0.05);
  CHECK(r.violations == 0);
  CHECK(r.lipschitz_violations == 0);
}

TEST_CASE("ids") {
  std::vector<double> grid{-0.5, 0.1, 0.25, 0.5, 0.9, 1.5};
  auto t0 = ids(PotentialSpec::sawtooth(), 0.0, golden(), {100}, grid, 64);
  CHECK(t0.N[0][0] == 0.0);
  CHECK(t0.N[0].back() == 1.0);
  for (size_t k = 1; k + 1 < grid.size(); ++k) CHECK(std::fabs(t0.N[0][k] - grid[k]) <= 0.02);
  auto t = ids(PotentialSpec::sawtooth(), 1e-3, golden(), {100, 200}, grid, 32);
  for (const auto& N : t.N)
    for (size_t k = 1; k < N.size(); ++k) CHECK(N[k] >= N[k - 1]);
}

TEST_CASE("gap detection") {
  CHECK(find_gaps({0.0, 0.1, 0.5, 0.55}, 0.3).size() == 1);
  auto none = gap_detect(PotentialSpec::sawtooth(), 0.0, golden(), {100, 200}, 1e-2, 1e-3, 64);
  CHECK(none.gaps.empty());
  auto two = gap_detect(two_step(), 0.0, golden(), {100, 200}, 1e-4, 1e-3, 64);
  REQUIRE(two.gaps.size() == 1);
  CHECK(two.gaps[0].left == doctest::Approx(0.4));
  CHECK(two.gaps[0].right == doctest::Approx(0.6));
}

TEST_CASE("arc grid and rank one sweep") {
  auto f = PotentialSpec::sawtooth();
  auto g = arc_t_grid(f, 11, 2.0);
  REQUIRE(g.size() == 11);
  CHECK(g.front() == 1.0);
  CHECK(std::isinf(g[5]));
  CHECK(g.back() == 0.0);
  for (size_t k = 1; k < g.size(); ++k)
    if (!std::isinf(g[k]) && !std::isinf(g[k - 1])) CHECK(g[k] > g[k - 1]);

  auto box = box_with_sites(1, 40);
  auto tr = rank_one_sweep(f, 0.01, golden(), box, g, {});
  CHECK(tr.spectra.size() == g.size());
  CHECK(tr.monotonicity_violations == 0);
  auto plain = spectrum_values(f, 0.01, golden(), 0.0, box);
  CHECK(multiset_distance(plain, tr.spectra.back()) <= 1e-13);
  for (const auto& traj : tr.trajectories) CHECK(traj.size() == g.size());
}
