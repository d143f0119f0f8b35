#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "quasidiag/errors.hpp"
#include "quasidiag/model.hpp"

using namespace quasidiag;

namespace {
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
}

TEST_CASE("sawtooth samples") {
  auto f = PotentialSpec::sawtooth();
  CHECK(sample_potential(f, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sample_potential(f, 1.25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sample_potential(f, -0.75) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sample_potential(f, 0.0) == 0.0);
}

TEST_CASE("maryland tangent") {
  auto f = PotentialSpec::maryland();
  CHECK(std::fabs(sample_potential(f, 0.5)) < 1e-15);
  CHECK(std::isinf(sample_potential(f, 0.0)));
  CHECK(sample_potential(f, 0.0) < 0);
  CHECK(std::isinf(sample_potential(f, 3.0)));
  CHECK(sample_potential(f, 0.75) > sample_potential(f, 0.25));
}

TEST_CASE("periodicity on random phases") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  auto saw = PotentialSpec::sawtooth();
  auto sq = PotentialSpec::sawtooth(2.0, 2.0);
  auto tab = PotentialSpec::table({0.0, 0.3, 0.7}, {0.0, 0.5, 1.2});
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    double x = u(rng);
    for (const auto* f : {&saw, &sq, &tab}) {
      double a = sample_potential(*f, x), b = sample_potential(*f, x + 1.0);
      if (std::fabs(a - b) > 1e-9) ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("holder monotone checks") {
  CHECK(check_holder_monotone(PotentialSpec::sawtooth(), 1.0, 100).ok);
  CHECK(check_holder_monotone(PotentialSpec::sawtooth(), 1.0, 1000).ok);
  auto sq1 = check_holder_monotone(PotentialSpec::sawtooth(2.0, 1.0), 1.0, 100);
  CHECK_FALSE(sq1.ok);
  CHECK(sq1.worst_x < 0.5);
  CHECK(check_holder_monotone(PotentialSpec::sawtooth(2.0, 2.0), 2.0, 100).ok);
  CHECK(check_holder_monotone(PotentialSpec::maryland(), 1.0, 1000).ok);
  CHECK_THROWS(check_holder_monotone(PotentialSpec::sawtooth(), 1.0, 1));
}

TEST_CASE("table potentials") {
  CHECK_THROWS_AS(PotentialSpec::table({0.0, 0.5}, {0.6, 0.4}), MonotonicityViolation);
  CHECK_THROWS_AS(PotentialSpec::table({0.0, 0.0}, {0.1, 0.4}), MonotonicityViolation);
  auto two = PotentialSpec::table({0.0, 0.5}, {0.4, 0.6}, 1.0, Interpolation::Step);
  CHECK(sample_potential(two, 0.0) == 0.4);
  CHECK(sample_potential(two, 0.49) == 0.4);
  CHECK(sample_potential(two, 0.5) == 0.6);
  CHECK(sample_potential(two, 0.99) == 0.6);
  CHECK(two.left_limit_at_one() == 0.6);
  auto lin = PotentialSpec::table({0.0, 0.5}, {0.0, 1.0});
  CHECK(sample_potential(lin, 0.25) == doctest::Approx(0.5));
  CHECK(sample_potential(lin, 0.75) == doctest::Approx(1.5));

  const char* path = "test_model_table.csv";
  {
    std::ofstream out(path);
    out << "x,f\n0.0,0.0\n0.5,0.5\n";
  }
  auto t = PotentialSpec::table_from_csv(path);
  CHECK(sample_potential(t, 0.25) == doctest::Approx(0.25));
  std::remove(path);
}

TEST_CASE("diophantine scans") {
  Frequency g{{kGolden}, 2.0, 1.0};
  CHECK(check_diophantine(g, 1000).ok);
  Frequency half{{0.5}, 1.0, 1.0};
  try {
    check_diophantine(half, 2);
    FAIL("expected ResonantFrequency");
  } catch (const ResonantFrequency& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  Frequency two{{std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0}, 3.0, 1.0};
  CHECK(check_diophantine(two, 200).ok);
}

TEST_CASE("l1 balls and boxes") {
  CHECK(l1_ball({0}, 2).size() == 5);
  CHECK(l1_ball({0, 0}, 1).size() == 5);
  CHECK(l1_sphere(2, 2).size() == 8);
  auto b = LatticeBox::centered(2, 1);
  CHECK(b.size() == 9);
  CHECK(b.find({-1, -1}) == 0);
  CHECK(b.find({5, 5}) == -1);
  CHECK_THROWS(LatticeBox(1, {{0}, {0}}));
}

TEST_CASE("assemble operator") {
  Frequency g{{kGolden}, 1.0, 1.0};
  auto f = PotentialSpec::sawtooth();
  SUBCASE("eps zero is diagonal") {
    auto op = assemble_operator(f, 0.0, g, 0.3, LatticeBox::centered(1, 3));
    CHECK(op.offdiag.empty());
    for (int i = 0; i < op.box.size(); ++i)
      CHECK(op.diag[static_cast<size_t>(i)] == sample_potential(f, 0.3 + dot(g, op.box.site(i))));
  }
  SUBCASE("two sites") {
    auto op = assemble_operator(f, 0.01, g, 0.1, LatticeBox::cube(1, 0, 1));
    auto H = op.dense();
    CHECK(H(0, 0) == doctest::Approx(0.1));
    CHECK(H(1, 1) == doctest::Approx(0.1 + kGolden));
    CHECK(H(0, 1) == 0.01);
    CHECK(H(1, 0) == 0.01);
  }
  SUBCASE("d=2 interior neighbours") {
    Frequency two{{std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0}, 3.0, 1.0};
    auto op = assemble_operator(f, 0.2, two, 0.1, LatticeBox::centered(2, 1));
    int centre = op.box.find({0, 0});
    int count = 0;
    for (int j = 0; j < op.box.size(); ++j)
      if (j != centre && op.entry(centre, j) != 0.0) {
        CHECK(op.entry(centre, j) == 0.2);
        ++count;
      }
    CHECK(count == 4);
    auto H = op.dense();
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("maryland infinite site") {
    auto op = assemble_operator(PotentialSpec::maryland(), 0.1, g, 0.0, LatticeBox::centered(1, 3));
    CHECK(op.infinite_site() == op.box.find({0}));
  }
}

TEST_CASE("covariance under shifts") {
  Frequency g{{kGolden}, 1.0, 1.0};
  auto f = PotentialSpec::sawtooth();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(-6, 6);
  auto box = LatticeBox::centered(1, 5);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    double x = u(rng);
    Site n{k(rng)};
    auto a = assemble_operator(f, 0.05, g, x, box);
    auto s = shift_phase(a, n);
    auto b = assemble_operator(f, 0.05, g, x + dot(g, n), s.box);
    worst = std::max(worst, max_entry_difference(s, b));
  }
  // s carries the original diag values, b resamples f at the shifted phases
  CHECK(worst <= 1e-14);

  auto a = assemble_operator(f, 0.05, g, 0.2, box);
  CHECK(max_entry_difference(shift_phase(a, {0}), a) == 0.0);
  CHECK(max_entry_difference(shift_phase(shift_phase(a, {3}), {-3}), a) == 0.0);
  auto s1 = shift_phase(a, {1});
  CHECK(s1.diag[static_cast<size_t>(s1.box.find({0}))] == a.diag[static_cast<size_t>(a.box.find({1}))]);
}
