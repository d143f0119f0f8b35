#pragma once

#include <map>
#include <vector>

#include "json.hpp"

#include "quasidiag/model.hpp"

namespace quasidiag {

// beta^{s/ln(s+1)}, and 1 at s = 0
double beta_s(double beta, int s);

struct TorusInterval {
  double center = 0.0;
  double radius = 1.0;
  bool contains(double y) const;  // open, mod 1
};

// I_0 (whole circle), I_1, ..., I_{s_max} around x0
std::vector<TorusInterval> make_intervals(double x0, double beta, int s_max);

int level(const Site& n, const Frequency& freq, double beta);
int level_from_distance(double dist, double beta);

using SiteSet = std::vector<Site>;  // sorted, unique

SiteSet set_union(const SiteSet& a, const SiteSet& b);
bool intersects(const SiteSet& a, const SiteSet& b);
bool is_subset(const SiteSet& a, const SiteSet& b);
int diameter(const SiteSet& s);

SiteSet basic_region(const Site& n, int s, double x, const Frequency& freq,
                     const std::vector<TorusInterval>& intervals);

struct Region {
  Site center;
  SiteSet sites;
  bool clipped = false;
};

struct RegionFamily {
  int step = 0;
  bool extended = false;
  std::vector<Region> regions;
  bool clipped() const;
};

// Extended regions for all steps 1..s at one phase; memoized per (step, center).
class RegionBuilder {
 public:
  RegionBuilder(double x, const Frequency& freq, std::vector<TorusInterval> intervals, LatticeBox ambient);

  // throws RegionOverlap if the family at some step <= s is not disjoint
  const RegionFamily& extended(int s);
  RegionFamily basic(int s) const;
  std::vector<Site> active(int s) const;

 private:
  double x_;
  Frequency freq_;
  std::vector<TorusInterval> intervals_;
  LatticeBox ambient_;
  std::map<int, RegionFamily> memo_;
};

RegionFamily extended_regions(int s, double x, const std::vector<TorusInterval>& intervals,
                              const Frequency& freq, const LatticeBox& ambient);

// Union over sampled phases x of the extended region with center n at step s.
// Phases are drawn from `over` (defaults to I_s) on a uniform grid plus the center.
SiteSet union_region(const Site& n, int s, const std::vector<TorusInterval>& intervals,
                     const Frequency& freq, const LatticeBox& ambient, int grid = 64,
                     const TorusInterval* over = nullptr);

std::vector<SiteSet> compose_supports(const std::vector<SiteSet>& a, const std::vector<SiteSet>& b);
bool separated(const std::vector<SiteSet>& a, const std::vector<SiteSet>& b);

struct SeparationViolation {
  Site offset;  // n - m
  int s = 0;
  int ell = 0;
  int dist = 0;
};

struct SeparationReport {
  long pairs_checked = 0;
  long near_collisions = 0;
  std::vector<SeparationViolation> violations;
};

// Exhaustive over centers |n|,|m| <= n_max and steps ell <= s <= s_max. Two basic
// regions coexist at some phase iff ||(n-m).omega|| < beta^(s) + beta^(ell).
SeparationReport separation_scan(const Frequency& freq, double beta, int n_max, int s_max);

// One offset x - x0 per cell between consecutive phases where the active-site pattern
// (|n| <= n_max, steps <= s_max) can change; together they realize every pattern.
std::vector<double> configuration_offsets(const Frequency& freq, double beta, int n_max, int s_max);

nlohmann::json to_json(const RegionFamily& fam);
nlohmann::json to_json(const SiteSet& s);

}  // namespace quasidiag
