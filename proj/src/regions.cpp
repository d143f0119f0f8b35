#include "quasidiag/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "quasidiag/errors.hpp"

namespace quasidiag {

namespace {
std::string site_str(const Site& n) {
  std::string s = "(";
  for (size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
  return s + ")";
}
}  // namespace

double beta_s(double beta, int s) {
  if (s <= 0) return 1.0;
  return std::exp(static_cast<double>(s) / std::log(s + 1.0) * std::log(beta));
}

bool TorusInterval::contains(double y) const {
  if (radius >= 0.5) return true;
  return circle_norm(y - center) < radius;
}

std::vector<TorusInterval> make_intervals(double x0, double beta, int s_max) {
  std::vector<TorusInterval> out;
  out.reserve(static_cast<size_t>(s_max) + 1);
  for (int s = 0; s <= s_max; ++s) out.push_back({frac(x0), beta_s(beta, s)});
  return out;
}

int level_from_distance(double dist, double beta) {
  if (dist == 0.0) throw ResonantFrequency("level of an exactly resonant site");
  int l = 0;
  while (2.0 * dist <= beta_s(beta, l + 1)) {
    ++l;
    if (l > 1000000) throw std::runtime_error("level scan did not terminate");
  }
  return l;
}

int level(const Site& n, const Frequency& freq, double beta) {
  if (l1_norm(n) == 0) throw std::invalid_argument("level undefined at n = 0");
  double d = norm_n_omega(freq, n);
  if (d == 0.0) throw ResonantFrequency("exact resonance at n=" + site_str(n));
  return level_from_distance(d, beta);
}

SiteSet set_union(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool intersects(const SiteSet& a, const SiteSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else return true;
  }
  return false;
}

bool is_subset(const SiteSet& a, const SiteSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

int diameter(const SiteSet& s) {
  int d = 0;
  for (size_t i = 0; i < s.size(); ++i)
    for (size_t j = i + 1; j < s.size(); ++j) d = std::max(d, l1_dist(s[i], s[j]));
  return d;
}

SiteSet basic_region(const Site& n, int s, double x, const Frequency& freq,
                     const std::vector<TorusInterval>& intervals) {
  if (s < 1 || s >= static_cast<int>(intervals.size())) throw std::invalid_argument("basic_region: step out of range");
  if (!intervals[static_cast<size_t>(s)].contains(phase_of(freq, x, n))) return {};
  return l1_ball(n, s);
}

bool RegionFamily::clipped() const {
  return std::any_of(regions.begin(), regions.end(), [](const Region& r) { return r.clipped; });
}

RegionBuilder::RegionBuilder(double x, const Frequency& freq, std::vector<TorusInterval> intervals, LatticeBox ambient)
    : x_(x), freq_(freq), intervals_(std::move(intervals)), ambient_(std::move(ambient)) {}

std::vector<Site> RegionBuilder::active(int s) const {
  std::vector<Site> out;
  const auto& I = intervals_.at(static_cast<size_t>(s));
  for (const auto& n : ambient_.sites())
    if (I.contains(phase_of(freq_, x_, n))) out.push_back(n);
  return out;
}

RegionFamily RegionBuilder::basic(int s) const {
  RegionFamily fam;
  fam.step = s;
  for (const auto& n : active(s)) {
    Region r;
    r.center = n;
    for (const auto& m : l1_ball(n, s)) {
      if (ambient_.contains(m)) r.sites.push_back(m);
      else r.clipped = true;
    }
    fam.regions.push_back(std::move(r));
  }
  return fam;
}

const RegionFamily& RegionBuilder::extended(int s) {
  if (s < 1 || s >= static_cast<int>(intervals_.size())) throw std::invalid_argument("extended: step out of range");
  for (int l = 1; l <= s; ++l) {
    if (memo_.count(l)) continue;
    RegionFamily fam = basic(l);
    fam.extended = true;
    for (auto& reg : fam.regions) {
      SiteSet acc = reg.sites;
      for (int k = 1; k < l; ++k) {
        for (const auto& prev : memo_.at(k).regions) {
          if (intersects(prev.sites, reg.sites)) {
            acc = set_union(acc, prev.sites);
            reg.clipped = reg.clipped || prev.clipped;
          }
        }
      }
      reg.sites = std::move(acc);
    }
    std::map<Site, size_t> owner;
    for (size_t i = 0; i < fam.regions.size(); ++i) {
      for (const auto& m : fam.regions[i].sites) {
        auto [it, fresh] = owner.emplace(m, i);
        if (!fresh)
          throw RegionOverlap("extended regions at step " + std::to_string(l) + " centered at " +
                              site_str(fam.regions[it->second].center) + " and " +
                              site_str(fam.regions[i].center) + " share site " + site_str(m));
      }
    }
    memo_.emplace(l, std::move(fam));
  }
  return memo_.at(s);
}

RegionFamily extended_regions(int s, double x, const std::vector<TorusInterval>& intervals, const Frequency& freq,
                              const LatticeBox& ambient) {
  RegionBuilder b(x, freq, intervals, ambient);
  return b.extended(s);
}

SiteSet union_region(const Site& n, int s, const std::vector<TorusInterval>& intervals, const Frequency& freq,
                     const LatticeBox& ambient, int grid, const TorusInterval* over) {
  TorusInterval J = over ? *over : intervals.at(static_cast<size_t>(s));
  std::vector<double> xs;
  if (J.radius >= 0.5) {
    for (int i = 0; i < grid; ++i) xs.push_back((i + 0.5) / grid);
  } else {
    xs.push_back(J.center);
    for (int i = 0; i < grid; ++i) xs.push_back(J.center + J.radius * (2.0 * (i + 0.5) / grid - 1.0));
  }
  SiteSet acc;
  for (double x : xs) {
    RegionBuilder b(x, freq, intervals, ambient);
    for (const auto& r : b.extended(s).regions)
      if (r.center == n) acc = set_union(acc, r.sites);
  }
  return acc;
}

std::vector<SiteSet> compose_supports(const std::vector<SiteSet>& a, const std::vector<SiteSet>& b) {
  std::vector<const SiteSet*> all;
  for (const auto& s : a) all.push_back(&s);
  for (const auto& s : b) all.push_back(&s);
  std::vector<size_t> parent(all.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j)
      if (intersects(*all[i], *all[j])) parent[root(i)] = root(j);
  std::map<size_t, SiteSet> comps;
  for (size_t i = 0; i < all.size(); ++i) {
    auto& c = comps[root(i)];
    c = set_union(c, *all[i]);
  }
  std::vector<SiteSet> out;
  for (auto& kv : comps)
    if (!kv.second.empty()) out.push_back(std::move(kv.second));
  std::sort(out.begin(), out.end());
  return out;
}

bool separated(const std::vector<SiteSet>& a, const std::vector<SiteSet>& b) {
  // an A-set meeting a B-set must lie inside it
  for (const auto& sa : a)
    for (const auto& sb : b)
      if (intersects(sa, sb) && !is_subset(sa, sb)) return false;
  return true;
}

SeparationReport separation_scan(const Frequency& freq, double beta, int n_max, int s_max) {
  SeparationReport rep;
  const double logb = std::log(1.0 / beta);
  std::vector<double> bs(static_cast<size_t>(s_max) + 1);
  for (int s = 0; s <= s_max; ++s) bs[static_cast<size_t>(s)] = beta_s(beta, s);
  Site zero(static_cast<size_t>(freq.dim()), 0);
  for (const auto& k : l1_ball(zero, 2 * n_max)) {
    int len = l1_norm(k);
    if (len == 0) continue;
    double v = norm_n_omega(freq, k);
    for (int s = 1; s <= s_max; ++s) {
      for (int l = 1; l <= s; ++l) {
        ++rep.pairs_checked;
        if (!(v < bs[static_cast<size_t>(s)] + bs[static_cast<size_t>(l)])) continue;
        int dist = std::max(0, len - s - l);
        if (dist > 10 * s) continue;
        ++rep.near_collisions;
        if (s < logb * std::pow(static_cast<double>(l), 1.0 + freq.mu / 2.0))
          rep.violations.push_back({k, s, l, dist});
      }
    }
  }
  return rep;
}

std::vector<double> configuration_offsets(const Frequency& freq, double beta, int n_max, int s_max) {
  std::vector<double> cuts;
  Site zero(static_cast<size_t>(freq.dim()), 0);
  for (const auto& n : l1_ball(zero, n_max)) {
    double p = dot(freq, n);
    for (int s = 1; s <= s_max; ++s) {
      double r = beta_s(beta, s);
      cuts.push_back(frac(-p + r));
      cuts.push_back(frac(-p - r));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<double> mids;
  if (cuts.empty()) return {0.5};
  for (size_t i = 0; i + 1 < cuts.size(); ++i) mids.push_back(0.5 * (cuts[i] + cuts[i + 1]));
  mids.push_back(frac(0.5 * (cuts.back() + cuts.front() + 1.0)));
  return mids;
}

nlohmann::json to_json(const SiteSet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& n : s) arr.push_back(n);
  return arr;
}

nlohmann::json to_json(const RegionFamily& fam) {
  nlohmann::json j;
  j["step"] = fam.step;
  j["kind"] = fam.extended ? "extended" : "basic";
  j["regions"] = nlohmann::json::array();
  for (const auto& r : fam.regions)
    j["regions"].push_back({{"center", r.center}, {"sites", to_json(r.sites)}, {"clipped", r.clipped}});
  return j;
}

}  // namespace quasidiag
