#include "quasidiag/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "quasidiag/errors.hpp"
#include "quasidiag/oracle.hpp"
#include "quasidiag/output.hpp"
#include "quasidiag/pool.hpp"
#include "quasidiag/regions.hpp"
#include "quasidiag/scheme.hpp"

namespace quasidiag {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";
constexpr int kCsvSchema = 1;

class Session {
 public:
  Session(const RunConfig& c, std::string command)
      : c_(c), command_(std::move(command)), started_(utc_timestamp()) {}

  std::string path(const std::string& name) const { return (std::filesystem::path(c_.out_dir) / name).string(); }

  void csv(const std::string& name, const CsvTable& t) {
    write_atomic(path(name), t.text());
    files_.insert(name);
  }
  void json_file(const std::string& name, const json& j) {
    write_json(path(name), j);
    files_.insert(name);
  }
  void monitor(const std::string& name, bool pass, json detail = json::object()) {
    monitors_[name] = pass;
    details_[name] = std::move(detail);
    if (!pass) spdlog::warn("monitor {} failed", name);
    else spdlog::info("monitor {} passed", name);
  }
  bool has_failures() const {
    return std::any_of(monitors_.begin(), monitors_.end(), [](const auto& kv) { return !kv.second; });
  }
  void error(int code, const std::string& kind, const std::string& what) {
    error_code_ = code;
    error_ = {{"kind", kind}, {"message", what}};
    spdlog::error("{}: {}", kind, what);
  }
  const json& details() const { return details_; }

  CommandOutcome finish() {
    CommandOutcome out;
    out.exit_code = error_code_ ? *error_code_ : (has_failures() ? kExitMonitor : kExitPass);
    json m;
    m["artifact"] = "quasidiag";
    m["version"] = kVersion;
    m["command"] = command_;
    m["config_hash"] = hex64(fnv1a64(c_.raw_text));
    m["csv_schema_version"] = kCsvSchema;
    m["started"] = started_;
    m["finished"] = utc_timestamp();
    m["files"] = std::vector<std::string>(files_.begin(), files_.end());
    json mon = json::object();
    for (const auto& [k, v] : monitors_) mon[k] = v ? "pass" : "fail";
    m["monitors"] = mon;
    m["passed"] = out.exit_code == kExitPass;
    m["exit_code"] = out.exit_code;
    m["notes"] = c_.notes();
    if (!error_.is_null()) m["error"] = error_;
    write_json(path("manifest.json"), m);
    out.manifest = std::move(m);
    return out;
  }

 private:
  const RunConfig& c_;
  std::string command_;
  std::string started_;
  std::set<std::string> files_;
  std::map<std::string, bool> monitors_;
  json details_ = json::object();
  std::optional<int> error_code_;
  json error_;
};

template <class Body>
CommandOutcome guarded(const RunConfig& c, const std::string& name, Body body) {
  Session s(c, name);
  try {
    body(s);
  } catch (const DominanceViolation& e) {
    s.error(kExitRegime, e.kind(), e.what());
  } catch (const RegionOverlap& e) {
    s.error(kExitRegime, e.kind(), e.what());
  } catch (const ConfigError& e) {
    s.error(kExitConfig, e.kind(), e.what());
  } catch (const Error& e) {
    s.error(kExitMonitor, e.kind(), e.what());
  } catch (const std::exception& e) {
    s.error(1, "InternalError", e.what());
  }
  return s.finish();
}

std::vector<std::string> site_header(int d, const std::string& last) {
  std::vector<std::string> h;
  for (int k = 1; k <= d; ++k) h.push_back("n_" + std::to_string(k));
  h.push_back(last);
  return h;
}

std::vector<std::string> site_cells(const Site& n, double v) {
  std::vector<std::string> cells;
  for (int k : n) cells.push_back(std::to_string(k));
  cells.push_back(fmt17(v));
  return cells;
}

double oracle_alignment(const SchemeResult& r, const Eigen::MatrixXd& H0, double* dE) {
  EigenResult er = dense_eig(H0);
  const int o = r.state.origin;
  Eigen::Index best = 0;
  er.vectors.row(o).cwiseAbs().maxCoeff(&best);
  double E = er.values[static_cast<size_t>(best)];
  *dE = (std::isinf(E) && E == r.E) ? 0.0 : std::fabs(E - r.E);
  return std::max(0.0, 1.0 - std::fabs(r.psi.dot(er.vectors.col(best))));
}

void diagonalize_body(const RunConfig& c, Session& s) {
  const SchemeParams& p = c.scheme;
  const LatticeBox box = c.ambient();
  const int d = box.dim();
  SchemeResult r = run_scheme(p, c.x0, box);

  CsvTable psi(site_header(d, "amplitude"));
  for (int i = 0; i < box.size(); ++i) psi.row(site_cells(box.site(i), r.psi(i)));
  s.csv("psi.csv", psi);

  auto xs = uniform_phases(c.phase_grid);
  std::optional<double> eta;
  if (p.alpha() == 1.0) eta = c.lipschitz_eta;
  MonotoneGridReport mg = eigenvalue_function(p, xs, box, c.monotone_tol, eta, c.workers);
  CsvTable et({"x", "E"});
  for (size_t i = 0; i < xs.size(); ++i) et.row(std::vector<double>{xs[i], mg.E[i]});
  s.csv("E_table.csv", et);

  std::vector<Site> sites;
  for (const auto& n : l1_ball(Site(static_cast<size_t>(d), 0), c.family_radius))
    if (box.contains(n)) sites.push_back(n);
  auto fam = eigen_family(p, c.x0, box, sites);
  double gram = 0.0;
  for (size_t i = 0; i < fam.size(); ++i)
    for (size_t j = 0; j < fam.size(); ++j)
      gram = std::max(gram, std::fabs(fam[i].psi.dot(fam[j].psi) - (i == j ? 1.0 : 0.0)));
  CsvTable ft(site_header(d, "E"));
  for (const auto& m : fam) ft.row(site_cells(m.n, m.E));
  s.csv("family.csv", ft);

  const double eps = p.eps;
  double decay_worst = 0.0;
  bool decay_ok = true;
  for (int i = 0; i < box.size(); ++i) {
    int len = l1_norm(box.site(i));
    if (len == 0 || len > c.decay_radius) continue;
    double bound = std::pow(eps, (1.0 - p.delta) * len);
    double v = std::fabs(r.psi(i));
    if (v > bound) decay_ok = false;
    if (bound > 0) decay_worst = std::max(decay_worst, v / bound);
  }
  bool conv3 = true, support = true, ind3 = true;
  double orth = 0.0;
  for (const auto& rec : r.state.records) {
    conv3 = conv3 && rec.conv3_ok;
    support = support && rec.support_ok;
    ind3 = ind3 && rec.ind3_ok;
    orth = std::max(orth, rec.orthogonality);
  }
  OrderReport orders = check_orders(r.state, p);
  double dE = 0.0;
  double align = oracle_alignment(r, r.state.H0, &dE);

  s.monitor("residual", r.residual <= p.residual_target, {{"residual", r.residual}});
  s.monitor("psi0", r.psi0_defect < std::pow(eps, 1.0 - p.delta) || (eps == 0.0 && r.psi0_defect == 0.0),
            {{"defect", r.psi0_defect}});
  s.monitor("decay", decay_ok, {{"worst_ratio", decay_worst}, {"radius", c.decay_radius}});
  s.monitor("orthogonality", orth <= 1e-12, {{"max", orth}});
  s.monitor("support", support);
  s.monitor("conv3", conv3);
  s.monitor("ind1_ind2", orders.ok(),
            {{"ind1_worst_log_margin", orders.ind1_worst_log_margin},
             {"ind2_worst_log_margin", orders.ind2_worst_log_margin}});
  s.monitor("ind3", ind3);
  s.monitor("family_orthogonality", gram <= c.family_orthogonality_tol, {{"max", gram}});
  s.monitor("oracle_agreement", dE <= c.oracle_energy_tol && align <= c.oracle_alignment_tol,
            {{"dE", dE}, {"misalignment", align}});
  s.monitor("E_monotone", mg.violations == 0, {{"violations", mg.violations}});
  if (eta)
    s.monitor("E_lipschitz", mg.lipschitz_violations == 0,
              {{"violations", mg.lipschitz_violations}, {"worst_ratio", mg.worst_lipschitz_ratio}});

  json diag = diagnostics_json(r);
  diag["orders"] = {{"checked", orders.checked},
                    {"ind1_violations", orders.ind1_violations},
                    {"ind2_violations", orders.ind2_violations},
                    {"beyond_range_nonzero", orders.beyond_range_nonzero},
                    {"beyond_range_max", orders.beyond_range_max}};
  diag["family_gram_defect"] = gram;
  diag["monitors"] = s.details();
  s.json_file("diagnostics.json", diag);
}

void verify_body(const RunConfig& c, Session& s) {
  const SchemeParams& p = c.scheme;
  const LatticeBox box = c.ambient();
  const int d = box.dim();
  json rep;

  try {
    DiophantineReport dr = check_diophantine(p.freq, c.diophantine_N);
    s.monitor("diophantine", dr.ok, {{"worst_margin", dr.worst_margin}, {"worst_n", dr.worst_n}});
  } catch (const ResonantFrequency& e) {
    s.monitor("diophantine", false, {{"error", e.what()}});
  }
  if (s.has_failures()) {
    s.json_file("verify.json", {{"stopped_after", "diophantine"}, {"monitors", s.details()}});
    return;
  }

  HolderReport hr = check_holder_monotone(p.potential, p.alpha(), c.holder_grid);
  s.monitor("holder", hr.ok, {{"worst_margin", hr.worst_margin}, {"x", hr.worst_x}, {"y", hr.worst_y}});

  SeparationReport sep = separation_scan(p.freq, p.beta, c.region_n_max, c.region_s_max);
  s.monitor("separation", sep.violations.empty(),
            {{"near_collisions", sep.near_collisions}, {"violations", sep.violations.size()}});

  auto I = make_intervals(c.x0, p.beta, p.s_max);
  long region_phases = 0, diam_violations = 0;
  if (p.s_max >= 1) {
    for (double off : configuration_offsets(p.freq, p.beta, c.box_radius, p.s_max)) {
      RegionBuilder rb(c.x0 + off, p.freq, I, box);
      for (int st = 1; st <= p.s_max; ++st)
        for (const auto& reg : rb.extended(st).regions)
          if (!reg.clipped && diameter(reg.sites) > 3 * st) ++diam_violations;
      ++region_phases;
    }
  }
  s.monitor("regions", diam_violations == 0, {{"phases", region_phases}, {"diameter_violations", diam_violations}});

  const double aM = c.absorption_M > 0 ? c.absorption_M : p.M;
  long queries = 0, failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int k2 = 1; k2 <= c.absorption_k2_max; ++k2) {
    for (const auto& n : l1_sphere(d, k2)) {
      int lv = level(n, p.freq, p.beta);
      for (int k1 = std::max(1, lv); k1 <= k2; ++k1) {
        AbsorptionResult ar = absorption_check(k1, k2, n, p.freq, aM, p.beta, p.gamma(), p.alpha());
        ++queries;
        worst = std::min(worst, ar.margin());
        if (!(ar.holds && ar.margin() > 0)) ++failures;
      }
    }
  }
  s.monitor("absorption", failures == 0, {{"queries", queries}, {"worst_log_margin", worst}, {"M", aM}});

  GridMonitor gm = monitor_grid(p, c.x0, box, p.s_max);
  s.monitor("ind1_ind2", gm.orders.ok(),
            {{"phases", gm.phases},
             {"checked", gm.orders.checked},
             {"ind1_violations", gm.orders.ind1_violations},
             {"ind2_violations", gm.orders.ind2_violations},
             {"ind1_worst_log_margin", gm.orders.ind1_worst_log_margin},
             {"ind2_worst_log_margin", gm.orders.ind2_worst_log_margin}});
  s.monitor("ind3", gm.drift_violations == 0, {{"worst_log_margin", gm.drift_worst_log_margin}});

  long ind4_viol = 0, ratio_viol = 0, ind4_pairs = 0, ind4_k0 = 0, ind4_kpos = 0;
  double ind4_worst = std::numeric_limits<double>::infinity(), ratio_worst = ind4_worst;
  double ind4_worst_k0 = ind4_worst, ind4_worst_kpos = ind4_worst;
  for (int st = 1; st <= p.s_max; ++st) {
    double r = beta_s(p.beta, st);
    std::vector<PhasePair> pairs;
    int inner = std::max(2, c.monotone_pairs / 4);
    for (int a = 0; a < inner; ++a) {
      double x = frac(c.x0 + r * 0.9 * (2.0 * a / (inner - 1) - 1.0));
      for (double y : uniform_phases(c.monotone_pairs)) pairs.push_back(x < y ? PhasePair{x, y} : PhasePair{y, x});
    }
    MonotoneReport mr = check_approx_monotone(p, c.x0, st, box, pairs);
    ind4_viol += mr.violations;
    ratio_viol += mr.ratio_violations;
    ind4_pairs += mr.pairs;
    ind4_k0 += mr.k0_violations;
    ind4_kpos += mr.kpos_violations;
    ind4_worst_k0 = std::min(ind4_worst_k0, mr.worst_margin_k0);
    ind4_worst_kpos = std::min(ind4_worst_kpos, mr.worst_margin_kpos);
    if (mr.pairs) ind4_worst = std::min(ind4_worst, mr.worst_margin);
    if (mr.ratio_checks) ratio_worst = std::min(ratio_worst, mr.worst_ratio);
  }
  s.monitor("ind4", ind4_viol == 0,
            {{"pairs", ind4_pairs},
             {"violations", ind4_viol},
             {"worst_margin", ind4_worst},
             {"k0_violations", ind4_k0},
             {"k0_worst_margin", ind4_worst_k0},
             {"k_positive_violations", ind4_kpos},
             {"k_positive_worst_margin", ind4_worst_kpos}});
  s.monitor("lower_lipschitz_ratio", ratio_viol == 0, {{"worst_ratio", ratio_worst}});

  SchemeResult sr = run_scheme(p, c.x0, box);
  double dE = 0.0;
  double align = oracle_alignment(sr, sr.state.H0, &dE);
  s.monitor("residual", sr.residual <= p.residual_target, {{"residual", sr.residual}});
  s.monitor("oracle_agreement", dE <= c.oracle_energy_tol && align <= c.oracle_alignment_tol,
            {{"dE", dE}, {"misalignment", align}});

  long bd_checks = 0, bd_fail = 0;
  double bd_worst = 0.0;
  for (int st = 1; st <= std::min(4, p.s_max - 1); ++st) {
    SiteSet dom = theorem_domain(p, c.x0, st, box);
    double r = beta_s(p.beta, st + 1);
    for (int k = 0; k < c.branch_phases; ++k) {
      double x = frac(c.x0 + r * (2.0 * (k + 0.5) / c.branch_phases - 1.0));
      BranchDistanceReport br = branch_distance_check(p, c.x0, x, st, box, dom, c.branch_floor);
      ++bd_checks;
      bd_worst = std::max(bd_worst, br.distance);
      if (!br.ok) ++bd_fail;
    }
  }
  s.monitor("branch_distance", bd_fail == 0, {{"checks", bd_checks}, {"worst_distance", bd_worst}});

  BranchTable bt = label_branches(p.potential, p.eps, p.freq, c.x0, LatticeBox::centered(d, std::min(c.box_radius, 5)));
  s.monitor("branch_pairing", pairing_consistent(bt));

  rep["monitors"] = s.details();
  rep["scheme"] = diagnostics_json(sr);
  s.json_file("verify.json", rep);
}

void spectrum_body(const RunConfig& c, Session& s) {
  const SchemeParams& p = c.scheme;
  SpectrumReport sr =
      gap_detect(p.potential, p.eps, p.freq, c.box_sizes, c.min_gap_width, c.gap_stability, c.gap_phases, c.workers);
  for (size_t b = 0; b < c.box_sizes.size(); ++b) {
    CsvTable t({"E"});
    for (double e : sr.spectra[b]) t.row(std::vector<double>{e});
    s.csv("spectrum_L" + std::to_string(c.box_sizes[b]) + ".csv", t);
  }

  std::vector<double> egrid;
  {
    const auto& big = sr.spectra.back();
    double lo = 0.0, hi = 1.0;
    for (double e : big)
      if (std::isfinite(e)) { lo = e; break; }
    for (auto it = big.rbegin(); it != big.rend(); ++it)
      if (std::isfinite(*it)) { hi = *it; break; }
    const int n = 1001;
    for (int k = 0; k < n; ++k) egrid.push_back(lo + (hi - lo) * k / (n - 1));
  }
  IdsTable it = ids(p.potential, p.eps, p.freq, c.box_sizes, egrid, c.ids_phases, c.workers);
  std::vector<std::string> hdr{"E"};
  for (int L : c.box_sizes) hdr.push_back("N_L" + std::to_string(L));
  CsvTable idt(hdr);
  bool ids_mono = true;
  for (size_t k = 0; k < egrid.size(); ++k) {
    std::vector<double> row{egrid[k]};
    for (size_t b = 0; b < it.N.size(); ++b) {
      row.push_back(it.N[b][k]);
      if (k && it.N[b][k] < it.N[b][k - 1]) ids_mono = false;
    }
    idt.row(row);
  }
  s.csv("ids.csv", idt);

  LatticeBox rbox = box_with_sites(p.freq.dim(), c.rank_one_sites);
  auto tg = arc_t_grid(p.potential, c.t_count, c.t_span);
  RankOneTrace tr = rank_one_sweep(p.potential, p.eps, p.freq, rbox, tg, sr.gaps, 1e-12, c.workers);
  CsvTable rt({"t", "E"});
  for (size_t k = 0; k < tg.size(); ++k)
    for (double e : tr.spectra[k]) rt.row(std::vector<double>{tg[k], e});
  s.csv("rank_one.csv", rt);

  bool witnessed = std::any_of(tr.witnessed.begin(), tr.witnessed.end(), [](int w) { return w >= 0; });
  s.monitor("gaps", static_cast<int>(sr.gaps.size()) >= c.min_gaps,
            {{"stable_gaps", sr.gaps.size()}, {"required", c.min_gaps}});
  s.monitor("ids_monotone", ids_mono);
  s.monitor("rank_one_monotone", tr.monotonicity_violations == 0, {{"violations", tr.monotonicity_violations}});
  s.monitor("rank_one_witness", witnessed);

  json g = to_json(sr);
  g["rank_one"] = to_json(tr);
  g["monitors"] = s.details();
  s.json_file("gaps.json", g);
}

}  // namespace

CommandOutcome cmd_diagonalize(const RunConfig& c) {
  return guarded(c, "diagonalize", [&](Session& s) { diagonalize_body(c, s); });
}

CommandOutcome cmd_verify(const RunConfig& c) {
  return guarded(c, "verify", [&](Session& s) { verify_body(c, s); });
}

CommandOutcome cmd_spectrum(const RunConfig& c) {
  return guarded(c, "spectrum", [&](Session& s) { spectrum_body(c, s); });
}

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("quasidiag");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lv = std::getenv("QUASIDIAG_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

int run_command(const CliOptions& opt) {
  init_logging();
  RunConfig c;
  try {
    c = load_config(opt.config_path);
  } catch (const Error& e) {
    spdlog::error("{}: {}", e.kind(), e.what());
    return kExitConfig;
  }
  if (opt.out_dir) c.out_dir = *opt.out_dir;
  if (opt.workers) {
    if (*opt.workers < 1) {
      spdlog::error("--workers must be positive");
      return kExitConfig;
    }
    c.workers = *opt.workers;
  }
  if (opt.seed) c.seed = *opt.seed;
  for (const auto& n : c.notes()) spdlog::warn("{}", n);

  CommandOutcome out;
  if (opt.command == "diagonalize") out = cmd_diagonalize(c);
  else if (opt.command == "verify") out = cmd_verify(c);
  else if (opt.command == "spectrum") out = cmd_spectrum(c);
  else {
    spdlog::error("unknown command {}", opt.command);
    return kExitConfig;
  }
  return out.exit_code;
}

}  // namespace quasidiag
