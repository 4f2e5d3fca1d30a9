#include "robustmm/montecarlo.hpp"

#include "robustmm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace robustmm {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

FitConfig replication_config(const SimScenario& s, int n, int rep) {
  FitConfig cfg = s.fit;
  cfg.seed = s.fit_seed(n, rep);
  cfg.threads = 1;
  return cfg;
}

// Fits one dataset; anything short of a converged S and MM stage is a failure.
FitResult fit_checked(const Dataset& d, const RegressionModel& m, const FitConfig& cfg) {
  FitResult f = fit(d, m, cfg);
  if (f.exact_fit) throw FitError("exact fit (sigma = 0)");
  if (!f.converged_s) throw ConvergenceError("S stage did not converge");
  if (!f.converged_mm) throw ConvergenceError("MM stage did not converge");
  return f;
}

void fill_estimates(ReplicationRecord& r, const FitResult& f) {
  r.beta_s = f.xi_s.beta;
  r.alpha_s = f.xi_s.alpha;
  r.beta_mm = f.xi_mm.beta;
  r.alpha_mm = f.xi_mm.alpha;
  r.sigma = f.sigma;
}

// Runs body(n, rep, record) for every (n, rep) in parallel into fixed slots.
template <typename Body>
std::vector<ReplicationRecord> replicate(const SimScenario& s, Claim claim, const std::vector<int>& sizes,
                                         Body body) {
  const std::size_t reps = static_cast<std::size_t>(s.replications);
  std::vector<ReplicationRecord> out(sizes.size() * reps);
  parallel_for(out.size(), resolve_threads(s.threads), [&](std::size_t idx) {
    ReplicationRecord& r = out[idx];
    r.claim = claim;
    r.n = sizes[idx / reps];
    r.rep = static_cast<int>(idx % reps);
    try {
      body(r);
      r.ok = true;
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
    }
  });
  return out;
}

// Sets failures/attempted and fails the claim if too many fits were dropped.
void count_failures(const std::vector<ReplicationRecord>& records, ClaimResult& c) {
  c.attempted = static_cast<int>(records.size());
  c.failures = static_cast<int>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
  c.metrics["failure_fraction"] = c.attempted > 0 ? static_cast<double>(c.failures) / c.attempted : 0.0;
}

void decide(const SimScenario& s, ClaimResult& c, bool criteria_met) {
  const double frac = c.attempted > 0 ? static_cast<double>(c.failures) / c.attempted : 0.0;
  if (frac > s.thresholds.max_failure_fraction) {
    c.reasons.push_back("failure fraction " + std::to_string(frac) + " above threshold.max_failure_fraction");
    criteria_met = false;
  }
  if (s.replications < 2) {
    c.pass.reset();
    c.status = "insufficient";
    c.reasons.push_back("replications < 2; claim not decided");
    return;
  }
  c.pass = criteria_met;
  c.status = criteria_met ? "pass" : "fail";
}

std::vector<double> collect(const std::vector<ReplicationRecord>& records, int n, double ReplicationRecord::*field) {
  std::vector<double> v;
  for (const auto& r : records) {
    if (r.ok && r.n == n) v.push_back(r.*field);
  }
  return v;
}

Vector stacked_mm(const ReplicationRecord& r) {
  Vector v(r.beta_mm.size() + 1);
  v << r.beta_mm, r.alpha_mm;
  return v;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Least squares of y on [g'(x), 1]; linear and location models only.
Vector least_squares(const Dataset& d) {
  Matrix a(d.n(), d.p() + 1);
  a << d.x, Vector::Ones(d.n());
  return a.colPivHouseholderQr().solve(d.y);
}

std::string fmt(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

SimReport make_report(const SimScenario& s) {
  SimReport rep;
  rep.scenario = s.name;
  rep.seed = s.seed;
  if (!s.error.unimodal()) {
    rep.warnings.push_back(
        "error density is not strongly unimodal: uniqueness and Fisher-consistency of the targets are not guaranteed");
  }
  return rep;
}

}  // namespace

double ks_normal_distance(std::vector<double> z) {
  if (z.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(z.begin(), z.end());
  const double m = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    d = std::max({d, f - static_cast<double>(i) / m, static_cast<double>(i + 1) / m - f});
  }
  return d;
}

TrueParameter true_parameter(const SimScenario& s) {
  TrueParameter t;
  t.target = solve_population(s.error, s.fit.rho0, s.fit.rho1, s.fit.delta);
  t.constants = population_constants(s.error, s.fit.rho0, s.fit.rho1, s.fit.delta, t.target, s.design_moments(),
                                     s.alpha0);
  t.theta.xi_s = {s.beta0, s.alpha0 + t.target.alpha00};
  t.theta.xi_mm = {s.beta0, s.alpha0 + t.target.alpha01};
  t.theta.sigma = t.target.sigma0;
  return t;
}

SimReport run_consistency(const SimScenario& s) {
  if (s.sample_sizes.size() < 3) throw ScenarioError("sample_sizes", "consistency needs at least three sample sizes");
  const RegressionModel m = s.make_model();
  const int q = m.q();
  // Without slopes the location target depends on the error law.
  const double alpha_target = q == 0 ? s.alpha0 + solve_population(s.error, s.fit.rho0, s.fit.rho1, s.fit.delta).alpha01
                                     : 0.0;
  SimReport report = make_report(s);
  report.records = replicate(s, Claim::kConsistency, s.sample_sizes, [&](ReplicationRecord& r) {
    const Dataset d = s.generate(r.n, r.rep);
    const FitResult f = fit_checked(d, m, replication_config(s, r.n, r.rep));
    fill_estimates(r, f);
    r.error_norm = q == 0 ? std::abs(f.xi_mm.alpha - alpha_target) : (f.xi_mm.beta - s.beta0).norm();
  });

  ClaimResult c;
  c.claim = Claim::kConsistency;
  count_failures(report.records, c);
  Json per_n = Json::array();
  std::vector<double> medians;
  for (int n : s.sample_sizes) {
    const double med = median(collect(report.records, n, &ReplicationRecord::error_norm));
    medians.push_back(med);
    per_n.push_back({{"n", n}, {"median_error", med}});
  }
  c.metrics["target"] = q == 0 ? "alpha_mm" : "beta_mm";
  c.metrics["per_n"] = per_n;
  bool ok = true;
  Json ratios = Json::array();
  for (std::size_t j = 1; j < medians.size(); ++j) {
    // Ratio rescaled to one quadrupling of n.
    const double growth = static_cast<double>(s.sample_sizes[j]) / s.sample_sizes[j - 1];
    const double ratio = std::pow(medians[j] / medians[j - 1], std::log(4.0) / std::log(growth));
    ratios.push_back(ratio);
    if (!(ratio >= s.thresholds.consistency_ratio_low && ratio <= s.thresholds.consistency_ratio_high)) {
      ok = false;
      c.reasons.push_back("error ratio " + fmt(ratio) + " between n=" + std::to_string(s.sample_sizes[j - 1]) +
                          " and n=" + std::to_string(s.sample_sizes[j]) + " outside [" +
                          fmt(s.thresholds.consistency_ratio_low) + ", " + fmt(s.thresholds.consistency_ratio_high) +
                          "]");
    }
  }
  c.metrics["ratios_per_quadrupling"] = ratios;
  decide(s, c, ok);
  report.claims.push_back(std::move(c));
  return report;
}

SimReport run_expansion_check(const SimScenario& s) {
  const RegressionModel m = s.make_model();
  const TrueParameter truth = true_parameter(s);
  const EquationSpec eq = EquationSpec::from_config(s.fit);
  const Vector theta0 = truth.theta.stacked();
  SimReport report = make_report(s);
  report.records = replicate(s, Claim::kExpansion, s.sample_sizes, [&](ReplicationRecord& r) {
    const Dataset d = s.generate(r.n, r.rep);
    const FitResult f = fit_checked(d, m, replication_config(s, r.n, r.rep));
    fill_estimates(r, f);
    Vector mean_if = Vector::Zero(theta0.size());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      mean_if += influence(m, eq, d.x.row(i).transpose(), d.y(i), truth.theta, truth.constants).stacked();
    }
    mean_if /= static_cast<double>(d.n());
    const double root_n = std::sqrt(static_cast<double>(r.n));
    const Vector err = JointParam::from_fit(f).stacked() - theta0;
    r.leading_norm = root_n * err.norm();
    r.remainder_norm = root_n * (err - mean_if).norm();
  });

  ClaimResult c;
  c.claim = Claim::kExpansion;
  count_failures(report.records, c);
  c.metrics["sigma0"] = truth.target.sigma0;
  c.metrics["alpha00"] = truth.target.alpha00;
  c.metrics["alpha01"] = truth.target.alpha01;
  Json per_n = Json::array();
  std::vector<double> rem;
  double last_ratio = 0.0;
  for (int n : s.sample_sizes) {
    const double med_r = median(collect(report.records, n, &ReplicationRecord::remainder_norm));
    const double med_l = median(collect(report.records, n, &ReplicationRecord::leading_norm));
    rem.push_back(med_r);
    last_ratio = med_r / med_l;
    per_n.push_back({{"n", n}, {"median_remainder", med_r}, {"median_leading", med_l}, {"ratio", last_ratio}});
  }
  c.metrics["per_n"] = per_n;
  bool ok = true;
  for (std::size_t j = 1; j < rem.size(); ++j) {
    if (!(rem[j] < rem[j - 1])) {
      ok = false;
      c.reasons.push_back("median remainder does not decrease from n=" + std::to_string(s.sample_sizes[j - 1]) +
                          " to n=" + std::to_string(s.sample_sizes[j]));
    }
  }
  if (!(last_ratio < s.thresholds.expansion_ratio)) {
    ok = false;
    c.reasons.push_back("remainder ratio " + fmt(last_ratio) + " at the largest n is not below threshold.expansion_ratio");
  }
  decide(s, c, ok);
  report.claims.push_back(std::move(c));
  return report;
}

SimReport run_normality(const SimScenario& s) {
  const RegressionModel m = s.make_model();
  const int k = m.q() + 1;
  const TrueParameter truth = true_parameter(s);
  const Matrix v_theory =
      population_mm_covariance(s.error, s.fit.rho0, s.fit.rho1, truth.constants, truth.target);
  const Vector xi0 = truth.theta.xi_mm.stacked();
  const bool linear = m.is_linear();
  // Least-squares estimates ride along for the efficiency comparison.
  std::vector<Vector> ls(s.sample_sizes.size() * static_cast<std::size_t>(s.replications));
  SimReport report = make_report(s);
  report.records = replicate(s, Claim::kNormality, s.sample_sizes, [&](ReplicationRecord& r) {
    const Dataset d = s.generate(r.n, r.rep);
    const FitResult f = fit_checked(d, m, replication_config(s, r.n, r.rep));
    fill_estimates(r, f);
    if (linear && s.thresholds.check_efficiency) {
      const std::size_t slot =
          static_cast<std::size_t>(std::find(s.sample_sizes.begin(), s.sample_sizes.end(), r.n) -
                                   s.sample_sizes.begin()) *
              static_cast<std::size_t>(s.replications) +
          static_cast<std::size_t>(r.rep);
      ls[slot] = least_squares(d);
    }
  });

  ClaimResult c;
  c.claim = Claim::kNormality;
  count_failures(report.records, c);
  c.metrics["V_theory"] = to_json(v_theory);
  const double eff_theory = error_variance(s.error) / mm_variance_factor(s.error, s.fit.rho1, truth.target);
  c.metrics["efficiency_theory"] = eff_theory;
  bool ok = true;
  Json per_n = Json::array();
  for (std::size_t j = 0; j < s.sample_sizes.size(); ++j) {
    const int n = s.sample_sizes[j];
    const double root_n = std::sqrt(static_cast<double>(n));
    std::vector<Vector> z;
    std::vector<Vector> z_ls;
    for (std::size_t rep = 0; rep < static_cast<std::size_t>(s.replications); ++rep) {
      const auto& r = report.records[j * static_cast<std::size_t>(s.replications) + rep];
      if (!r.ok) continue;
      z.push_back(root_n * (stacked_mm(r) - xi0));
      if (ls[j * static_cast<std::size_t>(s.replications) + rep].size() == k) {
        z_ls.push_back(root_n * (ls[j * static_cast<std::size_t>(s.replications) + rep] - xi0));
      }
    }
    const double count = static_cast<double>(z.size());
    Json entry = {{"n", n}, {"used", z.size()}};
    if (z.size() < 2) {
      per_n.push_back(entry);
      continue;
    }
    Vector mean = Vector::Zero(k);
    for (const auto& v : z) mean += v;
    mean /= count;
    Matrix cov = Matrix::Zero(k, k);
    for (const auto& v : z) cov += (v - mean) * (v - mean).transpose();
    cov /= count - 1.0;
    Json rel = Json::array();
    Json ks = Json::array();
    for (int a = 0; a < k; ++a) {
      const double e = std::abs(cov(a, a) - v_theory(a, a)) / v_theory(a, a);
      rel.push_back(e);
      if (!(e <= s.thresholds.variance_rel)) {
        ok = false;
        c.reasons.push_back("n=" + std::to_string(n) + ": variance of coordinate " + std::to_string(a + 1) +
                            " off by " + fmt(e) + " relative");
      }
      std::vector<double> std_z;
      const double sd = std::sqrt(cov(a, a));
      for (const auto& v : z) std_z.push_back((v(a) - mean(a)) / sd);
      const double dist = ks_normal_distance(std::move(std_z));
      ks.push_back(dist);
      if (!(dist <= s.thresholds.normality_ks)) {
        ok = false;
        c.reasons.push_back("n=" + std::to_string(n) + ": KS distance of coordinate " + std::to_string(a + 1) + " is " +
                            fmt(dist));
      }
    }
    entry["mean"] = to_json(mean);
    entry["V_empirical"] = to_json(cov);
    entry["diagonal_relative_error"] = rel;
    entry["ks_distance"] = ks;
    if (s.thresholds.check_efficiency) {
      if (!linear) throw ScenarioError("threshold.check_efficiency", "needs a linear or location model");
      // Efficiency of the MM estimate relative to least squares, averaged over slopes
      // (the location coordinate when there are none).
      const int first = k > 1 ? 0 : k - 1;
      const int last = k > 1 ? k - 1 : k;
      double eff = 0.0;
      for (int a = first; a < last; ++a) {
        double ls_mean = 0.0;
        for (const auto& v : z_ls) ls_mean += v(a);
        ls_mean /= static_cast<double>(z_ls.size());
        double ls_var = 0.0;
        for (const auto& v : z_ls) ls_var += (v(a) - ls_mean) * (v(a) - ls_mean);
        ls_var /= static_cast<double>(z_ls.size()) - 1.0;
        eff += ls_var / cov(a, a);
      }
      eff /= static_cast<double>(last - first);
      entry["efficiency_empirical"] = eff;
      const double tol = s.thresholds.efficiency_tol;
      for (double e : {eff, eff_theory}) {
        if (!(std::abs(e - s.thresholds.efficiency_target) <= tol)) {
          ok = false;
          c.reasons.push_back("n=" + std::to_string(n) + ": efficiency " + fmt(e) + " outside target");
        }
      }
    }
    per_n.push_back(entry);
  }
  c.metrics["per_n"] = per_n;
  decide(s, c, ok);
  report.claims.push_back(std::move(c));
  return report;
}

SimReport run_contamination(const SimScenario& s) {
  const RegressionModel m = s.make_model();
  const int q = m.q();
  const auto& fracs = s.contamination_fractions;
  const auto& mags = s.contamination_magnitudes;
  const std::size_t sweep = fracs.size() * mags.size();
  const std::size_t reps = static_cast<std::size_t>(s.replications);
  const auto slope = [&](const AugmentedParam& xi) -> Vector {
    if (q > 0) return Vector(xi.beta);
    return Vector::Constant(1, xi.alpha).eval();
  };

  // One slot per (n, rep): the clean fit followed by the whole sweep.
  struct Slot {
    bool ok = false;
    std::string error;
    double se = 0.0;
    std::vector<ReplicationRecord> sweep;
  };
  std::vector<Slot> slots(s.sample_sizes.size() * reps);
  parallel_for(slots.size(), resolve_threads(s.threads), [&](std::size_t idx) {
    Slot& slot = slots[idx];
    const int n = s.sample_sizes[idx / reps];
    const int rep = static_cast<int>(idx % reps);
    const FitConfig cfg = replication_config(s, n, rep);
    const Dataset clean = s.generate(n, rep);
    FitResult clean_fit;
    try {
      clean_fit = fit_checked(clean, m, cfg);
      const InferenceReport inf = asymptotic_cov(clean, m, cfg, clean_fit);
      slot.se = (q > 0 ? Vector(inf.std_errors.head(q)) : Vector(inf.std_errors.tail(1))).norm();
      slot.ok = true;
    } catch (const Error& e) {
      slot.error = e.what();
      return;
    }
    for (double eps : fracs) {
      for (double mag : mags) {
        ReplicationRecord r;
        r.claim = Claim::kContamination;
        r.n = n;
        r.rep = rep;
        r.epsilon = eps;
        r.magnitude = mag;
        Dataset d = clean;
        const auto bad = static_cast<Eigen::Index>(std::floor(eps * n));
        for (Eigen::Index i = 0; i < bad; ++i) d.y(i) = mag;
        try {
          const FitResult f = fit_checked(d, m, cfg);
          fill_estimates(r, f);
          r.deviation = (slope(f.xi_mm) - slope(clean_fit.xi_mm)).norm();
          r.ok = true;
        } catch (const Error& e) {
          r.error = e.what();
        }
        slot.sweep.push_back(std::move(r));
      }
    }
  });

  SimReport report = make_report(s);
  ClaimResult c;
  c.claim = Claim::kContamination;
  bool ok = true;
  double worst_multiple = 0.0;
  double worst_growth = 0.0;
  int clean_failures = 0;
  for (const Slot& slot : slots) {
    if (!slot.ok) {
      ++clean_failures;
      continue;
    }
    for (std::size_t a = 0; a < fracs.size(); ++a) {
      for (std::size_t b = 0; b < mags.size(); ++b) {
        const ReplicationRecord& r = slot.sweep[a * mags.size() + b];
        if (r.ok) worst_multiple = std::max(worst_multiple, r.deviation / slot.se);
      }
      if (mags.size() >= 2) {
        const ReplicationRecord& hi = slot.sweep[a * mags.size() + mags.size() - 1];
        const ReplicationRecord& lo = slot.sweep[a * mags.size() + mags.size() - 2];
        if (hi.ok && lo.ok) {
          // Absolute slack of 1e-9 standard errors absorbs last-digit noise when both deviations vanish.
          const double excess = hi.deviation - s.thresholds.magnitude_growth * lo.deviation;
          worst_growth = std::max(worst_growth, excess / slot.se);
          if (excess > 1e-9 * slot.se) {
            ok = false;
            c.reasons.push_back("n=" + std::to_string(hi.n) + " rep " + std::to_string(hi.rep) + " epsilon " +
                                fmt(hi.epsilon) + ": deviation grows with outlier magnitude");
          }
        }
      }
    }
    report.records.insert(report.records.end(), slot.sweep.begin(), slot.sweep.end());
  }
  c.attempted = static_cast<int>(slots.size() * (sweep + 1));
  c.failures = clean_failures * static_cast<int>(sweep + 1) +
               static_cast<int>(std::count_if(report.records.begin(), report.records.end(),
                                              [](const auto& r) { return !r.ok; }));
  c.metrics["failure_fraction"] = c.attempted > 0 ? static_cast<double>(c.failures) / c.attempted : 0.0;
  c.metrics["max_deviation_in_se"] = worst_multiple;
  c.metrics["max_growth_excess_in_se"] = worst_growth;
  Json table = Json::array();
  for (std::size_t a = 0; a < fracs.size(); ++a) {
    for (std::size_t b = 0; b < mags.size(); ++b) {
      std::vector<double> dev;
      for (const Slot& slot : slots) {
        if (slot.ok && slot.sweep[a * mags.size() + b].ok) dev.push_back(slot.sweep[a * mags.size() + b].deviation);
      }
      table.push_back({{"epsilon", fracs[a]},
                       {"magnitude", mags[b]},
                       {"median_deviation", median(dev)},
                       {"max_deviation", dev.empty() ? 0.0 : *std::max_element(dev.begin(), dev.end())}});
    }
  }
  c.metrics["sweep"] = table;
  if (!(worst_multiple < s.thresholds.contamination_se_multiple)) {
    ok = false;
    c.reasons.push_back("deviation reaches " + fmt(worst_multiple) + " clean-data standard errors");
  }
  decide(s, c, ok);
  report.claims.push_back(std::move(c));
  return report;
}

SimReport run_scenario(const SimScenario& s) {
  s.validate();
  SimReport out = make_report(s);
  for (Claim claim : s.claims) {
    SimReport part;
    switch (claim) {
      case Claim::kConsistency:
        part = run_consistency(s);
        break;
      case Claim::kExpansion:
        part = run_expansion_check(s);
        break;
      case Claim::kNormality:
        part = run_normality(s);
        break;
      case Claim::kContamination:
        part = run_contamination(s);
        break;
    }
    out.claims.insert(out.claims.end(), part.claims.begin(), part.claims.end());
    out.records.insert(out.records.end(), part.records.begin(), part.records.end());
  }
  return out;
}

bool SimReport::all_pass() const {
  return std::none_of(claims.begin(), claims.end(), [](const ClaimResult& c) { return c.pass == false; });
}

Json SimReport::to_json() const {
  Json out;
  out["schema_version"] = 1;
  out["scenario"] = scenario;
  out["seed"] = seed;
  out["all_pass"] = all_pass();
  out["warnings"] = warnings;
  Json list = Json::array();
  for (const auto& c : claims) {
    Json j;
    j["claim"] = claim_name(c.claim);
    j["status"] = c.status;
    j["pass"] = c.pass ? Json(*c.pass) : Json(nullptr);
    j["attempted"] = c.attempted;
    j["failures"] = c.failures;
    j["reasons"] = c.reasons;
    j["metrics"] = c.metrics;
    list.push_back(std::move(j));
  }
  out["claims"] = std::move(list);
  return out;
}

std::string SimReport::to_csv() const {
  Eigen::Index q = 0;
  for (const auto& r : records) q = std::max({q, r.beta_mm.size(), r.beta_s.size()});
  std::string out = "claim,n,rep,epsilon,magnitude,ok,sigma,alpha_s,alpha_mm";
  for (Eigen::Index j = 0; j < q; ++j) out += ",beta_s_" + std::to_string(j + 1);
  for (Eigen::Index j = 0; j < q; ++j) out += ",beta_mm_" + std::to_string(j + 1);
  out += ",error_norm,leading_norm,remainder_norm,deviation,error\n";
  for (const auto& r : records) {
    out += claim_name(r.claim) + "," + std::to_string(r.n) + "," + std::to_string(r.rep) + "," + fmt(r.epsilon) + "," +
           fmt(r.magnitude) + "," + (r.ok ? "1" : "0") + "," + fmt(r.sigma) + "," + fmt(r.alpha_s) + "," +
           fmt(r.alpha_mm);
    for (Eigen::Index j = 0; j < q; ++j) out += "," + (j < r.beta_s.size() ? fmt(r.beta_s(j)) : std::string());
    for (Eigen::Index j = 0; j < q; ++j) out += "," + (j < r.beta_mm.size() ? fmt(r.beta_mm(j)) : std::string());
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += "," + fmt(r.error_norm) + "," + fmt(r.leading_norm) + "," + fmt(r.remainder_norm) + "," +
           fmt(r.deviation) + "," + err + "\n";
  }
  return out;
}

}  // namespace robustmm
