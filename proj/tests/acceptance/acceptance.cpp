// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include "../oracles.hpp"

#include "robustmm/cli.hpp"
#include "robustmm/estimators.hpp"
#include "robustmm/inference.hpp"
#include "robustmm/json_writer.hpp"
#include "robustmm/montecarlo.hpp"
#include "robustmm/mscale.hpp"
#include "robustmm/rng.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace robustmm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double max_rel(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// 1. M-scale level and scale equivariance.
Outcome mscale_certificate() {
  CounterRng rng(101);
  const double k = kDefaultK0;
  const RhoFunction rho = RhoFunction::bisquare(k);
  const MScaleConfig cfg;
  double worst_level = 0;
  double worst_equi = 0;
  int positive = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(496));
    std::vector<double> r(static_cast<std::size_t>(n));
    const double scale = std::exp(8 * rng.uniform() - 4);
    const bool with_zeros = trial % 10 == 0;
    for (auto& x : r) {
      const double u = rng.uniform();
      x = with_zeros && u < 0.3 ? 0.0 : scale * (u < 0.15 ? 50 * rng.normal() : rng.normal());
    }
    const double s = mscale(r, rho, cfg);
    if (s > 0) {
      ++positive;
      double sum = 0;
      for (double x : r) sum += oracle::bisquare_rho(x / s, k);
      worst_level = std::max(worst_level, std::abs(sum / n - cfg.delta));
    }
    for (double c : {1e-3, -2.5, 1e4}) {
      std::vector<double> rc = r;
      for (auto& x : rc) x *= c;
      const double sc = mscale(rc, rho, cfg);
      if (s > 0) worst_equi = std::max(worst_equi, rel(sc, std::abs(c) * s));
      else if (sc != 0) worst_equi = 1;
    }
  }
  Outcome o;
  o.pass = worst_level <= 1e-10 && worst_equi <= 1e-12 && positive > 900;
  o.detail = "max |mean rho - delta| " + fmt("%.2e", worst_level) + ", max equivariance error " +
             fmt("%.2e", worst_equi) + " (" + std::to_string(positive) + " positive scales)";
  return o;
}

// 2. Derivatives against finite differences and R1.
Outcome derivative_chain() {
  double worst_psi = 0;
  double worst_dpsi = 0;
  bool r1 = true;
  for (double k : {1.547, 4.685}) {
    const RhoFunction f = RhoFunction::bisquare(k);
    const int m = 10000;
    for (int i = 0; i < m; ++i) {
      const double t = -1.5 * k + 3.0 * k * i / (m - 1);
      const double fd_psi = oracle::central_diff([&](double x) { return f.rho(x); }, t, 1e-6);
      const double fd_dpsi = oracle::central_diff([&](double x) { return f.psi(x); }, t, 1e-7);
      worst_psi = std::max(worst_psi, std::abs(f.psi(t) - fd_psi));
      worst_dpsi = std::max(worst_dpsi, std::abs(f.psi_prime(t) - fd_dpsi));
    }
    r1 = r1 && verify_r1(f, 10000);
  }
  Outcome o;
  o.pass = worst_psi <= 1e-7 && worst_dpsi <= 1e-6 && r1;
  o.detail = "max |psi - FD(rho)| " + fmt("%.2e", worst_psi) + ", max |psi' - FD(psi)| " + fmt("%.2e", worst_dpsi) +
             ", R1 " + (r1 ? "holds" : "fails") + " for k = 1.547 and 4.685";
  return o;
}

// 3. Fitted values solve the estimating equations.
Outcome estimating_equations() {
  CounterRng rng(303);
  FitConfig cfg;
  cfg.n_subsamples = 200;
  double worst = 0;
  int converged = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int p = 1 + static_cast<int>(rng.below(4));
    const int n = 30 + static_cast<int>(rng.below(171));
    Dataset d{Matrix(n, p), Vector(n)};
    for (int i = 0; i < n; ++i) {
      double y = rng.normal();
      for (int j = 0; j < p; ++j) {
        d.x(i, j) = rng.normal();
        y += (j % 2 ? -1.0 : 1.5) * d.x(i, j);
      }
      if (rng.uniform() < 0.15) y += 20 + 10 * rng.normal();
      d.y(i) = y;
    }
    cfg.seed = static_cast<std::uint64_t>(inst) + 1;
    const FitResult f = fit(d, RegressionModel::linear(p), cfg);
    if (f.converged_s && f.converged_mm && !f.exact_fit) {
      ++converged;
      worst = std::max(worst, f.equations.max_abs());
    }
  }
  Outcome o;
  o.pass = worst <= 1e-6 && converged > 0;
  o.detail = std::to_string(converged) + "/100 converged, max ||mean Psi||_inf " + fmt("%.2e", worst);
  return o;
}

InferenceConstants random_constants(CounterRng& rng, int q) {
  auto signed_uniform = [&](double lo, double hi) {
    const double v = lo + (hi - lo) * rng.uniform();
    return rng.uniform() < 0.5 ? -v : v;
  };
  InferenceConstants c;
  c.a00 = signed_uniform(0.2, 2.0);
  c.a01 = signed_uniform(0.2, 2.0);
  c.d0 = signed_uniform(0.2, 2.0);
  c.e00 = rng.normal();
  c.e01 = rng.normal();
  c.b0 = Vector(q);
  for (int j = 0; j < q; ++j) c.b0(j) = rng.normal();
  Matrix l(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) l(i, j) = rng.normal();
  }
  c.A0 = l * l.transpose() + 0.1 * Matrix::Identity(q, q);
  c.C0 = assemble_c0(c.b0, c.A0);
  c.sigma0 = 0.5 + 2.5 * rng.uniform();
  c.alpha00 = rng.normal();
  c.alpha01 = rng.normal();
  return c;
}

// 4. Determinant and block inverses of D0.
Outcome closed_form_algebra() {
  CounterRng rng(404);
  double worst_det = 0;
  double worst_d0inv = 0;
  double worst_c0inv = 0;
  double worst_unit = 0;
  bool factor_rule = true;
  for (int set = 0; set < 50; ++set) {
    const int q = set % 5;
    const InferenceConstants c = random_constants(rng, q);
    const Matrix d0 = closed_form_d0(c);
    worst_det = std::max(worst_det, rel(closed_form_d0_determinant(c), d0.determinant()));
    worst_d0inv = std::max(worst_d0inv, max_rel(closed_form_d0_inverse(c), d0.inverse()));
    worst_c0inv = std::max(worst_c0inv, max_rel(closed_form_c0_inverse(c), c.C0.inverse()));
    const Vector e = closed_form_c0_inverse(c) * c.b0_star();
    Vector unit = Vector::Zero(q + 1);
    unit(q) = 1.0;
    worst_unit = std::max(worst_unit, (e - unit).cwiseAbs().maxCoeff());
    // Singularity of D0 is decided by a00 a01 d0 |C0|: zeroing any factor makes D0 singular.
    for (int which = 0; which < 3; ++which) {
      InferenceConstants z = c;
      (which == 0 ? z.a00 : which == 1 ? z.a01 : z.d0) = 0.0;
      factor_rule = factor_rule && closed_form_d0(z).fullPivLu().rank() < closed_form_d0(z).rows();
    }
  }
  Outcome o;
  o.pass = worst_det <= 1e-8 && worst_d0inv <= 1e-8 && worst_c0inv <= 1e-8 && worst_unit <= 1e-10 && factor_rule;
  o.detail = "|D0| rel err " + fmt("%.2e", worst_det) + " (factor (-1/sigma0)^(2q+3) a00^(q+1) a01^(q+1) d0 |C0|^2)" +
             ", D0^-1 " + fmt("%.2e", worst_d0inv) + ", C0^-1 " + fmt("%.2e", worst_c0inv) + ", C0^-1 b* - e " +
             fmt("%.2e", worst_unit);
  return o;
}

// 5. Closed-form influence equals -D0^{-1} Psi.
Outcome influence_equivalence() {
  CounterRng rng(505);
  const EquationSpec eq = EquationSpec::from_config(FitConfig{});
  double worst = 0;
  int evaluated = 0;
  for (const RegressionModel& m : {RegressionModel::linear(3), RegressionModel::location()}) {
    const int q = m.q();
    for (int obs = 0; obs < 1000; ++obs) {
      const InferenceConstants c = random_constants(rng, q);
      JointParam theta;
      theta.xi_s.beta = Vector(q);
      theta.xi_mm.beta = Vector(q);
      for (int j = 0; j < q; ++j) {
        theta.xi_s.beta(j) = rng.normal();
        theta.xi_mm.beta(j) = theta.xi_s.beta(j) + 0.1 * rng.normal();
      }
      theta.xi_s.alpha = rng.normal();
      theta.xi_mm.alpha = theta.xi_s.alpha + 0.1 * rng.normal();
      theta.sigma = c.sigma0;
      Vector x(q);
      for (int j = 0; j < q; ++j) x(j) = 2 * rng.normal();
      const double y = m.eval(x, theta.xi_mm.beta) + theta.xi_mm.alpha + 2 * c.sigma0 * rng.normal();
      const Vector closed = influence(m, eq, x, y, theta, c).stacked();
      const Vector generic = influence_generic(m, eq, x, y, theta, closed_form_d0(c));
      worst = std::max(worst, max_rel(closed, generic));
      ++evaluated;
    }
  }
  Outcome o;
  o.pass = worst <= 1e-8;
  o.detail = std::to_string(evaluated) + " observations (regression and location), max rel err " + fmt("%.2e", worst);
  return o;
}

// 6. S and MM on n = 8 against brute-force search.
Outcome tiny_oracle() {
  FitConfig cfg;
  cfg.n_subsamples = 200;
  double worst_s = 0;
  double worst_mm = 0;
  bool descent = true;
  for (std::uint64_t inst = 1; inst <= 10; ++inst) {
    CounterRng rng(600 + inst);
    Dataset d{Matrix(8, 1), Vector(8)};
    for (int i = 0; i < 8; ++i) {
      d.x(i, 0) = rng.normal();
      d.y(i) = 1.0 + 2.0 * d.x(i, 0) + rng.normal() + (i == 0 ? 30.0 : 0.0);
    }
    cfg.seed = inst;
    const FitResult f = fit(d, RegressionModel::linear(1), cfg);
    auto s_obj = [&](double b, double a) {
      std::vector<double> r(8);
      for (int i = 0; i < 8; ++i) r[static_cast<std::size_t>(i)] = d.y(i) - d.x(i, 0) * b - a;
      return oracle::bisquare_mscale(r, cfg.rho0.k());
    };
    const auto [sb, sa] = oracle::zoom_min(s_obj, 2.0, 1.0, 8.0);
    worst_s = std::max({worst_s, std::abs(f.xi_s.beta(0) - sb), std::abs(f.xi_s.alpha - sa)});
    auto mm_obj = [&](double b, double a) {
      double sum = 0;
      for (int i = 0; i < 8; ++i) sum += oracle::bisquare_rho((d.y(i) - d.x(i, 0) * b - a) / f.sigma, cfg.rho1.k());
      return sum;
    };
    // The MM estimate is the local minimum reached from the S start.
    descent = descent && mm_obj(f.xi_mm.beta(0), f.xi_mm.alpha) <= mm_obj(f.xi_s.beta(0), f.xi_s.alpha);
    const auto [mb, ma] = oracle::zoom_min(mm_obj, f.xi_mm.beta(0), f.xi_mm.alpha, 0.1);
    worst_mm = std::max({worst_mm, std::abs(f.xi_mm.beta(0) - mb), std::abs(f.xi_mm.alpha - ma)});
  }
  Outcome o;
  o.pass = worst_s <= 1e-3 && worst_mm <= 1e-3 && descent;
  o.detail = "10 instances, max |S - grid| " + fmt("%.2e", worst_s) + ", max |MM - local grid| " +
             fmt("%.2e", worst_mm);
  return o;
}

std::string scenario_path(const std::string& name) { return std::string(ROBUSTMM_SCENARIOS) + "/" + name + ".cfg"; }

// Runs bundled scenarios; every claim must pass (undecided counts as a failure here).
Outcome scenarios(const std::vector<std::string>& names, const std::function<std::string(const Json&)>& summary) {
  Outcome o;
  for (const auto& name : names) {
    const SimReport r = run_scenario(load_scenario(scenario_path(name)));
    for (const auto& c : r.claims) {
      const bool ok = c.pass.value_or(false);
      o.pass = o.pass && ok;
      if (!o.detail.empty()) o.detail += "; ";
      o.detail += name + ": " + c.status + " [" + summary(c.metrics) + "]";
      for (const auto& reason : c.reasons) o.detail += " " + reason;
    }
  }
  return o;
}

std::string join_numbers(const Json& arr, const char* f) {
  std::string s;
  for (const auto& v : arr) s += (s.empty() ? "" : "/") + fmt(f, v.get<double>());
  return s;
}

Outcome consistency_shadow() {
  return scenarios({"consistency-normal", "consistency-shifted-exponential"}, [](const Json& m) {
    return "ratios per quadrupling " + join_numbers(m["ratios_per_quadrupling"], "%.3f");
  });
}

Outcome normality_shadow() {
  return scenarios({"location-normal", "normality-linear"}, [](const Json& m) {
    std::string s;
    for (const auto& row : m["per_n"]) {
      s += "var rel err " + join_numbers(row["diagonal_relative_error"], "%.3f") + ", KS " +
           join_numbers(row["ks_distance"], "%.3f");
      if (row.contains("efficiency_empirical")) s += ", efficiency " + fmt("%.3f", row["efficiency_empirical"].get<double>());
    }
    return s;
  });
}

Outcome expansion_shadow() {
  return scenarios({"expansion-location", "expansion-linear"}, [](const Json& m) {
    Json ratios = Json::array();
    for (const auto& row : m["per_n"]) ratios.push_back(row["ratio"]);
    return "remainder/leading " + join_numbers(ratios, "%.3f");
  });
}

Outcome robustness_shadow() {
  return scenarios({"contamination-linear"}, [](const Json& m) {
    return "max deviation " + fmt("%.2f", m["max_deviation_in_se"].get<double>()) + " SE, growth excess " +
           fmt("%.2e", m["max_growth_excess_in_se"].get<double>()) + " SE";
  });
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "robustmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_metadata(const std::string& text) {
  Json j = Json::parse(text);
  j.erase("metadata");
  return to_json_text(j);
}

// 11. Fixed-seed CLI runs are byte-identical, serial and parallel.
Outcome determinism() {
  const auto dir = std::filesystem::path(ROBUSTMM_BINARY_DIR) / "acceptance_scratch";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "data.csv").string();
  {
    CounterRng rng(1111);
    std::ofstream f(csv);
    f << "y,x1,x2,x3\n";
    char line[256];
    for (int i = 0; i < 300; ++i) {
      const double x1 = rng.normal();
      const double x2 = rng.normal();
      const double x3 = rng.normal();
      const double y = 1 + x1 - 2 * x2 + 0.5 * x3 + rng.normal() + (i % 7 == 0 ? 40.0 : 0.0);
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", y, x1, x2, x3);
      f << line;
    }
  }
  const std::string cfg = (dir / "det.cfg").string();
  std::ofstream(cfg) << "name = determinism\nclaims = consistency, contamination\nmodel = linear\np = 2\n"
                        "beta0 = 1, -1\nsample_sizes = 50, 100, 200\nreplications = 8\nfit.n_subsamples = 50\n"
                        "contamination.fractions = 0.2\nseed = 77\n";
  bool same = true;
  std::string fits[3];
  int i = 0;
  for (const char* threads : {"1", "4", "1"}) {
    const CliRun r = cli({"fit", "--input", csv, "--seed", "5", "--threads", threads, "--metadata"});
    same = same && r.code == kExitOk;
    fits[i++] = without_metadata(r.out);
  }
  same = same && fits[0] == fits[1] && fits[0] == fits[2];
  std::string sims[3];
  std::string csvs[3];
  i = 0;
  for (const char* threads : {"1", "4", "1"}) {
    const std::string out = (dir / ("sim" + std::to_string(i) + ".json")).string();
    const CliRun r = cli({"simulate", "--scenario", cfg, "--out", out, "--threads", threads, "--metadata"});
    same = same && (r.code == kExitOk || r.code == kExitClaimFailed);
    sims[i] = without_metadata(slurp(out));
    csvs[i] = slurp((dir / ("sim" + std::to_string(i) + ".csv")).string());
    ++i;
  }
  same = same && sims[0] == sims[1] && sims[0] == sims[2] && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  Outcome o;
  o.pass = same;
  o.detail = same ? "fit and simulate reports identical across repeats and 1 vs 4 threads"
                  : "reports differ between runs";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "M-scale certificate", 5, mscale_certificate},
      {2, "derivative chain and R1", 2, derivative_chain},
      {3, "estimating-equation certificate", 30, estimating_equations},
      {4, "closed-form D0 algebra", 5, closed_form_algebra},
      {5, "influence equivalence", 5, influence_equivalence},
      {6, "oracle equivalence on tiny instances", 60, tiny_oracle},
      {7, "consistency shadow", 600, consistency_shadow},
      {8, "normality and variance shadow", 600, normality_shadow},
      {9, "expansion shadow", 600, expansion_shadow},
      {10, "robustness shadow", 300, robustness_shadow},
      {11, "determinism", 60, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %2d %s (%.2f s, limit %.0f s%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.limit_seconds, in_time ? "" : ", too slow", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
