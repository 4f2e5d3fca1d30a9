#include "robustmm/estimators.hpp"

#include "robustmm/parallel.hpp"
#include "robustmm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace robustmm {

void FitConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("fit config: delta must lie in (0, 1)");
  if (!is_majorized(rho1, rho0)) throw ArgumentError("fit config: rho1 must not exceed rho0 anywhere");
  if (n_subsamples < 1) throw ArgumentError("fit config: n_subsamples must be positive");
  if (refine_steps < 0) throw ArgumentError("fit config: refine_steps must be nonnegative");
  if (n_best < 1) throw ArgumentError("fit config: n_best must be positive");
  if (!(irwls_tol > 0.0)) throw ArgumentError("fit config: irwls_tol must be positive");
  if (irwls_max_iter < 1 || s_max_iter < 1) throw ArgumentError("fit config: iteration caps must be positive");
}

MScaleConfig FitConfig::mscale_config() const {
  MScaleConfig c;
  c.delta = delta;
  return c;
}

namespace {

constexpr int kMaxHalvings = 30;
constexpr int kElementalAttempts = 10;

struct SState {
  AugmentedParam xi;
  Vector r;
  double sigma = 0.0;
};

double step_scale(const AugmentedParam& xi, double sigma) { return xi.stacked().norm() + sigma; }

// Solves the weighted normal equations J'WJ delta = J'W r. Returns false if the
// weighted design is numerically singular.
bool weighted_step(const Matrix& jac, const Vector& w, const Vector& r, Vector& delta) {
  const Matrix jw = jac.array().colwise() * w.array();
  const Matrix a = jac.transpose() * jw;
  const Vector b = jw.transpose() * r;
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  const Vector diag = ldlt.vectorD().cwiseAbs();
  if (diag.size() > 0 && !(diag.minCoeff() > 1e-13 * diag.maxCoeff())) return false;
  delta = ldlt.solve(b);
  return delta.allFinite();
}

AugmentedParam apply_step(const RegressionModel& m, const AugmentedParam& xi, const Vector& delta, double factor) {
  AugmentedParam next = AugmentedParam::from_stacked(xi.stacked() + factor * delta);
  if (m.bounds()) next.beta = m.bounds()->project(next.beta);
  return next;
}

Vector standardized(const Vector& r, double sigma) { return r / sigma; }

Vector weights(const RhoFunction& rho, const Vector& t) {
  Vector w(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) w(i) = rho.weight(t(i));
  return w;
}

double mean_rho(const RhoFunction& rho, const Vector& r, double sigma) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) sum += rho.rho(r(i) / sigma);
  return sum / static_cast<double>(r.size());
}

double solve_scale(const Vector& r, const FitConfig& cfg, double hint) {
  return solve_mscale(std::span<const double>(r.data(), r.size()), cfg.rho0, cfg.mscale_config(), hint).sigma;
}

// One IRWLS step on the M-scale: rho0 weights at the current scale, a weighted
// Gauss-Newton step, halved until the scale does not increase. Returns the
// applied step norm, or a negative value when no step could be taken.
double s_step(const Dataset& d, const RegressionModel& m, const FitConfig& cfg, SState& s) {
  if (s.sigma <= 0.0) return -1.0;
  const Vector w = weights(cfg.rho0, standardized(s.r, s.sigma));
  const Matrix jac = augmented_jacobian(d, m, s.xi);
  Vector delta;
  if (!weighted_step(jac, w, s.r, delta)) return -1.0;

  double factor = 1.0;
  for (int h = 0; h <= kMaxHalvings; ++h, factor *= 0.5) {
    AugmentedParam xi_try = apply_step(m, s.xi, delta, factor);
    Vector r_try = residuals(d, m, xi_try);
    const double sigma_try = solve_scale(r_try, cfg, s.sigma);
    if (sigma_try <= s.sigma) {
      const double applied = (xi_try.stacked() - s.xi.stacked()).norm();
      s.xi = std::move(xi_try);
      s.r = std::move(r_try);
      s.sigma = sigma_try;
      return applied;
    }
  }
  return -1.0;
}

struct Candidate {
  SState state;
  bool valid = false;
  bool converged = false;
  int iterations = 0;
  std::size_t index = 0;
};

// Smallest scale first; near-ties by smallest ||xi||, then by index.
bool better(const Candidate& a, const Candidate& b) {
  const double sa = a.state.sigma;
  const double sb = b.state.sigma;
  if (std::abs(sa - sb) > 1e-12 * std::max(sa, sb)) return sa < sb;
  const double na = a.state.xi.stacked().norm();
  const double nb = b.state.xi.stacked().norm();
  if (na != nb) return na < nb;
  return a.index < b.index;
}

bool elemental_start(const Dataset& d, const RegressionModel& m, CounterRng& rng, AugmentedParam& xi) {
  const Eigen::Index n = d.n();
  const int dim = m.q() + 1;
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  // Partial Fisher-Yates for dim distinct rows.
  for (int j = 0; j < dim; ++j) {
    const auto pick = static_cast<std::size_t>(j) + rng.below(static_cast<std::uint64_t>(n - j));
    std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
  }
  Matrix a(dim, dim);
  Vector b(dim);
  for (int j = 0; j < dim; ++j) {
    const Eigen::Index row = pool[static_cast<std::size_t>(j)];
    a.row(j).head(m.q()) = d.x.row(row).head(m.q());
    a(j, m.q()) = 1.0;
    b(j) = d.y(row);
  }
  Eigen::FullPivLU<Matrix> lu(a);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) return false;
  xi = AugmentedParam::from_stacked(lu.solve(b));
  return xi.stacked().allFinite();
}

AugmentedParam random_box_start(const Dataset& d, const RegressionModel& m, CounterRng& rng) {
  const Box& box = *m.bounds();
  Vector beta(m.q());
  for (int j = 0; j < m.q(); ++j) beta(j) = box.lower(j) + (box.upper(j) - box.lower(j)) * rng.uniform();
  AugmentedParam xi{beta, 0.0};
  Vector r = residuals(d, m, xi);
  std::vector<double> v(r.data(), r.data() + r.size());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  xi.alpha = *mid;
  return xi;
}

// Refines until the relative step falls below irwls_tol or the cap is hit.
void refine_fully(const Dataset& d, const RegressionModel& m, const FitConfig& cfg, Candidate& c) {
  for (int it = 0; it < cfg.s_max_iter; ++it) {
    if (c.state.sigma <= 0.0) {
      c.converged = true;
      return;
    }
    const double tol = cfg.irwls_tol * step_scale(c.state.xi, c.state.sigma);
    const double applied = s_step(d, m, cfg, c.state);
    if (applied < 0.0) {
      c.converged = true;  // no admissible step: numerically stationary
      return;
    }
    ++c.iterations;
    if (applied <= tol) {
      c.converged = true;
      return;
    }
  }
}

}  // namespace

double m_objective(const Dataset& d, const RegressionModel& m, const RhoFunction& rho, const AugmentedParam& xi,
                   double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("M objective requires sigma > 0");
  return mean_rho(rho, residuals(d, m, xi), sigma);
}

SFit fit_s(const Dataset& d, const RegressionModel& m, const FitConfig& cfg) {
  cfg.validate();
  d.validate();
  if (d.n() < m.q() + 2) throw ArgumentError("fit needs n >= q + 2 observations");
  if (!m.is_linear() && !m.bounds()) throw ArgumentError("nonlinear models need a parameter box for candidate draws");

  const auto count = static_cast<std::size_t>(cfg.n_subsamples);
  std::vector<Candidate> candidates(count);
  std::vector<int> singular(count, 0);
  const int threads = resolve_threads(cfg.threads);

  parallel_for(count, threads, [&](std::size_t i) {
    CounterRng rng(cfg.seed, i);
    Candidate& c = candidates[i];
    c.index = i;
    AugmentedParam start;
    if (m.is_linear()) {
      bool ok = false;
      for (int attempt = 0; attempt < kElementalAttempts && !ok; ++attempt) {
        ok = elemental_start(d, m, rng, start);
        if (!ok) ++singular[i];
      }
      if (!ok) return;
    } else {
      start = random_box_start(d, m, rng);
    }
    c.state.xi = start;
    c.state.r = residuals(d, m, start);
    c.state.sigma = solve_scale(c.state.r, cfg, 0.0);
    for (int step = 0; step < cfg.refine_steps; ++step) {
      if (s_step(d, m, cfg, c.state) < 0.0) break;
    }
    c.valid = true;
  });

  SFit out;
  out.singular_subsamples = std::accumulate(singular.begin(), singular.end(), 0);
  std::vector<Candidate*> valid;
  for (auto& c : candidates) {
    if (c.valid) valid.push_back(&c);
  }
  out.candidates_evaluated = static_cast<int>(valid.size());
  if (valid.empty()) throw FitError("S-estimate: every elemental subsample was singular");

  std::sort(valid.begin(), valid.end(), [](const Candidate* a, const Candidate* b) { return better(*a, *b); });
  const std::size_t keep = std::min<std::size_t>(valid.size(), static_cast<std::size_t>(cfg.n_best));
  std::vector<Candidate> finalists;
  finalists.reserve(keep);
  for (std::size_t j = 0; j < keep; ++j) finalists.push_back(*valid[j]);

  parallel_for(keep, threads, [&](std::size_t j) { refine_fully(d, m, cfg, finalists[j]); });

  // Recompute each finalist's scale from scratch so the result does not depend
  // on warm starts.
  for (auto& c : finalists) c.state.sigma = solve_scale(c.state.r, cfg, 0.0);
  const Candidate& best = *std::min_element(finalists.begin(), finalists.end(), better);

  out.xi = best.state.xi;
  out.sigma = best.state.sigma;
  out.converged = best.converged;
  out.iterations = best.iterations;
  out.exact_fit = best.state.sigma == 0.0;
  return out;
}

MMFit fit_mm(const Dataset& d, const RegressionModel& m, const FitConfig& cfg, double sigma,
             const AugmentedParam& start) {
  if (!(sigma > 0.0)) throw ArgumentError("MM step requires sigma > 0");
  MMFit out;
  AugmentedParam xi = start;
  Vector r = residuals(d, m, xi);
  double objective = mean_rho(cfg.rho1, r, sigma);

  for (int it = 0; it < cfg.irwls_max_iter; ++it) {
    const Vector w = weights(cfg.rho1, standardized(r, sigma));
    const Matrix jac = augmented_jacobian(d, m, xi);
    Vector delta;
    if (!weighted_step(jac, w, r, delta)) {
      out.converged = true;
      break;
    }
    const double tol = cfg.irwls_tol * step_scale(xi, sigma);
    bool accepted = false;
    double factor = 1.0;
    for (int h = 0; h <= kMaxHalvings; ++h, factor *= 0.5) {
      AugmentedParam xi_try = apply_step(m, xi, delta, factor);
      Vector r_try = residuals(d, m, xi_try);
      const double obj_try = mean_rho(cfg.rho1, r_try, sigma);
      // Near the minimum the objective moves by O(step^2), below rounding; steps that do not
      // raise it beyond a few ulps are kept so the step tolerance, not rounding, ends the run.
      if (obj_try <= objective + 8 * std::numeric_limits<double>::epsilon() * objective) {
        const double applied = (xi_try.stacked() - xi.stacked()).norm();
        xi = std::move(xi_try);
        r = std::move(r_try);
        objective = obj_try;
        accepted = true;
        ++out.iterations;
        if (applied <= tol) out.converged = true;
        break;
      }
    }
    if (!accepted) out.converged = true;  // no descent direction left at this precision
    if (out.converged) break;
  }
  if (!out.converged) throw MMConvergenceError("MM step: iteration cap reached", xi);
  out.xi = std::move(xi);
  out.objective = objective;
  return out;
}

EquationCheck check_equations(const Dataset& d, const RegressionModel& m, const FitConfig& cfg,
                              const AugmentedParam& xi_s, const AugmentedParam& xi_mm, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("estimating equations need sigma > 0");
  const double n = static_cast<double>(d.n());
  EquationCheck check;

  const Vector r_s = residuals(d, m, xi_s);
  const Matrix j_s = augmented_jacobian(d, m, xi_s);
  Vector psi_s(r_s.size());
  double level = 0.0;
  for (Eigen::Index i = 0; i < r_s.size(); ++i) {
    psi_s(i) = cfg.rho0.psi(r_s(i) / sigma);
    level += cfg.rho0.rho(r_s(i) / sigma);
  }
  check.s_score = (j_s.transpose() * psi_s / n).cwiseAbs().maxCoeff();
  check.scale_level = std::abs(level / n - cfg.delta);

  const Vector r_mm = residuals(d, m, xi_mm);
  const Matrix j_mm = augmented_jacobian(d, m, xi_mm);
  Vector psi_mm(r_mm.size());
  for (Eigen::Index i = 0; i < r_mm.size(); ++i) psi_mm(i) = cfg.rho1.psi(r_mm(i) / sigma);
  check.mm_score = (j_mm.transpose() * psi_mm / n).cwiseAbs().maxCoeff();
  return check;
}

FitResult fit(const Dataset& d, const RegressionModel& m, const FitConfig& cfg) {
  const SFit s = fit_s(d, m, cfg);
  FitResult out;
  out.xi_s = s.xi;
  out.sigma = s.sigma;
  out.objective_s = s.sigma;
  out.converged_s = s.converged;
  out.iterations_s = s.iterations;
  out.candidates_evaluated = s.candidates_evaluated;
  out.singular_subsamples = s.singular_subsamples;

  if (s.exact_fit) {
    out.exact_fit = true;
    out.xi_mm = s.xi;
    out.converged_mm = true;
    return out;
  }

  const MMFit mm = fit_mm(d, m, cfg, s.sigma, s.xi);
  out.xi_mm = mm.xi;
  out.objective_mm = mm.objective;
  out.converged_mm = mm.converged;
  out.iterations_mm = mm.iterations;
  out.equations = check_equations(d, m, cfg, out.xi_s, out.xi_mm, out.sigma);
  out.equations_ok = out.equations.max_abs() <= 1e-6;
  return out;
}

FitResult fit_location(const Vector& y, const FitConfig& cfg) {
  if (y.size() < 2) throw ArgumentError("location fit needs at least 2 observations");
  Dataset d{Matrix(y.size(), 0), y};
  return fit(d, RegressionModel::location(), cfg);
}

}  // namespace robustmm
