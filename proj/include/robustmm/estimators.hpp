#pragma once

#include "robustmm/model.hpp"
#include "robustmm/mscale.hpp"
#include "robustmm/rho.hpp"

#include <algorithm>
#include <cstdint>

namespace robustmm {

struct FitConfig {
  double delta = kDefaultDelta;
  RhoFunction rho0 = RhoFunction::bisquare(kDefaultK0);
  RhoFunction rho1 = RhoFunction::bisquare(kDefaultK1);
  int n_subsamples = 500;
  int refine_steps = 2;      // IRWLS steps applied to every candidate
  int n_best = 5;            // candidates that get refined to convergence
  double irwls_tol = 1e-10;  // relative step size that ends an IRWLS run
  int irwls_max_iter = 500;  // MM stage
  int s_max_iter = 2000;     // full refinement of an S candidate
  std::uint64_t seed = 0;
  int threads = 1;  // 0 = resolve from ROBUSTMM_THREADS / hardware

  void validate() const;
  MScaleConfig mscale_config() const;
};

struct SFit {
  AugmentedParam xi;
  double sigma = 0.0;
  bool converged = false;
  bool exact_fit = false;
  int iterations = 0;  // full-refinement steps of the winning candidate
  int candidates_evaluated = 0;
  int singular_subsamples = 0;
};

struct MMFit {
  AugmentedParam xi;
  double objective = 0.0;  // mean rho1(r / sigma)
  bool converged = false;
  int iterations = 0;
};

/// Residual norms of the three stacked estimating equations at a fit.
struct EquationCheck {
  double mm_score = 0.0;     // ||mean psi1(t_MM) g'(xi_MM)||_inf
  double s_score = 0.0;      // ||mean psi0(t_S) g'(xi_S)||_inf
  double scale_level = 0.0;  // |mean rho0(t_S) - delta|
  double max_abs() const { return std::max({mm_score, s_score, scale_level}); }
};

struct FitResult {
  AugmentedParam xi_s;
  AugmentedParam xi_mm;
  double sigma = 0.0;
  double objective_s = 0.0;   // attained S-scale
  double objective_mm = 0.0;  // mean rho1(r(xi_MM) / sigma)
  bool converged_s = false;
  bool converged_mm = false;
  int iterations_s = 0;
  int iterations_mm = 0;
  int candidates_evaluated = 0;
  int singular_subsamples = 0;
  bool exact_fit = false;  // sigma == 0; MM stage skipped
  EquationCheck equations;
  bool equations_ok = false;  // equations.max_abs() <= 1e-6
};

class MMConvergenceError : public ConvergenceError {
 public:
  MMConvergenceError(const std::string& what, AugmentedParam last) : ConvergenceError(what), last(std::move(last)) {}
  AugmentedParam last;
};

/// S-estimate by elemental subsampling plus IRWLS refinement on the M-scale.
SFit fit_s(const Dataset& d, const RegressionModel& m, const FitConfig& cfg);

/// MM-estimate at fixed scale, started from `start`. Each IRWLS step is
/// halved (up to 30 times) until the rho1 objective does not increase.
MMFit fit_mm(const Dataset& d, const RegressionModel& m, const FitConfig& cfg, double sigma,
             const AugmentedParam& start);

FitResult fit(const Dataset& d, const RegressionModel& m, const FitConfig& cfg);
FitResult fit_location(const Vector& y, const FitConfig& cfg);

EquationCheck check_equations(const Dataset& d, const RegressionModel& m, const FitConfig& cfg,
                              const AugmentedParam& xi_s, const AugmentedParam& xi_mm, double sigma);

/// mean rho(r(xi) / sigma).
double m_objective(const Dataset& d, const RegressionModel& m, const RhoFunction& rho, const AugmentedParam& xi,
                   double sigma);

}  // namespace robustmm
