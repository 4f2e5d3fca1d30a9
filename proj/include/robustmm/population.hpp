#pragma once

#include "robustmm/inference.hpp"
#include "robustmm/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace robustmm {

enum class ErrorLawKind { kNormal, kShiftedExponential, kContaminatedNormal, kBimodal };

/// Error distribution F0 for simulated data.
struct ErrorLaw {
  ErrorLawKind kind = ErrorLawKind::kNormal;
  double sigma = 1.0;        // normal / contaminated / bimodal component sd
  double lambda = 1.0;       // shifted-exponential rate
  double shift = 0.0;        // shifted-exponential left end point
  double epsilon = 0.0;      // contaminated-normal mixing weight
  double outlier_mean = 0.0; // contaminated-normal outlier component
  double outlier_sd = 1.0;
  double separation = 2.0;   // bimodal: components at +-separation

  static ErrorLawKind parse_kind(const std::string& name);
  std::string kind_name() const;

  double sample(CounterRng& rng) const;
  double density(double u) const;
  double cdf(double u) const;
  double survival(double u) const;  // 1 - cdf, computed without cancellation
  bool symmetric() const;
  double center() const;  // center of symmetry, or median as a starting point
  /// Points where the density is not smooth (support ends).
  std::vector<double> kinks() const;
  /// Numerical unimodality check of the density on a wide grid.
  bool unimodal() const;
  void validate() const;
};

/// Integral of h(u) f(u) over [a, b] by adaptive Gauss-Kronrod, split at the
/// law's kinks.
double integrate_against(const ErrorLaw& law, const std::function<double(double)>& h, double a, double b);

/// E rho((u - t) / s) under F0.
double expected_rho(const ErrorLaw& law, const RhoFunction& rho, double t, double s);
/// E h((u - t) / s) for an h that vanishes outside [-k, k].
double expected_compact(const ErrorLaw& law, const std::function<double(double)>& h, double k, double t, double s);

/// Population location/scale targets of the S and MM functionals under F0.
struct PopulationTarget {
  double sigma0 = 0.0;   // S(G0)
  double alpha00 = 0.0;  // argmin_t E rho0((u - t) / sigma0)
  double alpha01 = 0.0;  // argmin_t E rho1((u - t) / sigma0)
};

/// S*(alpha): the sigma solving E rho0((u - alpha) / sigma) = delta.
double population_scale(const ErrorLaw& law, const RhoFunction& rho0, double delta, double alpha);

/// Solves the population equations to 1e-10: the S location is the root of
/// E psi0((u - a) / S*(a)), sigma0 = S*(alpha00), and alpha01 the root of
/// E psi1((u - t) / sigma0) closest to alpha00.
PopulationTarget solve_population(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                  double delta);

/// Design moments b0 = E g'(x, beta0) and A0 = Cov g'(x, beta0).
struct DesignMoments {
  Vector b0;
  Matrix A0;
};

/// a0i, e0i, d0 at the population targets, combined with design moments.
/// alpha_shift is added to alpha00/alpha01 (a true intercept in the data).
InferenceConstants population_constants(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                        double delta, const PopulationTarget& target, const DesignMoments& design,
                                        double alpha_shift = 0.0);

/// sigma0^2 E psi1(t)^2 / (E psi1'(t))^2 with t = (u - alpha01) / sigma0.
double mm_variance_factor(const ErrorLaw& law, const RhoFunction& rho1, const PopulationTarget& target);

/// E I_MM I_MM' at the true law: c1^2 E psi1^2 C0^{-1} plus the alpha-alpha
/// correction from the scale equation (zero for symmetric errors), where
/// c1 = sigma0 / a01.
Matrix population_mm_covariance(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                const InferenceConstants& constants, const PopulationTarget& target);

/// Variance of the errors (the LS variance factor).
double error_variance(const ErrorLaw& law);

}  // namespace robustmm
