#pragma once

#include "robustmm/rho.hpp"

#include <span>

namespace robustmm {

struct MScaleConfig {
  double delta = kDefaultDelta;  // in (0, 1)
  double tol = 1e-14;            // relative tolerance on sigma
  int max_iter = 200;

  void validate() const;
};

struct MScaleResult {
  double sigma = 0.0;
  // Final bracket: objective(lower) >= delta >= objective(upper). Both are 0
  // when the degenerate exact-fit rule fired.
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  bool degenerate = false;
};

class MScaleConvergenceError : public ConvergenceError {
 public:
  MScaleConvergenceError(const std::string& what, double lower, double upper)
      : ConvergenceError(what), lower(lower), upper(upper) {}
  double lower;
  double upper;
};

/// Mean of rho0(r_i / sigma). Zero residuals contribute exactly 0.
double mscale_objective(std::span<const double> residuals, const RhoFunction& rho0, double sigma);

/// Solves mean rho0(r_i / sigma) = delta for sigma.
///
/// Returns 0 (degenerate = true) when the fraction of exact zeros is at least
/// 1 - delta, since then no positive root exists. Otherwise the root is
/// bracketed and refined by Newton steps that fall back to bisection whenever
/// they leave the bracket or stall. `hint` (if positive) seeds the bracket.
MScaleResult solve_mscale(std::span<const double> residuals, const RhoFunction& rho0, const MScaleConfig& cfg,
                          double hint = 0.0);

inline double mscale(std::span<const double> residuals, const RhoFunction& rho0, const MScaleConfig& cfg) {
  return solve_mscale(residuals, rho0, cfg).sigma;
}

inline double mscale(const Vector& residuals, const RhoFunction& rho0, const MScaleConfig& cfg) {
  return solve_mscale(std::span<const double>(residuals.data(), residuals.size()), rho0, cfg).sigma;
}

}  // namespace robustmm
