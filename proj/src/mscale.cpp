#include "robustmm/mscale.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace robustmm {

void MScaleConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("M-scale delta must lie in (0, 1)");
  if (!(tol > 0.0)) throw ArgumentError("M-scale tolerance must be positive");
  if (max_iter < 1) throw ArgumentError("M-scale max_iter must be positive");
}

namespace {

struct ObjectiveValue {
  double value;  // mean rho(r/sigma)
  double slope;  // d/dsigma of value
};

ObjectiveValue evaluate(std::span<const double> r, const RhoFunction& rho0, double sigma) {
  double sum = 0.0;
  double sum_psi_t = 0.0;
  for (double ri : r) {
    if (ri == 0.0) continue;
    const double t = ri / sigma;
    sum += rho0.rho(t);
    sum_psi_t += rho0.psi(t) * t;
  }
  const double n = static_cast<double>(r.size());
  return {sum / n, -sum_psi_t / (n * sigma)};
}

}  // namespace

double mscale_objective(std::span<const double> residuals, const RhoFunction& rho0, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("mscale_objective requires sigma > 0");
  if (residuals.empty()) throw ArgumentError("mscale_objective requires a nonempty residual vector");
  double sum = 0.0;
  for (double ri : residuals) {
    if (ri != 0.0) sum += rho0.rho(ri / sigma);
  }
  return sum / static_cast<double>(residuals.size());
}

MScaleResult solve_mscale(std::span<const double> residuals, const RhoFunction& rho0, const MScaleConfig& cfg,
                          double hint) {
  cfg.validate();
  if (residuals.empty()) throw ArgumentError("M-scale of an empty residual vector");

  const std::size_t n = residuals.size();
  std::size_t zeros = 0;
  double max_abs = 0.0;
  std::vector<double> abs_nonzero;
  abs_nonzero.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = residuals[i];
    if (!std::isfinite(ri)) throw DomainError("non-finite residual at index " + std::to_string(i));
    if (ri == 0.0) {
      ++zeros;
    } else {
      abs_nonzero.push_back(std::abs(ri));
      max_abs = std::max(max_abs, std::abs(ri));
    }
  }

  MScaleResult result;
  // No positive root once the zeros alone saturate 1 - delta.
  if (static_cast<double>(zeros) >= (1.0 - cfg.delta) * static_cast<double>(n) * (1.0 - 1e-12)) {
    result.degenerate = true;
    return result;
  }

  const double delta = cfg.delta;
  const double k = rho0.k();
  auto f = [&](double s) { return evaluate(residuals, rho0, s); };

  double lo;
  double hi;
  if (hint > 0.0 && std::isfinite(hint)) {
    lo = hint / 1.25;
    hi = hint * 1.25;
  } else {
    const auto mid = abs_nonzero.begin() + static_cast<std::ptrdiff_t>(abs_nonzero.size() / 2);
    std::nth_element(abs_nonzero.begin(), mid, abs_nonzero.end());
    lo = *mid / k;
    hi = max_abs * k * 10.0;
  }

  int iterations = 0;
  ObjectiveValue f_lo = f(lo);
  while (f_lo.value < delta) {
    lo *= 0.5;
    f_lo = f(lo);
    if (++iterations > cfg.max_iter) throw MScaleConvergenceError("M-scale: could not bracket root from below", lo, hi);
  }
  ObjectiveValue f_hi = f(hi);
  while (f_hi.value > delta) {
    hi *= 2.0;
    f_hi = f(hi);
    if (++iterations > cfg.max_iter) throw MScaleConvergenceError("M-scale: could not bracket root from above", lo, hi);
  }

  // Safeguarded Newton inside [lo, hi].
  double x = (hint > lo && hint < hi) ? hint : 0.5 * (lo + hi);
  ObjectiveValue fx = f(x);
  double prev_step = hi - lo;
  for (;;) {
    const double g = fx.value - delta;
    if (g == 0.0) {
      lo = hi = x;
      break;
    }
    if (g > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= cfg.tol * lo) break;

    double next = x;
    bool newton_ok = false;
    if (fx.slope < 0.0) {
      next = x - g / fx.slope;
      newton_ok = next > lo && next < hi && std::abs(next - x) < 0.5 * prev_step;
    }
    if (!newton_ok) next = 0.5 * (lo + hi);
    prev_step = std::abs(next - x);
    x = next;
    fx = f(x);
    if (++iterations > cfg.max_iter) throw MScaleConvergenceError("M-scale: iteration cap reached", lo, hi);
    if (newton_ok && prev_step <= cfg.tol * x) {
      // Newton converged; tighten the bracket side on the final evaluation.
      if (fx.value - delta >= 0.0) {
        lo = x;
      } else {
        hi = x;
      }
      break;
    }
  }

  result.sigma = x;
  result.lower = std::min(lo, x);
  result.upper = std::max(hi, x);
  result.iterations = iterations;
  return result;
}

}  // namespace robustmm
