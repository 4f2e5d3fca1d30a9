#include "robustmm/population.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace robustmm {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double spread(const ErrorLaw& law) {
  switch (law.kind) {
    case ErrorLawKind::kShiftedExponential:
      return 1.0 / law.lambda;
    case ErrorLawKind::kContaminatedNormal:
      return std::max(law.sigma, law.outlier_sd);
    case ErrorLawKind::kBimodal:
      return law.sigma + law.separation;
    case ErrorLawKind::kNormal:
      break;
  }
  return law.sigma;
}

// Root of a monotone-in-sign function on [lo, hi] with f(lo) and f(hi) of
// opposite signs, to ~1e-15 relative.
template <class F>
double bracketed_root(F f, double lo, double hi) {
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  std::uintmax_t max_iter = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi,
                                                  boost::math::tools::eps_tolerance<double>(50), max_iter);
  if (max_iter >= 200) throw ConvergenceError("population root solve did not converge");
  return 0.5 * (a + b);
}

}  // namespace

ErrorLawKind ErrorLaw::parse_kind(const std::string& name) {
  if (name == "normal") return ErrorLawKind::kNormal;
  if (name == "shifted-exponential") return ErrorLawKind::kShiftedExponential;
  if (name == "contaminated-normal") return ErrorLawKind::kContaminatedNormal;
  if (name == "bimodal") return ErrorLawKind::kBimodal;
  throw ArgumentError("unknown error law '" + name + "'");
}

std::string ErrorLaw::kind_name() const {
  switch (kind) {
    case ErrorLawKind::kNormal:
      return "normal";
    case ErrorLawKind::kShiftedExponential:
      return "shifted-exponential";
    case ErrorLawKind::kContaminatedNormal:
      return "contaminated-normal";
    case ErrorLawKind::kBimodal:
      return "bimodal";
  }
  return "unknown";
}

void ErrorLaw::validate() const {
  if (!(sigma > 0.0)) throw ArgumentError("error law: sigma must be positive");
  if (!(lambda > 0.0)) throw ArgumentError("error law: lambda must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("error law: epsilon must lie in [0, 1)");
  if (!(outlier_sd > 0.0)) throw ArgumentError("error law: outlier_sd must be positive");
}

double ErrorLaw::sample(CounterRng& rng) const {
  switch (kind) {
    case ErrorLawKind::kNormal:
      return sigma * rng.normal();
    case ErrorLawKind::kShiftedExponential:
      return shift + rng.exponential(lambda);
    case ErrorLawKind::kContaminatedNormal: {
      const bool outlier = rng.uniform() < epsilon;
      const double z = rng.normal();
      return outlier ? outlier_mean + outlier_sd * z : sigma * z;
    }
    case ErrorLawKind::kBimodal: {
      const double side = rng.uniform() < 0.5 ? -separation : separation;
      return side + sigma * rng.normal();
    }
  }
  return 0.0;
}

double ErrorLaw::density(double u) const {
  switch (kind) {
    case ErrorLawKind::kNormal:
      return normal_pdf(u / sigma) / sigma;
    case ErrorLawKind::kShiftedExponential:
      return u < shift ? 0.0 : lambda * std::exp(-lambda * (u - shift));
    case ErrorLawKind::kContaminatedNormal:
      return (1.0 - epsilon) * normal_pdf(u / sigma) / sigma +
             epsilon * normal_pdf((u - outlier_mean) / outlier_sd) / outlier_sd;
    case ErrorLawKind::kBimodal:
      return 0.5 * (normal_pdf((u + separation) / sigma) + normal_pdf((u - separation) / sigma)) / sigma;
  }
  return 0.0;
}

double ErrorLaw::cdf(double u) const {
  switch (kind) {
    case ErrorLawKind::kNormal:
      return normal_cdf(u / sigma);
    case ErrorLawKind::kShiftedExponential:
      return u < shift ? 0.0 : -std::expm1(-lambda * (u - shift));
    case ErrorLawKind::kContaminatedNormal:
      return (1.0 - epsilon) * normal_cdf(u / sigma) + epsilon * normal_cdf((u - outlier_mean) / outlier_sd);
    case ErrorLawKind::kBimodal:
      return 0.5 * (normal_cdf((u + separation) / sigma) + normal_cdf((u - separation) / sigma));
  }
  return 0.0;
}

double ErrorLaw::survival(double u) const {
  switch (kind) {
    case ErrorLawKind::kNormal:
      return normal_cdf(-u / sigma);
    case ErrorLawKind::kShiftedExponential:
      return u < shift ? 1.0 : std::exp(-lambda * (u - shift));
    case ErrorLawKind::kContaminatedNormal:
      return (1.0 - epsilon) * normal_cdf(-u / sigma) + epsilon * normal_cdf(-(u - outlier_mean) / outlier_sd);
    case ErrorLawKind::kBimodal:
      return 0.5 * (normal_cdf(-(u + separation) / sigma) + normal_cdf(-(u - separation) / sigma));
  }
  return 0.0;
}

bool ErrorLaw::symmetric() const {
  switch (kind) {
    case ErrorLawKind::kNormal:
    case ErrorLawKind::kBimodal:
      return true;
    case ErrorLawKind::kContaminatedNormal:
      return outlier_mean == 0.0 || epsilon == 0.0;
    case ErrorLawKind::kShiftedExponential:
      return false;
  }
  return false;
}

double ErrorLaw::center() const {
  if (kind == ErrorLawKind::kShiftedExponential) return shift + std::numbers::ln2 / lambda;
  if (kind == ErrorLawKind::kContaminatedNormal && !symmetric()) {
    return bracketed_root([this](double u) { return cdf(u) - 0.5; }, -50.0 * spread(*this) + outlier_mean,
                          50.0 * spread(*this) + std::abs(outlier_mean));
  }
  return 0.0;
}

std::vector<double> ErrorLaw::kinks() const {
  if (kind == ErrorLawKind::kShiftedExponential) return {shift};
  return {};
}

bool ErrorLaw::unimodal() const {
  const double c = kind == ErrorLawKind::kShiftedExponential ? shift : center();
  const double w = 12.0 * spread(*this) + std::abs(outlier_mean);
  constexpr int kGrid = 8001;
  int direction = 0;  // +1 rising, -1 falling
  int turns = 0;
  double prev = density(c - w);
  for (int j = 1; j < kGrid; ++j) {
    const double u = c - w + 2.0 * w * j / (kGrid - 1);
    const double cur = density(u);
    const double diff = cur - prev;
    prev = cur;
    if (std::abs(diff) <= 1e-14 * std::max(cur, 1e-300)) continue;
    const int d = diff > 0.0 ? 1 : -1;
    if (direction == -1 && d == 1) ++turns;  // a valley
    direction = d;
  }
  return turns == 0;
}

double integrate_against(const ErrorLaw& law, const std::function<double(double)>& h, double a, double b) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a};
  for (double k : law.kinks()) {
    if (k > a && k < b) cuts.push_back(k);
  }
  cuts.push_back(b);
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double lo = cuts[j];
    const double hi = cuts[j + 1];
    if (law.kind == ErrorLawKind::kShiftedExponential && hi <= law.shift) continue;
    total += Quad::integrate([&](double u) { return h(u) * law.density(u); }, lo, hi, 20, 1e-14);
  }
  return total;
}

double expected_compact(const ErrorLaw& law, const std::function<double(double)>& h, double k, double t, double s) {
  return integrate_against(law, [&](double u) { return h((u - t) / s); }, t - k * s, t + k * s);
}

double expected_rho(const ErrorLaw& law, const RhoFunction& rho, double t, double s) {
  const double k = rho.k();
  const double tails = law.cdf(t - k * s) + law.survival(t + k * s);
  return tails + expected_compact(law, [&](double v) { return rho.rho(v); }, k, t, s);
}

double population_scale(const ErrorLaw& law, const RhoFunction& rho0, double delta, double alpha) {
  auto f = [&](double s) { return expected_rho(law, rho0, alpha, s) - delta; };
  double lo = spread(law);
  double hi = lo;
  for (int j = 0; f(lo) < 0.0; ++j) {
    lo *= 0.5;
    if (j > 200) throw ConvergenceError("population scale: no lower bracket");
  }
  for (int j = 0; f(hi) > 0.0; ++j) {
    hi *= 2.0;
    if (j > 200) throw ConvergenceError("population scale: no upper bracket");
  }
  return bracketed_root(f, lo, hi);
}

PopulationTarget solve_population(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                  double delta) {
  law.validate();
  PopulationTarget target;

  // Stationarity of S*(a): E psi0((u - a) / S*(a)) = 0, positive left of the minimum.
  auto s_score = [&](double a) {
    const double s = population_scale(law, rho0, delta, a);
    return expected_compact(law, [&](double v) { return rho0.psi(v); }, rho0.k(), a, s);
  };
  const double c = law.center();
  const double w = spread(law);
  double step = 0.25 * w;
  double lo = c - step;
  double hi = c + step;
  for (int j = 0; s_score(lo) <= 0.0; ++j, step *= 2.0) {
    lo = c - step;
    if (j > 60) throw ConvergenceError("population S location: no lower bracket");
  }
  step = 0.25 * w;
  for (int j = 0; s_score(hi) >= 0.0; ++j, step *= 2.0) {
    hi = c + step;
    if (j > 60) throw ConvergenceError("population S location: no upper bracket");
  }
  target.alpha00 = bracketed_root(s_score, lo, hi);
  target.sigma0 = population_scale(law, rho0, delta, target.alpha00);

  auto mm_score = [&](double t) {
    return expected_compact(law, [&](double v) { return rho1.psi(v); }, rho1.k(), t, target.sigma0);
  };
  step = 0.05 * target.sigma0;
  lo = target.alpha00;
  hi = target.alpha00;
  for (int j = 0; mm_score(lo) <= 0.0; ++j, step *= 1.5) {
    lo = target.alpha00 - step;
    if (j > 60) throw ConvergenceError("population MM location: no lower bracket");
  }
  step = 0.05 * target.sigma0;
  for (int j = 0; mm_score(hi) >= 0.0; ++j, step *= 1.5) {
    hi = target.alpha00 + step;
    if (j > 60) throw ConvergenceError("population MM location: no upper bracket");
  }
  target.alpha01 = bracketed_root(mm_score, lo, hi);
  return target;
}

InferenceConstants population_constants(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                        double delta, const PopulationTarget& target, const DesignMoments& design,
                                        double alpha_shift) {
  const double s = target.sigma0;
  InferenceConstants c;
  c.a00 = expected_compact(law, [&](double v) { return rho0.psi_prime(v); }, rho0.k(), target.alpha00, s);
  c.a01 = expected_compact(law, [&](double v) { return rho1.psi_prime(v); }, rho1.k(), target.alpha01, s);
  c.e00 = expected_compact(law, [&](double v) { return v * rho0.psi_prime(v); }, rho0.k(), target.alpha00, s);
  c.e01 = expected_compact(law, [&](double v) { return v * rho1.psi_prime(v); }, rho1.k(), target.alpha01, s);
  c.d0 = expected_compact(law, [&](double v) { return v * rho0.psi(v); }, rho0.k(), target.alpha00, s);
  c.b0 = design.b0;
  c.A0 = design.A0;
  c.C0 = assemble_c0(c.b0, c.A0);
  c.sigma0 = s;
  c.alpha00 = target.alpha00 + alpha_shift;
  c.alpha01 = target.alpha01 + alpha_shift;
  c.delta = delta;
  return c;
}

double mm_variance_factor(const ErrorLaw& law, const RhoFunction& rho1, const PopulationTarget& target) {
  const double s = target.sigma0;
  const double psi_sq =
      expected_compact(law, [&](double v) { return rho1.psi(v) * rho1.psi(v); }, rho1.k(), target.alpha01, s);
  const double slope = expected_compact(law, [&](double v) { return rho1.psi_prime(v); }, rho1.k(), target.alpha01, s);
  return s * s * psi_sq / (slope * slope);
}

Matrix population_mm_covariance(const ErrorLaw& law, const RhoFunction& rho0, const RhoFunction& rho1,
                                const InferenceConstants& c, const PopulationTarget& target) {
  const double s = target.sigma0;
  const double delta = c.delta;
  const double psi_sq =
      expected_compact(law, [&](double v) { return rho1.psi(v) * rho1.psi(v); }, rho1.k(), target.alpha01, s);
  // E psi1(t_MM) (rho0(t_S) - delta); psi1 confines the integral to its window.
  const double cross = integrate_against(
      law,
      [&](double u) { return rho1.psi((u - target.alpha01) / s) * (rho0.rho((u - target.alpha00) / s) - delta); },
      target.alpha01 - rho1.k() * s, target.alpha01 + rho1.k() * s);
  // E (rho0(t_S) - delta)^2 = E rho0^2 - delta^2 because E rho0(t_S) = delta.
  const double k0 = rho0.k();
  const double rho_sq = law.cdf(target.alpha00 - k0 * s) + law.survival(target.alpha00 + k0 * s) +
                        expected_compact(law, [&](double v) { return rho0.rho(v) * rho0.rho(v); }, k0,
                                         target.alpha00, s);
  const double scale_var = rho_sq - delta * delta;

  const double c1 = c.sigma0 / c.a01;
  const double c2 = c.sigma0 * c.e01 / (c.a01 * c.d0);
  Matrix v = c1 * c1 * psi_sq * closed_form_c0_inverse(c);
  const int q = c.q();
  v(q, q) += -2.0 * c1 * c2 * cross + c2 * c2 * scale_var;
  return v;
}

double error_variance(const ErrorLaw& law) {
  switch (law.kind) {
    case ErrorLawKind::kNormal:
      return law.sigma * law.sigma;
    case ErrorLawKind::kShiftedExponential:
      return 1.0 / (law.lambda * law.lambda);
    case ErrorLawKind::kContaminatedNormal: {
      const double m = law.epsilon * law.outlier_mean;
      return (1.0 - law.epsilon) * law.sigma * law.sigma +
             law.epsilon * (law.outlier_sd * law.outlier_sd + law.outlier_mean * law.outlier_mean) - m * m;
    }
    case ErrorLawKind::kBimodal:
      return law.sigma * law.sigma + law.separation * law.separation;
  }
  return 0.0;
}

}  // namespace robustmm
