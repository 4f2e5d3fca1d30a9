#include "oracles.hpp"

#include "robustmm/population.hpp"

#include <catch_amalgamated.hpp>

using namespace robustmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const RhoFunction kRho0 = RhoFunction::bisquare(kDefaultK0);
const RhoFunction kRho1 = RhoFunction::bisquare(kDefaultK1);

ErrorLaw shifted_exponential() {
  ErrorLaw law;
  law.kind = ErrorLawKind::kShiftedExponential;
  law.lambda = 1.0;
  law.shift = -1.0;
  return law;
}

// E h(u) for the shifted exponential by Simpson on [shift, shift + 60].
double exp_mean(const ErrorLaw& law, const std::function<double(double)>& h) {
  return oracle::simpson([&](double u) { return h(u) * law.lambda * std::exp(-law.lambda * (u - law.shift)); },
                         law.shift, law.shift + 60.0 / law.lambda, 400000);
}

}  // namespace

TEST_CASE("normal errors: targets are the center and unit scale", "[population]") {
  const ErrorLaw law;
  const PopulationTarget t = solve_population(law, kRho0, kRho1, 0.5);
  REQUIRE_THAT(t.alpha00, WithinAbs(0.0, 1e-8));
  REQUIRE_THAT(t.alpha01, WithinAbs(0.0, 1e-8));
  // k0 is rounded to 6 decimals, so sigma0 = 1 only to about 1e-7.
  REQUIRE_THAT(t.sigma0, WithinAbs(1.0, 1e-6));
  const double e_rho = oracle::simpson([&](double z) { return oracle::bisquare_rho(z / t.sigma0, kDefaultK0) *
                                                              oracle::normal_pdf(z); },
                                       -12, 12, 200000);
  REQUIRE_THAT(e_rho, WithinAbs(0.5, 1e-10));
}

TEST_CASE("symmetric contaminated normal keeps the center", "[population]") {
  ErrorLaw law;
  law.kind = ErrorLawKind::kContaminatedNormal;
  law.epsilon = 0.1;
  law.outlier_sd = 5.0;
  const PopulationTarget t = solve_population(law, kRho0, kRho1, 0.5);
  REQUIRE_THAT(t.alpha00, WithinAbs(0.0, 1e-8));
  REQUIRE_THAT(t.alpha01, WithinAbs(0.0, 1e-8));
  REQUIRE(t.sigma0 > 1.0);
}

TEST_CASE("asymmetric errors: population equations hold under an independent quadrature", "[population]") {
  const ErrorLaw law = shifted_exponential();
  const PopulationTarget t = solve_population(law, kRho0, kRho1, 0.5);
  const double s = t.sigma0;
  REQUIRE_THAT(exp_mean(law, [&](double u) { return oracle::bisquare_rho((u - t.alpha00) / s, kDefaultK0); }),
               WithinAbs(0.5, 1e-8));
  REQUIRE_THAT(exp_mean(law, [&](double u) { return kRho0.psi((u - t.alpha00) / s); }), WithinAbs(0.0, 1e-8));
  REQUIRE_THAT(exp_mean(law, [&](double u) { return kRho1.psi((u - t.alpha01) / s); }), WithinAbs(0.0, 1e-8));
  // The S location minimizes S*(a): nearby locations need a larger scale.
  REQUIRE(population_scale(law, kRho0, 0.5, t.alpha00 + 0.05) > s);
  REQUIRE(population_scale(law, kRho0, 0.5, t.alpha00 - 0.05) > s);
  REQUIRE(std::abs(t.alpha00 - t.alpha01) > 1e-3);
}

TEST_CASE("population constants match quadrature at the normal", "[population]") {
  const ErrorLaw law;
  const PopulationTarget t = solve_population(law, kRho0, kRho1, 0.5);
  DesignMoments design{Vector::Zero(2), Matrix::Identity(2, 2)};
  const InferenceConstants c = population_constants(law, kRho0, kRho1, 0.5, t, design);
  auto e = [&](const std::function<double(double)>& h) {
    // Compact integrands: integrate exactly over the support to avoid the kink at k.
    const double b = kDefaultK0 * t.sigma0;
    return oracle::simpson([&](double z) { return h(z / t.sigma0) * oracle::normal_pdf(z); }, -b, b, 200000);
  };
  REQUIRE_THAT(c.a00, WithinAbs(e([&](double v) { return kRho0.psi_prime(v); }), 1e-9));
  REQUIRE_THAT(c.a01, WithinAbs(oracle::simpson([&](double z) { return kRho1.psi_prime(z / t.sigma0) * oracle::normal_pdf(z); },
                                                -kDefaultK1 * t.sigma0, kDefaultK1 * t.sigma0, 200000),
                                1e-9));
  REQUIRE_THAT(c.d0, WithinAbs(e([&](double v) { return v * kRho0.psi(v); }), 1e-9));
  REQUIRE_THAT(c.e00, WithinAbs(0.0, 1e-9));
  REQUIRE_THAT(c.e01, WithinAbs(0.0, 1e-9));

  REQUIRE_THAT(mm_variance_factor(law, kRho1, t), WithinRel(1.0 / 0.95, 1e-5));
  const Matrix v = population_mm_covariance(law, kRho0, kRho1, c, t);
  const Matrix expected = mm_variance_factor(law, kRho1, t) * closed_form_c0_inverse(c);
  REQUIRE((v - expected).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE_THAT(error_variance(law) / mm_variance_factor(law, kRho1, t), WithinAbs(0.95, 1e-5));
}

TEST_CASE("asymmetric MM variance matches the variance of the influence", "[population]") {
  const ErrorLaw law = shifted_exponential();
  const PopulationTarget t = solve_population(law, kRho0, kRho1, 0.5);
  DesignMoments design{Vector(0), Matrix(0, 0)};
  const InferenceConstants c = population_constants(law, kRho0, kRho1, 0.5, t, design);
  const double v = population_mm_covariance(law, kRho0, kRho1, c, t)(0, 0);
  const EquationSpec eq{kRho0, kRho1, 0.5};
  const double mean_if = exp_mean(law, [&](double u) { return influence_location(eq, u, c); });
  const double second = exp_mean(law, [&](double u) {
    const double i = influence_location(eq, u, c);
    return i * i;
  });
  REQUIRE_THAT(mean_if, WithinAbs(0.0, 1e-8));
  REQUIRE_THAT(v, WithinRel(second, 1e-6));
  // The scale correction matters here: the symmetric formula is off.
  REQUIRE(std::abs(v - mm_variance_factor(law, kRho1, t)) > 1e-3 * v);
}

TEST_CASE("error laws", "[population]") {
  ErrorLaw bimodal;
  bimodal.kind = ErrorLawKind::kBimodal;
  bimodal.separation = 2.0;
  REQUIRE(ErrorLaw{}.unimodal());
  REQUIRE(shifted_exponential().unimodal());
  REQUIRE_FALSE(bimodal.unimodal());
  REQUIRE_FALSE(shifted_exponential().symmetric());

  for (const ErrorLaw& law : {ErrorLaw{}, shifted_exponential(), bimodal}) {
    const double mass = integrate_against(law, [](double) { return 1.0; }, -40, 40);
    REQUIRE_THAT(mass, WithinAbs(1.0, 1e-10));
    for (double u : {-3.0, -0.5, 0.0, 1.7}) REQUIRE_THAT(law.cdf(u) + law.survival(u), WithinAbs(1.0, 1e-15));
    CounterRng rng(17);
    double sum = 0;
    double sq = 0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
      const double u = law.sample(rng);
      sum += u;
      sq += u * u;
    }
    const double mean = integrate_against(law, [](double u) { return u; }, -40, 40);
    REQUIRE_THAT(sum / m, WithinAbs(mean, 0.02));
    REQUIRE_THAT(sq / m - (sum / m) * (sum / m), WithinRel(error_variance(law), 0.02));
  }
  REQUIRE(ErrorLaw::parse_kind("shifted-exponential") == ErrorLawKind::kShiftedExponential);
  REQUIRE_THROWS_AS(ErrorLaw::parse_kind("cauchy"), ArgumentError);
  ErrorLaw bad;
  bad.sigma = 0;
  REQUIRE_THROWS_AS(bad.validate(), ArgumentError);
}
