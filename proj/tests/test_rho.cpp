#include "oracles.hpp"

#include "robustmm/rho.hpp"

#include <catch_amalgamated.hpp>

#include <vector>

using namespace robustmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("bisquare matches the closed form", "[rho]") {
  for (double k : {1.547, 4.685}) {
    const RhoFunction f = RhoFunction::bisquare(k);
    for (double t = -2 * k; t <= 2 * k; t += k / 37) {
      REQUIRE_THAT(f.rho(t), WithinAbs(oracle::bisquare_rho(t, k), 1e-15));
    }
    REQUIRE(f.rho(0.0) == 0.0);
    REQUIRE(f.rho(k) == 1.0);
    REQUIRE(f.rho(-3 * k) == 1.0);
    REQUIRE(f.psi(k * 1.5) == 0.0);
    REQUIRE(f.psi_prime(-k * 1.5) == 0.0);
  }
}

TEST_CASE("psi and psi' agree with finite differences", "[rho]") {
  for (double k : {1.547, 4.685}) {
    const RhoFunction f = RhoFunction::bisquare(k);
    const int m = 10000;
    for (int j = 0; j < m; ++j) {
      const double t = -1.5 * k + 3.0 * k * (j + 0.5) / m;
      const double h = 1e-5;
      const double fd_psi = oracle::central_diff([&](double x) { return oracle::bisquare_rho(x, k); }, t, h);
      const double fd_psi_prime = oracle::central_diff([&](double x) { return f.psi(x); }, t, h);
      REQUIRE_THAT(f.psi(t), WithinAbs(fd_psi, 1e-7));
      REQUIRE_THAT(f.psi_prime(t), WithinAbs(fd_psi_prime, 1e-6));
      if (t != 0.0) REQUIRE_THAT(f.weight(t), WithinAbs(f.psi(t) / t, 1e-12));
    }
    REQUIRE_THAT(f.weight(0.0), WithinAbs(f.psi_prime(0.0), 1e-15));
  }
}

TEST_CASE("default tuning constants solve their defining equations", "[rho]") {
  // k0: E_Phi rho_k(Z) = 1/2.
  const double k0 = kDefaultK0;
  const double e_rho = oracle::simpson([&](double z) { return oracle::bisquare_rho(z, k0) * oracle::normal_pdf(z); },
                                       -k0, k0) +
                       2 * oracle::normal_cdf(-k0);
  REQUIRE_THAT(e_rho, WithinAbs(0.5, 1e-6));

  // k1: normal efficiency (E psi')^2 / E psi^2 = 0.95.
  const RhoFunction f = RhoFunction::bisquare(kDefaultK1);
  const double k1 = kDefaultK1;
  const double e_dpsi = oracle::simpson([&](double z) { return f.psi_prime(z) * oracle::normal_pdf(z); }, -k1, k1);
  const double e_psi2 = oracle::simpson([&](double z) { return f.psi(z) * f.psi(z) * oracle::normal_pdf(z); }, -k1, k1);
  REQUIRE_THAT(e_dpsi * e_dpsi / e_psi2, WithinAbs(0.95, 1e-6));
}

TEST_CASE("R1 holds for the bisquare family", "[rho][r1]") {
  for (double k : {0.5, 1.547, 1.547645, 4.685, 10.0}) {
    const R1Report r = check_r1(RhoFunction::bisquare(k), 10000);
    INFO("k = " << k);
    REQUIRE(r.holds);
    REQUIRE(r.below_one_inside);
    REQUIRE(r.max_outside_deviation == 0.0);
    REQUIRE(r.max_second_difference <= 0.0);
  }
}

TEST_CASE("R1 rejects rho-functions that break it", "[rho][r1]") {
  const double k = 2.0;
  SECTION("log(1 - rho) not concave") {
    const auto rho = [k](double t) {
      const double u = t / k;
      if (std::abs(u) >= 1) return 1.0;
      const double v = 1 - u * u;
      const double s = std::sin(5 * std::numbers::pi * u);
      return 1 - v * v * v * (1 - 0.3 * s * s);
    };
    const RhoFunction f = RhoFunction::custom("wiggly", k, rho, [](double) { return 0.0; }, [](double) { return 0.0; });
    REQUIRE_FALSE(verify_r1(f, 2000));
  }
  SECTION("not saturated outside [-k, k]") {
    const auto rho = [k](double t) { return std::abs(t) >= k ? 0.99 : oracle::bisquare_rho(t, k) * 0.99; };
    const RhoFunction f = RhoFunction::custom("short", k, rho, [](double) { return 0.0; }, [](double) { return 0.0; });
    const R1Report r = check_r1(f, 2000);
    REQUIRE_FALSE(r.holds);
    REQUIRE(r.max_outside_deviation > 1e-3);
  }
  SECTION("reaches 1 before k") {
    const auto rho = [k](double t) { return oracle::bisquare_rho(t, 0.5 * k); };
    const RhoFunction f = RhoFunction::custom("early", k, rho, [](double) { return 0.0; }, [](double) { return 0.0; });
    const R1Report r = check_r1(f, 2000);
    REQUIRE_FALSE(r.holds);
    REQUIRE_FALSE(r.below_one_inside);
  }
}

TEST_CASE("tabulated rho", "[rho][r1]") {
  const double k = 1.547;
  std::vector<double> t;
  std::vector<double> rho;
  for (int j = 0; j <= 400; ++j) {
    t.push_back(2 * k * j / 400.0);
    rho.push_back(oracle::bisquare_rho(t.back(), k));
  }
  REQUIRE(check_r1_table(t, rho).holds);

  SECTION("a bumped value breaks concavity") {
    rho[100] += 0.02;
    REQUIRE_FALSE(check_r1_table(t, rho).holds);
  }
  SECTION("decreasing entries are rejected") {
    std::swap(rho[50], rho[60]);
    REQUIRE_FALSE(check_r1_table(t, rho).holds);
  }
  SECTION("no saturated node") {
    t.resize(100);
    rho.resize(100);
    REQUIRE_FALSE(check_r1_table(t, rho).holds);
  }
  SECTION("unsorted abscissae throw") {
    std::swap(t[3], t[4]);
    REQUIRE_THROWS_AS(check_r1_table(t, rho), ArgumentError);
  }
}

TEST_CASE("majorization and argument checks", "[rho]") {
  const RhoFunction r0 = RhoFunction::bisquare(kDefaultK0);
  const RhoFunction r1 = RhoFunction::bisquare(kDefaultK1);
  REQUIRE(is_majorized(r1, r0));
  REQUIRE_FALSE(is_majorized(r0, r1));
  REQUIRE_THROWS_AS(RhoFunction::bisquare(0.0), ArgumentError);
  REQUIRE_THROWS_AS(RhoFunction::bisquare(-1.0), ArgumentError);
  REQUIRE_THROWS_AS(RhoFunction::from_name("huber", 1.0), ArgumentError);
  REQUIRE_THROWS_AS(r0.rho(std::nan("")), DomainError);
  REQUIRE_THROWS_AS(r0.psi(INFINITY), DomainError);
  REQUIRE_THROWS_AS(check_r1(r0, 2), ArgumentError);
  REQUIRE_THAT(RhoFunction::from_name("bisquare", 3.0).k(), WithinRel(3.0, 1e-15));
}
