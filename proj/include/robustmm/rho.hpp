#pragma once

#include "robustmm/common.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace robustmm {

// Tuning constants for the bisquare family.
// kDefaultK0 solves E_Phi rho_k(Z) = 0.5, i.e. a consistent M-scale at the
// normal with delta = 0.5. kDefaultK1 gives 95% normal efficiency for the MM step.
inline constexpr double kDefaultK0 = 1.547645;
inline constexpr double kDefaultK1 = 4.685065;
inline constexpr double kDefaultDelta = 0.5;

enum class RhoFamily { kBisquare, kCustom };

/// A bounded rho-function with its first two derivatives.
///
/// rho is even, rho(0) = 0, rho(t) = 1 for |t| >= k, and is nondecreasing in
/// |t|. The bisquare family is built in; other families can be supplied as a
/// (rho, psi, psi') triple and should pass verify_r1 before they are used in
/// estimation.
class RhoFunction {
 public:
  using Scalar = std::function<double(double)>;

  static RhoFunction bisquare(double k);
  static RhoFunction custom(std::string name, double k, Scalar rho, Scalar psi, Scalar psi_prime);
  static RhoFunction from_name(const std::string& family, double k);

  double rho(double t) const {
    check_finite(t);
    if (family_ == RhoFamily::kBisquare) {
      const double u = t / k_;
      if (std::abs(u) >= 1.0) return 1.0;
      const double v = 1.0 - u * u;
      return 1.0 - v * v * v;
    }
    return custom_->rho(t);
  }

  double psi(double t) const {
    check_finite(t);
    if (family_ == RhoFamily::kBisquare) {
      const double u = t / k_;
      if (std::abs(u) >= 1.0) return 0.0;
      const double v = 1.0 - u * u;
      return 6.0 * t / (k_ * k_) * v * v;
    }
    return custom_->psi(t);
  }

  double psi_prime(double t) const {
    check_finite(t);
    if (family_ == RhoFamily::kBisquare) {
      const double u = t / k_;
      if (std::abs(u) >= 1.0) return 0.0;
      const double u2 = u * u;
      return 6.0 / (k_ * k_) * (1.0 - u2) * (1.0 - 5.0 * u2);
    }
    return custom_->psi_prime(t);
  }

  // IRWLS weight psi(t)/t, with the removable singularity at 0 filled by psi'(0).
  double weight(double t) const {
    check_finite(t);
    if (family_ == RhoFamily::kBisquare) {
      const double u = t / k_;
      if (std::abs(u) >= 1.0) return 0.0;
      const double v = 1.0 - u * u;
      return 6.0 / (k_ * k_) * v * v;
    }
    if (t == 0.0) return custom_->psi_prime(0.0);
    return custom_->psi(t) / t;
  }

  double k() const { return k_; }
  RhoFamily family() const { return family_; }
  const std::string& name() const { return name_; }

 private:
  struct Callables {
    Scalar rho;
    Scalar psi;
    Scalar psi_prime;
  };

  RhoFunction(RhoFamily family, std::string name, double k, std::shared_ptr<const Callables> custom)
      : family_(family), name_(std::move(name)), k_(k), custom_(std::move(custom)) {}

  static void check_finite(double t) {
    if (!std::isfinite(t)) throw DomainError("rho-function evaluated at a non-finite argument");
  }

  RhoFamily family_;
  std::string name_;
  double k_;
  std::shared_ptr<const Callables> custom_;
};

// Summary of the numerical check of condition R1 on a grid.
struct R1Report {
  bool holds = false;
  bool below_one_inside = true;          // rho < 1 on the sampled interior
  double max_second_difference = 0.0;    // of log(1 - rho) on (-k, k)
  double max_outside_deviation = 0.0;    // max |rho(t) - 1| for sampled |t| >= k
  int grid_size = 0;
};

/// Checks R1 numerically: rho(t) = 1 iff |t| >= k and log(1 - rho) is concave
/// on (-k, k). Concavity is tested by second differences on an even grid of
/// grid_size interior points (tolerance 1e-12); the saturated region is
/// sampled on [k, 3k] and must equal 1 to 1e-15.
R1Report check_r1(const RhoFunction& f, int grid_size);
bool verify_r1(const RhoFunction& f, int grid_size);

/// R1 check for a tabulated rho given at nodes t >= 0 (mirrored to t < 0).
/// k is the first node where rho reaches 1. The table must start at t = 0 with
/// rho = 0, be nondecreasing, stay at 1 after k, and log(1 - rho) must have
/// nonincreasing slopes between consecutive nodes inside (-k, k).
R1Report check_r1_table(const std::vector<double>& t, const std::vector<double>& rho);

// rho1 <= rho0 pointwise on a grid over [0, 2 * max(k0, k1)].
bool is_majorized(const RhoFunction& rho1, const RhoFunction& rho0, int grid_size = 2001);

}  // namespace robustmm
