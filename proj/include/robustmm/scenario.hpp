#pragma once

#include "robustmm/estimators.hpp"
#include "robustmm/population.hpp"

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace robustmm {

/// Malformed scenario; `key` is the schema path of the offending entry.
class ScenarioError : public InputError {
 public:
  ScenarioError(std::string key, const std::string& message)
      : InputError("scenario key '" + key + "': " + message), key(std::move(key)) {}
  std::string key;
};

enum class Claim { kConsistency, kExpansion, kNormality, kContamination };

std::string claim_name(Claim c);

/// Pass/fail thresholds. All of them live in the scenario file.
struct Thresholds {
  double consistency_ratio_low = 0.35;   // median error ratio per quadrupling of n
  double consistency_ratio_high = 0.72;
  double expansion_ratio = 0.2;          // median |R_n| / median |sqrt(n)(theta_hat - theta0)| at largest n
  double variance_rel = 0.15;            // diagonal of empirical vs theoretical V
  double normality_ks = 0.06;            // KS distance of standardized coordinates
  bool check_efficiency = false;
  double efficiency_target = 0.95;
  double efficiency_tol = 0.05;
  double contamination_se_multiple = 100.0;
  double magnitude_growth = 1.0;         // deviation(largest) <= growth * deviation(second largest)
  double max_failure_fraction = 0.01;
};

/// Simulation scenario read from a flat key = value file. Lines starting
/// with '#' are comments. Recognized keys:
///
///   name, claims (comma list: consistency, expansion, normality, contamination)
///   model (location | linear | exp), p, beta0 (comma list), alpha0
///   design.mean, design.sd (linear: x_j ~ N(mean, sd^2)), design.low, design.high (exp: x ~ U(low, high))
///   error (normal | shifted-exponential | contaminated-normal | bimodal), error.sigma, error.lambda,
///     error.shift, error.epsilon, error.outlier_mean, error.outlier_sd, error.separation
///   sample_sizes (comma list), replications, seed, threads
///   fit.k0, fit.k1, fit.delta, fit.n_subsamples, fit.refine_steps, fit.n_best, fit.irwls_tol,
///     fit.irwls_max_iter, fit.s_max_iter
///   contamination.fractions, contamination.magnitudes (comma lists)
///   threshold.* (see Thresholds; threshold.check_efficiency is true/false)
struct SimScenario {
  std::string name = "scenario";
  std::vector<Claim> claims;
  std::string model = "linear";
  int p = 1;
  Vector beta0;
  double alpha0 = 0.0;
  double design_mean = 0.0;
  double design_sd = 1.0;
  double design_low = 0.0;
  double design_high = 2.0;
  ErrorLaw error;
  std::vector<int> sample_sizes;
  int replications = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  FitConfig fit;
  std::vector<double> contamination_fractions{0.1, 0.2, 0.3, 0.4};
  std::vector<double> contamination_magnitudes{1e2, 1e4, 1e6};
  Thresholds thresholds;

  RegressionModel make_model() const;
  /// Data for replication `rep` at sample size n; a pure function of (seed, n, rep).
  Dataset generate(int n, int rep) const;
  DesignMoments design_moments() const;
  /// Subsampling seed for the fit of replication `rep` at size n.
  std::uint64_t fit_seed(int n, int rep) const;
  void validate() const;
};

SimScenario parse_scenario(std::istream& in);
SimScenario load_scenario(const std::string& path);

}  // namespace robustmm
