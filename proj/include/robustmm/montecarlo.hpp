#pragma once

#include "robustmm/json_writer.hpp"
#include "robustmm/scenario.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace robustmm {

/// One fitted replication. Fields that a claim does not use stay NaN.
struct ReplicationRecord {
  Claim claim = Claim::kConsistency;
  int n = 0;
  int rep = 0;
  double epsilon = 0.0;
  double magnitude = 0.0;
  bool ok = false;
  std::string error;  // why the fit was dropped
  Vector beta_s;
  double alpha_s = std::numeric_limits<double>::quiet_NaN();
  Vector beta_mm;
  double alpha_mm = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double error_norm = std::numeric_limits<double>::quiet_NaN();      // consistency: ||beta_mm - beta0||
  double leading_norm = std::numeric_limits<double>::quiet_NaN();    // expansion: ||sqrt(n)(theta - theta0)||
  double remainder_norm = std::numeric_limits<double>::quiet_NaN();  // expansion: ||R_n||
  double deviation = std::numeric_limits<double>::quiet_NaN();       // contamination
};

struct ClaimResult {
  Claim claim = Claim::kConsistency;
  std::optional<bool> pass;  // empty when the run is too small to decide
  std::string status;        // pass | fail | insufficient
  std::vector<std::string> reasons;
  int failures = 0;
  int attempted = 0;
  Json metrics = Json::object();
};

struct SimReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;  // e.g. error law outside the theory's hypotheses
  std::vector<ClaimResult> claims;
  std::vector<ReplicationRecord> records;

  /// True unless some claim failed; undecided claims do not count as failures.
  bool all_pass() const;
  Json to_json() const;
  /// Per-replication estimates, one row per record.
  std::string to_csv() const;
};

/// Population parameter theta0 = (xi_S0, xi_MM0, sigma0) of a scenario.
struct TrueParameter {
  PopulationTarget target;
  JointParam theta;
  InferenceConstants constants;
};

TrueParameter true_parameter(const SimScenario& s);

SimReport run_consistency(const SimScenario& s);
SimReport run_expansion_check(const SimScenario& s);
SimReport run_normality(const SimScenario& s);
SimReport run_contamination(const SimScenario& s);

/// Runs every claim listed in the scenario into a single report.
SimReport run_scenario(const SimScenario& s);

/// Kolmogorov-Smirnov distance between the sample and the standard normal.
double ks_normal_distance(std::vector<double> z);

}  // namespace robustmm
