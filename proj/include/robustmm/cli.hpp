#pragma once

#include "robustmm/inference.hpp"
#include "robustmm/json_writer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace robustmm {

// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitClaimFailed = 1;  // simulate: a claim failed; check-rho: R1 does not hold
inline constexpr int kExitFitError = 2;
inline constexpr int kExitInputError = 3;

/// Report written by `robustmm fit`. Layout of the JSON object:
///   schema_version, model, n, q, columns, settings,
///   sigma, beta_mm, alpha_mm, std_errors, V, constants,
///   xi_s {beta, alpha}, xi_mm {beta, alpha}, diagnostics, identifiability,
///   metadata (only with --metadata; holds everything run dependent).
inline constexpr int kFitSchemaVersion = 1;

struct FitReportInput {
  std::string model_name;
  std::vector<std::string> columns;  // regressors that entered the fit
  std::vector<std::string> dropped;  // constant regressors removed before fitting
  const Dataset* data = nullptr;
  const RegressionModel* model = nullptr;
  const FitConfig* config = nullptr;
  const FitResult* fit = nullptr;
  const InferenceReport* inference = nullptr;
  const IdentifiabilityReport* identifiability = nullptr;
};

Json fit_report_json(const FitReportInput& in);

/// Parses a two-column (t, rho) table and runs the R1 check on it.
R1Report check_rho_table_file(const std::string& path);

/// Entry point behind the robustmm executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace robustmm
