#pragma once

#include "robustmm/estimators.hpp"

#include <optional>

namespace robustmm {

/// Joint parameter theta = (xi_S, xi_MM, sigma), dimension 2q + 3.
struct JointParam {
  AugmentedParam xi_s;
  AugmentedParam xi_mm;
  double sigma = 0.0;

  int q() const { return xi_s.q(); }
  Vector stacked() const;
  static JointParam from_stacked(const Vector& theta, int q);
  static JointParam from_fit(const FitResult& fit);
};

/// Loss functions and level shared by every estimating-equation evaluation.
struct EquationSpec {
  RhoFunction rho0;
  RhoFunction rho1;
  double delta;

  static EquationSpec from_config(const FitConfig& cfg) { return {cfg.rho0, cfg.rho1, cfg.delta}; }
};

/// Constants that enter D0 and the influence functions. Under the model they
/// are expectations at the true law; `estimate_constants` replaces those by
/// empirical means at a fitted theta.
struct InferenceConstants {
  double a00 = 0.0;  // E psi0'(t_S)
  double a01 = 0.0;  // E psi1'(t_MM)
  double e00 = 0.0;  // E t_S psi0'(t_S)
  double e01 = 0.0;  // E t_MM psi1'(t_MM)
  double d0 = 0.0;   // E t_S psi0(t_S)
  Vector b0;         // E g'(x, beta)
  Matrix A0;         // Cov g'(x, beta)
  Matrix C0;         // [[A0 + b0 b0', b0], [b0', 1]]
  double sigma0 = 0.0;
  double alpha00 = 0.0;
  double alpha01 = 0.0;
  double delta = kDefaultDelta;

  int q() const { return static_cast<int>(b0.size()); }
  Vector b0_star() const;
};

Matrix assemble_c0(const Vector& b0, const Matrix& A0);

/// Psi(z, theta) = [psi0(t_S) g'(x, xi_S); psi1(t_MM) g'(x, xi_MM); rho0(t_S) - delta].
Vector psi_stack(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y, const JointParam& theta);

/// d Psi / d theta, assembled block by block. Blocks (1,2), (2,1) and (3,2) are zero.
Matrix psi_jacobian(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta);

/// Plug-in constants: empirical means over the data at the fitted theta.
InferenceConstants estimate_constants(const Dataset& d, const RegressionModel& m, const EquationSpec& eq,
                                      const JointParam& theta);

/// Throws SingularityError naming a00, a01, d0 or C0 when D0 would be singular.
void check_nonsingular(const InferenceConstants& c);

/// Empirical mean of psi_jacobian over the dataset.
Matrix d0_matrix(const Dataset& d, const RegressionModel& m, const EquationSpec& eq, const JointParam& theta);

/// -(1/sigma0) [[a00 C0, 0, e00 b0*], [0, a01 C0, e01 b0*], [0, 0, d0]].
Matrix closed_form_d0(const InferenceConstants& c);
/// Block formula for the inverse of closed_form_d0.
Matrix closed_form_d0_inverse(const InferenceConstants& c);
/// Block formula for C0^{-1} in terms of A0^{-1} and b0.
Matrix closed_form_c0_inverse(const InferenceConstants& c);
/// det D0 = (-1/sigma0)^(2q+3) a00^(q+1) a01^(q+1) d0 det(C0)^2.
double closed_form_d0_determinant(const InferenceConstants& c);

/// Influence of one observation on theta, split by block.
struct Influence {
  Vector s;   // q + 1
  Vector mm;  // q + 1
  double sigma = 0.0;

  Vector stacked() const;
};

/// Closed-form influence functions. theta supplies the evaluation point
/// (xi_S, xi_MM, sigma0); the constants supply a0i, e0i, d0, b0 and A0.
Influence influence(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta, const InferenceConstants& c);

/// MM block of `influence`: beta part A0^{-1}(g' - b0) scaled by sigma0 psi1 / a01, alpha part with the
/// correction for the scale estimate.
Vector influence_mm(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta, const InferenceConstants& c);

/// Location case (q = 0): sigma0/a01 psi1((y - alpha01)/sigma0) - sigma0 e01/(a01 d0) (rho0((y - alpha00)/sigma0) - delta).
double influence_location(const EquationSpec& eq, double y, const InferenceConstants& c);

/// Generic route: -D^{-1} Psi(z, theta), solved by LU.
Vector influence_generic(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                         const JointParam& theta, const Matrix& d0);

struct InferenceReport {
  InferenceConstants constants;
  Matrix D0;            // closed form from the plug-in constants
  Matrix D0_empirical;  // mean of psi_jacobian at the fit
  Matrix V_full;        // mean I I' over all of theta
  Matrix V;             // MM block of V_full
  Vector std_errors;    // sqrt(diag(V) / n)
  Matrix influence;     // n x (2q + 3)
  Vector influence_mean;
  std::optional<Matrix> V_symmetric;               // sigma^2 E psi1^2 / (E psi1')^2 C0^{-1}
  std::optional<double> symmetric_discrepancy;     // max relative gap on the diagonal
};

/// Sandwich covariance of the MM estimate from plug-in influence vectors.
/// With `symmetric` set the symmetric-error shortcut is emitted alongside.
InferenceReport asymptotic_cov(const Dataset& d, const RegressionModel& m, const FitConfig& cfg,
                               const FitResult& fit, bool symmetric = false);

}  // namespace robustmm
