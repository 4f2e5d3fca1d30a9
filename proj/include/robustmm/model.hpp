#pragma once

#include "robustmm/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace robustmm {

/// Compact parameter box for nonlinear models.
struct Box {
  Vector lower;
  Vector upper;

  Vector project(const Vector& beta) const { return beta.cwiseMax(lower).cwiseMin(upper); }
  bool contains(const Vector& beta) const {
    return (beta.array() >= lower.array()).all() && (beta.array() <= upper.array()).all();
  }
};

enum class ModelKind { kLinear, kExponential, kCustom };

/// Response function g(x, beta) together with its gradient and Hessian in beta.
class RegressionModel {
 public:
  using EvalFn = std::function<double(const Vector& x, const Vector& beta)>;
  using GradFn = std::function<Vector(const Vector& x, const Vector& beta)>;
  using HessFn = std::function<Matrix(const Vector& x, const Vector& beta)>;

  /// g(x, beta) = beta'x with p >= 1 regressors (no intercept; alpha plays that role).
  static RegressionModel linear(int p);
  /// The regressor-free model used by location fits: q = 0, g = 0.
  static RegressionModel location();
  /// g(x, beta) = beta_1 exp(beta_2 x) on a scalar regressor.
  static RegressionModel exponential(std::optional<Box> bounds = std::nullopt);
  /// User model with analytic derivatives.
  static RegressionModel custom(std::string name, int q, int p, EvalFn eval, GradFn grad, HessFn hess,
                                std::optional<Box> bounds = std::nullopt);
  /// User model whose derivatives come from central differences. Not certified for
  /// inference: D0 built from it inherits the finite-difference error.
  static RegressionModel finite_difference(std::string name, int q, int p, EvalFn eval,
                                           std::optional<Box> bounds = std::nullopt);

  double eval(const Vector& x, const Vector& beta) const;
  Vector grad(const Vector& x, const Vector& beta) const;
  Matrix hess(const Vector& x, const Vector& beta) const;

  int q() const { return q_; }
  int p() const { return p_; }
  ModelKind kind() const { return kind_; }
  bool is_linear() const { return kind_ == ModelKind::kLinear; }
  bool certified() const { return certified_; }
  const std::optional<Box>& bounds() const { return bounds_; }
  const std::string& name() const { return name_; }

 private:
  RegressionModel() = default;

  ModelKind kind_ = ModelKind::kLinear;
  std::string name_;
  int q_ = 0;
  int p_ = 0;
  bool certified_ = true;
  std::optional<Box> bounds_;
  EvalFn eval_;
  GradFn grad_;
  HessFn hess_;
};

/// xi = (beta', alpha)'.
struct AugmentedParam {
  Vector beta;
  double alpha = 0.0;

  int q() const { return static_cast<int>(beta.size()); }
  Vector stacked() const;
  static AugmentedParam from_stacked(const Vector& xi);
};

/// n observations (x_i, y_i); x is n x p.
struct Dataset {
  Matrix x;
  Vector y;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  void validate() const;
};

Vector residuals(const Dataset& d, const RegressionModel& m, const AugmentedParam& xi);

// Gradient and Hessian of g(x, beta) + alpha with respect to xi.
Vector augmented_grad(const RegressionModel& m, const Vector& x, const AugmentedParam& xi);
Matrix augmented_hess(const RegressionModel& m, const Vector& x, const AugmentedParam& xi);

/// n x (q+1) matrix whose rows are the augmented gradients.
Matrix augmented_jacobian(const Dataset& d, const RegressionModel& m, const AugmentedParam& xi);

struct IdentifiabilityReport {
  Eigen::Index design_rank = 0;  // rank of [X, 1]
  Eigen::Index design_cols = 0;
  double max_identical_row_fraction = 0.0;
  std::vector<Eigen::Index> constant_columns;
  bool at_risk = false;
  std::vector<std::string> warnings;
};

/// Necessary-condition check for identifiability in the linear model: the
/// design with an intercept column appended must have full column rank.
IdentifiabilityReport check_identifiability(const Dataset& d);

}  // namespace robustmm
