#include "robustmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace robustmm {

RegressionModel RegressionModel::linear(int p) {
  if (p < 1) throw ArgumentError("linear model needs p >= 1");
  RegressionModel m;
  m.kind_ = ModelKind::kLinear;
  m.name_ = "linear";
  m.q_ = p;
  m.p_ = p;
  return m;
}

RegressionModel RegressionModel::location() {
  RegressionModel m;
  m.kind_ = ModelKind::kLinear;
  m.name_ = "location";
  m.q_ = 0;
  m.p_ = 0;
  return m;
}

RegressionModel RegressionModel::exponential(std::optional<Box> bounds) {
  RegressionModel m;
  m.kind_ = ModelKind::kExponential;
  m.name_ = "exp";
  m.q_ = 2;
  m.p_ = 1;
  if (!bounds) {
    Box box;
    box.lower = Vector::Constant(2, -10.0);
    box.upper = Vector::Constant(2, 10.0);
    box.lower(1) = -3.0;
    box.upper(1) = 3.0;
    bounds = box;
  }
  m.bounds_ = std::move(bounds);
  return m;
}

RegressionModel RegressionModel::custom(std::string name, int q, int p, EvalFn eval, GradFn grad, HessFn hess,
                                        std::optional<Box> bounds) {
  if (q < 1 || p < 0) throw ArgumentError("custom model needs q >= 1 and p >= 0");
  if (!eval || !grad || !hess) throw ArgumentError("custom model needs eval, grad and hess");
  RegressionModel m;
  m.kind_ = ModelKind::kCustom;
  m.name_ = std::move(name);
  m.q_ = q;
  m.p_ = p;
  m.eval_ = std::move(eval);
  m.grad_ = std::move(grad);
  m.hess_ = std::move(hess);
  m.bounds_ = std::move(bounds);
  return m;
}

RegressionModel RegressionModel::finite_difference(std::string name, int q, int p, EvalFn eval,
                                                   std::optional<Box> bounds) {
  if (!eval) throw ArgumentError("finite-difference model needs eval");
  auto step = [](double b) { return 1e-6 * std::max(1.0, std::abs(b)); };
  GradFn grad = [eval, step](const Vector& x, const Vector& beta) {
    Vector g(beta.size());
    Vector b = beta;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      const double h = step(beta(j));
      b(j) = beta(j) + h;
      const double up = eval(x, b);
      b(j) = beta(j) - h;
      const double down = eval(x, b);
      b(j) = beta(j);
      g(j) = (up - down) / (2.0 * h);
    }
    return g;
  };
  HessFn hess = [grad, step](const Vector& x, const Vector& beta) {
    const Eigen::Index q = beta.size();
    Matrix h(q, q);
    Vector b = beta;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double hj = step(beta(j));
      b(j) = beta(j) + hj;
      const Vector up = grad(x, b);
      b(j) = beta(j) - hj;
      const Vector down = grad(x, b);
      b(j) = beta(j);
      h.col(j) = (up - down) / (2.0 * hj);
    }
    return Matrix(0.5 * (h + h.transpose()));
  };
  RegressionModel m = custom(std::move(name), q, p, std::move(eval), std::move(grad), std::move(hess),
                             std::move(bounds));
  m.certified_ = false;
  return m;
}

double RegressionModel::eval(const Vector& x, const Vector& beta) const {
  switch (kind_) {
    case ModelKind::kLinear:
      return q_ == 0 ? 0.0 : beta.dot(x);
    case ModelKind::kExponential:
      return beta(0) * std::exp(beta(1) * x(0));
    case ModelKind::kCustom:
      return eval_(x, beta);
  }
  return 0.0;
}

Vector RegressionModel::grad(const Vector& x, const Vector& beta) const {
  switch (kind_) {
    case ModelKind::kLinear:
      return x.head(q_);
    case ModelKind::kExponential: {
      const double e = std::exp(beta(1) * x(0));
      Vector g(2);
      g << e, beta(0) * x(0) * e;
      return g;
    }
    case ModelKind::kCustom:
      return grad_(x, beta);
  }
  return {};
}

Matrix RegressionModel::hess(const Vector& x, const Vector& beta) const {
  switch (kind_) {
    case ModelKind::kLinear:
      return Matrix::Zero(q_, q_);
    case ModelKind::kExponential: {
      const double e = std::exp(beta(1) * x(0));
      Matrix h(2, 2);
      h << 0.0, x(0) * e, x(0) * e, beta(0) * x(0) * x(0) * e;
      return h;
    }
    case ModelKind::kCustom:
      return hess_(x, beta);
  }
  return {};
}

Vector AugmentedParam::stacked() const {
  Vector xi(beta.size() + 1);
  xi.head(beta.size()) = beta;
  xi(beta.size()) = alpha;
  return xi;
}

AugmentedParam AugmentedParam::from_stacked(const Vector& xi) {
  if (xi.size() < 1) throw ArgumentError("augmented parameter needs at least the alpha component");
  return AugmentedParam{xi.head(xi.size() - 1), xi(xi.size() - 1)};
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw ArgumentError("dataset: x has " + std::to_string(x.rows()) + " rows but y has " +
                                                std::to_string(y.size()));
  for (Eigen::Index i = 0; i < n(); ++i) {
    if (!std::isfinite(y(i))) throw DomainError("dataset: non-finite y in row " + std::to_string(i));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(i, j))) {
        throw DomainError("dataset: non-finite x in row " + std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
}

namespace {

void check_dims(const Dataset& d, const RegressionModel& m, const AugmentedParam& xi) {
  if (xi.q() != m.q()) throw ArgumentError("parameter dimension does not match the model");
  if (d.x.rows() != d.y.size()) throw ArgumentError("dataset x/y row mismatch");
  if (d.x.cols() < m.p()) throw ArgumentError("dataset has fewer regressor columns than the model needs");
}

}  // namespace

Vector residuals(const Dataset& d, const RegressionModel& m, const AugmentedParam& xi) {
  check_dims(d, m, xi);
  Vector r;
  if (m.is_linear()) {
    r = d.y.array() - xi.alpha;
    if (m.q() > 0) r.noalias() -= d.x.leftCols(m.q()) * xi.beta;
  } else {
    r.resize(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      const Vector xi_row = d.x.row(i).transpose();
      r(i) = d.y(i) - m.eval(xi_row, xi.beta) - xi.alpha;
    }
  }
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r(i))) throw DomainError("model evaluation is not finite at row " + std::to_string(i));
  }
  return r;
}

Vector augmented_grad(const RegressionModel& m, const Vector& x, const AugmentedParam& xi) {
  if (xi.q() != m.q()) throw ArgumentError("parameter dimension does not match the model");
  Vector g(m.q() + 1);
  if (m.q() > 0) g.head(m.q()) = m.grad(x, xi.beta);
  g(m.q()) = 1.0;
  if (!g.allFinite()) throw DomainError("model gradient is not finite");
  return g;
}

Matrix augmented_hess(const RegressionModel& m, const Vector& x, const AugmentedParam& xi) {
  if (xi.q() != m.q()) throw ArgumentError("parameter dimension does not match the model");
  Matrix h = Matrix::Zero(m.q() + 1, m.q() + 1);
  if (m.q() > 0) h.topLeftCorner(m.q(), m.q()) = m.hess(x, xi.beta);
  if (!h.allFinite()) throw DomainError("model Hessian is not finite");
  return h;
}

Matrix augmented_jacobian(const Dataset& d, const RegressionModel& m, const AugmentedParam& xi) {
  check_dims(d, m, xi);
  const int q = m.q();
  Matrix j(d.n(), q + 1);
  if (m.is_linear()) {
    if (q > 0) j.leftCols(q) = d.x.leftCols(q);
  } else {
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      const Vector row = d.x.row(i).transpose();
      j.row(i).head(q) = m.grad(row, xi.beta).transpose();
    }
    if (!j.leftCols(q).allFinite()) throw DomainError("model gradient is not finite");
  }
  j.col(q).setOnes();
  return j;
}

IdentifiabilityReport check_identifiability(const Dataset& d) {
  IdentifiabilityReport report;
  const Eigen::Index n = d.x.rows();
  const Eigen::Index p = d.x.cols();
  Matrix design(n, p + 1);
  design.leftCols(p) = d.x;
  design.col(p).setOnes();
  report.design_cols = p + 1;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  report.design_rank = qr.rank();

  for (Eigen::Index j = 0; j < p; ++j) {
    if (n > 0 && (d.x.col(j).array() == d.x(0, j)).all()) report.constant_columns.push_back(j);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (d.x(a, j) != d.x(b, j)) return d.x(a, j) < d.x(b, j);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  Eigen::Index best = n > 0 ? 1 : 0;
  Eigen::Index run = 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    run = (!row_less(order[i - 1], order[i]) && !row_less(order[i], order[i - 1])) ? run + 1 : 1;
    best = std::max(best, run);
  }
  report.max_identical_row_fraction = n > 0 ? static_cast<double>(best) / static_cast<double>(n) : 0.0;

  if (report.design_rank < report.design_cols) {
    report.at_risk = true;
    report.warnings.push_back("design with intercept is rank deficient (rank " + std::to_string(report.design_rank) +
                              " of " + std::to_string(report.design_cols) + ")");
  }
  for (Eigen::Index j : report.constant_columns) {
    report.at_risk = true;
    report.warnings.push_back("regressor " + std::to_string(j + 1) + " is constant and collinear with the intercept");
  }
  if (report.max_identical_row_fraction >= 0.5 && n > 1) {
    report.at_risk = true;
    report.warnings.push_back("at least half of the rows share identical regressors");
  }
  return report;
}

}  // namespace robustmm
