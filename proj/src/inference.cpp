#include "robustmm/inference.hpp"

#include <cmath>

namespace robustmm {

Vector JointParam::stacked() const {
  const int k = q() + 1;
  Vector theta(2 * k + 1);
  theta.head(k) = xi_s.stacked();
  theta.segment(k, k) = xi_mm.stacked();
  theta(2 * k) = sigma;
  return theta;
}

JointParam JointParam::from_stacked(const Vector& theta, int q) {
  const int k = q + 1;
  if (theta.size() != 2 * k + 1) throw ArgumentError("joint parameter has the wrong dimension");
  return {AugmentedParam::from_stacked(theta.head(k)), AugmentedParam::from_stacked(theta.segment(k, k)),
          theta(2 * k)};
}

JointParam JointParam::from_fit(const FitResult& fit) { return {fit.xi_s, fit.xi_mm, fit.sigma}; }

Vector InferenceConstants::b0_star() const {
  Vector b(q() + 1);
  b.head(q()) = b0;
  b(q()) = 1.0;
  return b;
}

Matrix assemble_c0(const Vector& b0, const Matrix& A0) {
  const Eigen::Index q = b0.size();
  if (A0.rows() != q || A0.cols() != q) throw ArgumentError("A0 must be q x q");
  Matrix c0(q + 1, q + 1);
  c0.topLeftCorner(q, q) = A0 + b0 * b0.transpose();
  c0.topRightCorner(q, 1) = b0;
  c0.bottomLeftCorner(1, q) = b0.transpose();
  c0(q, q) = 1.0;
  return c0;
}

namespace {

struct Standardized {
  double t_s;
  double t_mm;
  Vector g_s;
  Vector g_mm;
};

Standardized standardize(const RegressionModel& m, const Vector& x, double y, const JointParam& theta) {
  if (!(theta.sigma > 0.0)) throw ArgumentError("estimating equations need sigma > 0");
  Standardized s;
  s.t_s = (y - m.eval(x, theta.xi_s.beta) - theta.xi_s.alpha) / theta.sigma;
  s.t_mm = (y - m.eval(x, theta.xi_mm.beta) - theta.xi_mm.alpha) / theta.sigma;
  if (!std::isfinite(s.t_s) || !std::isfinite(s.t_mm)) throw DomainError("non-finite standardized residual");
  s.g_s = augmented_grad(m, x, theta.xi_s);
  s.g_mm = augmented_grad(m, x, theta.xi_mm);
  return s;
}

Vector row_of(const Dataset& d, Eigen::Index i) { return d.x.row(i).transpose(); }

}  // namespace

Vector psi_stack(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                 const JointParam& theta) {
  const Standardized s = standardize(m, x, y, theta);
  const int k = m.q() + 1;
  Vector out(2 * k + 1);
  out.head(k) = eq.rho0.psi(s.t_s) * s.g_s;
  out.segment(k, k) = eq.rho1.psi(s.t_mm) * s.g_mm;
  out(2 * k) = eq.rho0.rho(s.t_s) - eq.delta;
  return out;
}

Matrix psi_jacobian(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta) {
  const Standardized s = standardize(m, x, y, theta);
  const int k = m.q() + 1;
  const double inv_sigma = 1.0 / theta.sigma;
  const double psi0 = eq.rho0.psi(s.t_s);
  const double dpsi0 = eq.rho0.psi_prime(s.t_s);
  const double psi1 = eq.rho1.psi(s.t_mm);
  const double dpsi1 = eq.rho1.psi_prime(s.t_mm);

  Matrix j = Matrix::Zero(2 * k + 1, 2 * k + 1);
  j.block(0, 0, k, k) = -inv_sigma * dpsi0 * s.g_s * s.g_s.transpose() + psi0 * augmented_hess(m, x, theta.xi_s);
  j.block(0, 2 * k, k, 1) = -inv_sigma * dpsi0 * s.t_s * s.g_s;
  j.block(k, k, k, k) =
      -inv_sigma * dpsi1 * s.g_mm * s.g_mm.transpose() + psi1 * augmented_hess(m, x, theta.xi_mm);
  j.block(k, 2 * k, k, 1) = -inv_sigma * dpsi1 * s.t_mm * s.g_mm;
  j.block(2 * k, 0, 1, k) = -inv_sigma * psi0 * s.g_s.transpose();
  j(2 * k, 2 * k) = -inv_sigma * psi0 * s.t_s;
  return j;
}

InferenceConstants estimate_constants(const Dataset& d, const RegressionModel& m, const EquationSpec& eq,
                                      const JointParam& theta) {
  if (!(theta.sigma > 0.0)) throw ArgumentError("plug-in constants need sigma > 0");
  const Vector r_s = residuals(d, m, theta.xi_s);
  const Vector r_mm = residuals(d, m, theta.xi_mm);
  const double n = static_cast<double>(d.n());
  const int q = m.q();

  InferenceConstants c;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double ts = r_s(i) / theta.sigma;
    const double tm = r_mm(i) / theta.sigma;
    const double dpsi0 = eq.rho0.psi_prime(ts);
    const double dpsi1 = eq.rho1.psi_prime(tm);
    c.a00 += dpsi0;
    c.a01 += dpsi1;
    c.e00 += ts * dpsi0;
    c.e01 += tm * dpsi1;
    c.d0 += ts * eq.rho0.psi(ts);
  }
  c.a00 /= n;
  c.a01 /= n;
  c.e00 /= n;
  c.e01 /= n;
  c.d0 /= n;

  const Matrix jac = augmented_jacobian(d, m, theta.xi_mm);
  const Matrix g = jac.leftCols(q);
  c.b0 = g.colwise().mean().transpose();
  const Matrix centered = g.rowwise() - c.b0.transpose();
  c.A0 = centered.transpose() * centered / n;
  c.C0 = assemble_c0(c.b0, c.A0);
  c.sigma0 = theta.sigma;
  c.alpha00 = theta.xi_s.alpha;
  c.alpha01 = theta.xi_mm.alpha;
  c.delta = eq.delta;
  return c;
}

void check_nonsingular(const InferenceConstants& c) {
  constexpr double kTiny = 1e-10;
  if (!(std::abs(c.a00) > kTiny)) throw SingularityError("D0 is singular: a00 vanishes");
  if (!(std::abs(c.a01) > kTiny)) throw SingularityError("D0 is singular: a01 vanishes");
  if (!(std::abs(c.d0) > kTiny)) throw SingularityError("D0 is singular: d0 vanishes");
  if (c.q() > 0) {
    Eigen::JacobiSVD<Matrix> svd(c.A0);
    const Vector sv = svd.singularValues();
    if (!(sv.minCoeff() > 1e-12 * std::max(1.0, sv.maxCoeff()))) {
      throw SingularityError("D0 is singular: C0 (equivalently A0) is not invertible");
    }
  }
}

Matrix closed_form_d0(const InferenceConstants& c) {
  const int k = c.q() + 1;
  const Vector b_star = c.b0_star();
  Matrix d = Matrix::Zero(2 * k + 1, 2 * k + 1);
  d.block(0, 0, k, k) = c.a00 * c.C0;
  d.block(0, 2 * k, k, 1) = c.e00 * b_star;
  d.block(k, k, k, k) = c.a01 * c.C0;
  d.block(k, 2 * k, k, 1) = c.e01 * b_star;
  d(2 * k, 2 * k) = c.d0;
  return -d / c.sigma0;
}

Matrix closed_form_c0_inverse(const InferenceConstants& c) {
  const int q = c.q();
  Matrix inv(q + 1, q + 1);
  if (q == 0) {
    inv(0, 0) = 1.0;
    return inv;
  }
  const Matrix a_inv = c.A0.ldlt().solve(Matrix::Identity(q, q));
  const Vector a_inv_b = a_inv * c.b0;
  inv.topLeftCorner(q, q) = a_inv;
  inv.topRightCorner(q, 1) = -a_inv_b;
  inv.bottomLeftCorner(1, q) = -a_inv_b.transpose();
  inv(q, q) = 1.0 + c.b0.dot(a_inv_b);
  return inv;
}

Matrix closed_form_d0_inverse(const InferenceConstants& c) {
  check_nonsingular(c);
  const int k = c.q() + 1;
  const Matrix c_inv = closed_form_c0_inverse(c);
  const Vector c_inv_b = c_inv * c.b0_star();
  Matrix m = Matrix::Zero(2 * k + 1, 2 * k + 1);
  m.block(0, 0, k, k) = c_inv / c.a00;
  m.block(0, 2 * k, k, 1) = -c.e00 / (c.a00 * c.d0) * c_inv_b;
  m.block(k, k, k, k) = c_inv / c.a01;
  m.block(k, 2 * k, k, 1) = -c.e01 / (c.a01 * c.d0) * c_inv_b;
  m(2 * k, 2 * k) = 1.0 / c.d0;
  return -c.sigma0 * m;
}

double closed_form_d0_determinant(const InferenceConstants& c) {
  const int k = c.q() + 1;
  const double det_c0 = c.C0.determinant();
  return std::pow(-1.0 / c.sigma0, 2 * k + 1) * std::pow(c.a00, k) * std::pow(c.a01, k) * c.d0 * det_c0 * det_c0;
}

Matrix d0_matrix(const Dataset& d, const RegressionModel& m, const EquationSpec& eq, const JointParam& theta) {
  const int k = m.q() + 1;
  Matrix sum = Matrix::Zero(2 * k + 1, 2 * k + 1);
  for (Eigen::Index i = 0; i < d.n(); ++i) sum += psi_jacobian(m, eq, row_of(d, i), d.y(i), theta);
  return sum / static_cast<double>(d.n());
}

Vector Influence::stacked() const {
  Vector out(s.size() + mm.size() + 1);
  out << s, mm, sigma;
  return out;
}

namespace {

void check_degenerate(const InferenceConstants& c) {
  constexpr double kTiny = 1e-10;
  if (!(std::abs(c.a00) > kTiny)) throw DegenerateConstantsError("influence undefined: a00 = 0");
  if (!(std::abs(c.a01) > kTiny)) throw DegenerateConstantsError("influence undefined: a01 = 0");
  if (!(std::abs(c.d0) > kTiny)) throw DegenerateConstantsError("influence undefined: d0 = 0");
}

// sigma0/a psi(t) C0^{-1} g'(x, xi), written out with A0^{-1}: the beta part is
// A0^{-1}(g' - b0) and the alpha part is 1 + b0' A0^{-1}(b0 - g').
Vector regression_block(const InferenceConstants& c, const Eigen::LDLT<Matrix>* a0, const Vector& g_aug,
                        double factor) {
  const int q = c.q();
  Vector out(q + 1);
  if (q == 0) {
    out(0) = factor;
    return out;
  }
  const Vector a_inv_centered = a0->solve(Vector(g_aug.head(q) - c.b0));
  out.head(q) = factor * a_inv_centered;
  out(q) = factor * (1.0 - c.b0.dot(a_inv_centered));
  return out;
}

}  // namespace

Influence influence(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta, const InferenceConstants& c) {
  check_degenerate(c);
  if (c.q() != m.q()) throw ArgumentError("constants and model disagree on q");
  const Standardized s = standardize(m, x, y, theta);
  std::optional<Eigen::LDLT<Matrix>> a0;
  if (c.q() > 0) {
    check_nonsingular(c);
    a0.emplace(c.A0);
  }
  const Eigen::LDLT<Matrix>* a0_ptr = a0 ? &*a0 : nullptr;
  const double scale_term = eq.rho0.rho(s.t_s) - eq.delta;

  Influence out;
  out.s = regression_block(c, a0_ptr, s.g_s, c.sigma0 / c.a00 * eq.rho0.psi(s.t_s));
  out.s(c.q()) -= c.sigma0 * c.e00 / (c.a00 * c.d0) * scale_term;
  out.mm = regression_block(c, a0_ptr, s.g_mm, c.sigma0 / c.a01 * eq.rho1.psi(s.t_mm));
  out.mm(c.q()) -= c.sigma0 * c.e01 / (c.a01 * c.d0) * scale_term;
  out.sigma = c.sigma0 / c.d0 * scale_term;
  return out;
}

Vector influence_mm(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                    const JointParam& theta, const InferenceConstants& c) {
  return influence(m, eq, x, y, theta, c).mm;
}

double influence_location(const EquationSpec& eq, double y, const InferenceConstants& c) {
  check_degenerate(c);
  const double t_mm = (y - c.alpha01) / c.sigma0;
  const double t_s = (y - c.alpha00) / c.sigma0;
  return c.sigma0 / c.a01 * eq.rho1.psi(t_mm) -
         c.e01 * c.sigma0 / (c.a01 * c.d0) * (eq.rho0.rho(t_s) - eq.delta);
}

Vector influence_generic(const RegressionModel& m, const EquationSpec& eq, const Vector& x, double y,
                         const JointParam& theta, const Matrix& d0) {
  Eigen::FullPivLU<Matrix> lu(d0);
  if (!lu.isInvertible()) throw SingularityError("D0 is numerically singular");
  return -lu.solve(psi_stack(m, eq, x, y, theta));
}

InferenceReport asymptotic_cov(const Dataset& d, const RegressionModel& m, const FitConfig& cfg,
                               const FitResult& fit, bool symmetric) {
  if (fit.exact_fit || !(fit.sigma > 0.0)) throw FitError("inference needs a fit with sigma > 0");
  const EquationSpec eq = EquationSpec::from_config(cfg);
  const JointParam theta = JointParam::from_fit(fit);
  const int k = m.q() + 1;
  const double n = static_cast<double>(d.n());

  InferenceReport report;
  report.constants = estimate_constants(d, m, eq, theta);
  check_nonsingular(report.constants);
  report.D0 = closed_form_d0(report.constants);
  report.D0_empirical = d0_matrix(d, m, eq, theta);

  report.influence.resize(d.n(), 2 * k + 1);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    report.influence.row(i) = influence(m, eq, row_of(d, i), d.y(i), theta, report.constants).stacked().transpose();
  }
  report.influence_mean = report.influence.colwise().mean().transpose();
  report.V_full = report.influence.transpose() * report.influence / n;
  // The product is symmetric only up to rounding; make it exact.
  report.V_full = (0.5 * (report.V_full + report.V_full.transpose())).eval();
  report.V = report.V_full.block(k, k, k, k);
  report.std_errors = (report.V.diagonal() / n).cwiseSqrt();

  if (symmetric) {
    const Vector r_mm = residuals(d, m, fit.xi_mm);
    double psi_sq = 0.0;
    for (Eigen::Index i = 0; i < r_mm.size(); ++i) {
      const double p = cfg.rho1.psi(r_mm(i) / fit.sigma);
      psi_sq += p * p;
    }
    psi_sq /= n;
    const double a01 = report.constants.a01;
    const Matrix v_sym = fit.sigma * fit.sigma * psi_sq / (a01 * a01) * closed_form_c0_inverse(report.constants);
    double gap = 0.0;
    for (int j = 0; j < k; ++j) gap = std::max(gap, std::abs(report.V(j, j) - v_sym(j, j)) / v_sym(j, j));
    report.V_symmetric = v_sym;
    report.symmetric_discrepancy = gap;
  }
  return report;
}

}  // namespace robustmm
