#include "robustmm/rho.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace robustmm {

RhoFunction RhoFunction::bisquare(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ArgumentError("bisquare tuning constant must be positive and finite");
  return RhoFunction(RhoFamily::kBisquare, "bisquare", k, nullptr);
}

RhoFunction RhoFunction::custom(std::string name, double k, Scalar rho, Scalar psi, Scalar psi_prime) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ArgumentError("rho-function tuning constant must be positive and finite");
  if (!rho || !psi || !psi_prime) throw ArgumentError("custom rho-function needs rho, psi and psi'");
  auto callables = std::make_shared<const Callables>(Callables{std::move(rho), std::move(psi), std::move(psi_prime)});
  return RhoFunction(RhoFamily::kCustom, std::move(name), k, std::move(callables));
}

RhoFunction RhoFunction::from_name(const std::string& family, double k) {
  if (family == "bisquare") return bisquare(k);
  throw ArgumentError("unknown rho family '" + family + "'");
}

R1Report check_r1(const RhoFunction& f, int grid_size) {
  if (grid_size < 3) throw ArgumentError("verify_r1 needs grid_size >= 3");
  R1Report report;
  report.grid_size = grid_size;
  const double k = f.k();

  // Interior points t_j = -k + 2k (j+1)/(grid_size+1), all strictly inside (-k, k).
  const double h = 2.0 * k / (grid_size + 1);
  std::vector<double> log_tail(static_cast<std::size_t>(grid_size));
  for (int j = 0; j < grid_size; ++j) {
    const double t = -k + h * (j + 1);
    const double r = f.rho(t);
    if (!(r < 1.0)) {
      report.below_one_inside = false;
      log_tail[j] = -std::numeric_limits<double>::infinity();
    } else {
      log_tail[j] = std::log1p(-r);
    }
  }
  double max_d2 = -std::numeric_limits<double>::infinity();
  if (report.below_one_inside) {
    for (int j = 1; j + 1 < grid_size; ++j) {
      max_d2 = std::max(max_d2, log_tail[j - 1] - 2.0 * log_tail[j] + log_tail[j + 1]);
    }
  }
  report.max_second_difference = max_d2;

  double max_dev = 0.0;
  for (int j = 0; j < grid_size; ++j) {
    const double t = k + 2.0 * k * j / (grid_size - 1);
    max_dev = std::max({max_dev, std::abs(f.rho(t) - 1.0), std::abs(f.rho(-t) - 1.0)});
  }
  report.max_outside_deviation = max_dev;

  report.holds = report.below_one_inside && max_d2 <= 1e-12 && max_dev <= 1e-15;
  return report;
}

bool verify_r1(const RhoFunction& f, int grid_size) { return check_r1(f, grid_size).holds; }

R1Report check_r1_table(const std::vector<double>& t, const std::vector<double>& rho) {
  if (t.size() != rho.size() || t.size() < 3) throw ArgumentError("rho table needs at least 3 (t, rho) rows");
  R1Report report;
  report.grid_size = static_cast<int>(t.size());
  bool shape_ok = t.front() == 0.0 && rho.front() == 0.0;
  for (std::size_t j = 1; j < t.size(); ++j) {
    if (!(t[j] > t[j - 1])) throw ArgumentError("rho table abscissae must be strictly increasing");
    shape_ok = shape_ok && rho[j] >= rho[j - 1];
  }
  std::size_t first_one = t.size();
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (rho[j] >= 1.0) {
      first_one = j;
      break;
    }
  }
  // Without a saturated node there is no k, so the table cannot certify R1.
  if (first_one == t.size()) shape_ok = false;
  double max_dev = 0.0;
  for (std::size_t j = first_one; j < t.size(); ++j) max_dev = std::max(max_dev, std::abs(rho[j] - 1.0));
  report.max_outside_deviation = max_dev;

  // Mirror the nodes inside (-k, k) and compare consecutive slopes of log(1 - rho).
  std::vector<double> xs;
  std::vector<double> fs;
  for (std::size_t j = std::min(first_one, t.size()); j-- > 1;) {
    xs.push_back(-t[j]);
    fs.push_back(std::log1p(-rho[j]));
  }
  for (std::size_t j = 0; j < std::min(first_one, t.size()); ++j) {
    xs.push_back(t[j]);
    fs.push_back(rho[j] < 1.0 ? std::log1p(-rho[j]) : -std::numeric_limits<double>::infinity());
  }
  double max_d2 = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j + 1 < xs.size(); ++j) {
    const double left = (fs[j] - fs[j - 1]) / (xs[j] - xs[j - 1]);
    const double right = (fs[j + 1] - fs[j]) / (xs[j + 1] - xs[j]);
    max_d2 = std::max(max_d2, right - left);
  }
  report.max_second_difference = max_d2;
  report.below_one_inside = shape_ok;
  report.holds = shape_ok && max_d2 <= 1e-12 && max_dev <= 1e-15;
  return report;
}

bool is_majorized(const RhoFunction& rho1, const RhoFunction& rho0, int grid_size) {
  const double upper = 2.0 * std::max(rho0.k(), rho1.k());
  for (int j = 0; j < grid_size; ++j) {
    const double t = upper * j / (grid_size - 1);
    if (rho1.rho(t) > rho0.rho(t) + 1e-15) return false;
  }
  return true;
}

}  // namespace robustmm
