#include "robustmm/scenario.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace robustmm {

std::string claim_name(Claim c) {
  switch (c) {
    case Claim::kConsistency:
      return "consistency";
    case Claim::kExpansion:
      return "expansion";
    case Claim::kNormality:
      return "normality";
    case Claim::kContamination:
      return "contamination";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ScenarioError(key, "expected a finite number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ScenarioError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ScenarioError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

}  // namespace

SimScenario parse_scenario(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ScenarioError("line " + std::to_string(line_no), "empty key");
    if (!entries.emplace(key, trim(line.substr(eq + 1))).second) throw ScenarioError(key, "duplicate key");
  }

  SimScenario s;
  double k0 = s.fit.rho0.k();
  double k1 = s.fit.rho1.k();
  bool beta_given = false;
  for (const auto& [key, v] : entries) {
    if (key == "name") {
      s.name = v;
    } else if (key == "claims") {
      for (const auto& c : split_list(v)) {
        if (c == "consistency") {
          s.claims.push_back(Claim::kConsistency);
        } else if (c == "expansion") {
          s.claims.push_back(Claim::kExpansion);
        } else if (c == "normality") {
          s.claims.push_back(Claim::kNormality);
        } else if (c == "contamination") {
          s.claims.push_back(Claim::kContamination);
        } else {
          throw ScenarioError(key, "unknown claim '" + c + "'");
        }
      }
    } else if (key == "model") {
      if (v != "location" && v != "linear" && v != "exp") throw ScenarioError(key, "unknown model '" + v + "'");
      s.model = v;
    } else if (key == "p") {
      s.p = static_cast<int>(to_int(key, v));
    } else if (key == "beta0") {
      const auto b = to_doubles(key, v);
      s.beta0 = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
      beta_given = true;
    } else if (key == "alpha0") {
      s.alpha0 = to_double(key, v);
    } else if (key == "design.mean") {
      s.design_mean = to_double(key, v);
    } else if (key == "design.sd") {
      s.design_sd = to_double(key, v);
    } else if (key == "design.low") {
      s.design_low = to_double(key, v);
    } else if (key == "design.high") {
      s.design_high = to_double(key, v);
    } else if (key == "error") {
      try {
        s.error.kind = ErrorLaw::parse_kind(v);
      } catch (const ArgumentError& e) {
        throw ScenarioError(key, e.what());
      }
    } else if (key == "error.sigma") {
      s.error.sigma = to_double(key, v);
    } else if (key == "error.lambda") {
      s.error.lambda = to_double(key, v);
    } else if (key == "error.shift") {
      s.error.shift = to_double(key, v);
    } else if (key == "error.epsilon") {
      s.error.epsilon = to_double(key, v);
    } else if (key == "error.outlier_mean") {
      s.error.outlier_mean = to_double(key, v);
    } else if (key == "error.outlier_sd") {
      s.error.outlier_sd = to_double(key, v);
    } else if (key == "error.separation") {
      s.error.separation = to_double(key, v);
    } else if (key == "sample_sizes") {
      for (const auto& item : split_list(v)) s.sample_sizes.push_back(static_cast<int>(to_int(key, item)));
    } else if (key == "replications") {
      s.replications = static_cast<int>(to_int(key, v));
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "threads") {
      s.threads = static_cast<int>(to_int(key, v));
    } else if (key == "fit.k0") {
      k0 = to_double(key, v);
    } else if (key == "fit.k1") {
      k1 = to_double(key, v);
    } else if (key == "fit.delta") {
      s.fit.delta = to_double(key, v);
    } else if (key == "fit.n_subsamples") {
      s.fit.n_subsamples = static_cast<int>(to_int(key, v));
    } else if (key == "fit.refine_steps") {
      s.fit.refine_steps = static_cast<int>(to_int(key, v));
    } else if (key == "fit.n_best") {
      s.fit.n_best = static_cast<int>(to_int(key, v));
    } else if (key == "fit.irwls_tol") {
      s.fit.irwls_tol = to_double(key, v);
    } else if (key == "fit.irwls_max_iter") {
      s.fit.irwls_max_iter = static_cast<int>(to_int(key, v));
    } else if (key == "fit.s_max_iter") {
      s.fit.s_max_iter = static_cast<int>(to_int(key, v));
    } else if (key == "contamination.fractions") {
      s.contamination_fractions = to_doubles(key, v);
    } else if (key == "contamination.magnitudes") {
      s.contamination_magnitudes = to_doubles(key, v);
    } else if (key == "threshold.consistency_ratio_low") {
      s.thresholds.consistency_ratio_low = to_double(key, v);
    } else if (key == "threshold.consistency_ratio_high") {
      s.thresholds.consistency_ratio_high = to_double(key, v);
    } else if (key == "threshold.expansion_ratio") {
      s.thresholds.expansion_ratio = to_double(key, v);
    } else if (key == "threshold.variance_rel") {
      s.thresholds.variance_rel = to_double(key, v);
    } else if (key == "threshold.normality_ks") {
      s.thresholds.normality_ks = to_double(key, v);
    } else if (key == "threshold.check_efficiency") {
      s.thresholds.check_efficiency = to_bool(key, v);
    } else if (key == "threshold.efficiency_target") {
      s.thresholds.efficiency_target = to_double(key, v);
    } else if (key == "threshold.efficiency_tol") {
      s.thresholds.efficiency_tol = to_double(key, v);
    } else if (key == "threshold.contamination_se_multiple") {
      s.thresholds.contamination_se_multiple = to_double(key, v);
    } else if (key == "threshold.magnitude_growth") {
      s.thresholds.magnitude_growth = to_double(key, v);
    } else if (key == "threshold.max_failure_fraction") {
      s.thresholds.max_failure_fraction = to_double(key, v);
    } else {
      throw ScenarioError(key, "unknown key");
    }
  }

  try {
    s.fit.rho0 = RhoFunction::bisquare(k0);
  } catch (const ArgumentError& e) {
    throw ScenarioError("fit.k0", e.what());
  }
  try {
    s.fit.rho1 = RhoFunction::bisquare(k1);
  } catch (const ArgumentError& e) {
    throw ScenarioError("fit.k1", e.what());
  }
  s.fit.threads = 1;
  if (s.model == "location") {
    s.p = 0;
    if (beta_given && s.beta0.size() != 0) throw ScenarioError("beta0", "location model takes no slopes");
    s.beta0 = Vector(0);
  } else if (s.model == "exp") {
    s.p = 1;
    if (!beta_given) s.beta0 = (Vector(2) << 2.0, 0.5).finished();
  } else if (!beta_given) {
    s.beta0 = Vector::Ones(s.p);
  }
  s.validate();
  return s;
}

SimScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario '" + path + "'");
  return parse_scenario(in);
}

void SimScenario::validate() const {
  if (claims.empty()) throw ScenarioError("claims", "at least one claim is required");
  if (model == "linear" && p < 1) throw ScenarioError("p", "linear model needs p >= 1");
  const int q = model == "location" ? 0 : (model == "exp" ? 2 : p);
  if (beta0.size() != q) throw ScenarioError("beta0", "expected " + std::to_string(q) + " values");
  if (replications < 1) throw ScenarioError("replications", "must be >= 1");
  if (sample_sizes.empty()) throw ScenarioError("sample_sizes", "at least one sample size is required");
  for (int n : sample_sizes) {
    if (n < q + 2) throw ScenarioError("sample_sizes", "every n must be >= q + 2");
  }
  for (std::size_t j = 1; j < sample_sizes.size(); ++j) {
    if (sample_sizes[j] <= sample_sizes[j - 1]) throw ScenarioError("sample_sizes", "must be strictly increasing");
  }
  for (Claim c : claims) {
    if (c == Claim::kConsistency && sample_sizes.size() < 3) {
      throw ScenarioError("sample_sizes", "consistency needs at least three sample sizes");
    }
  }
  if (!(design_sd > 0.0)) throw ScenarioError("design.sd", "must be positive");
  if (!(design_high > design_low)) throw ScenarioError("design.high", "must exceed design.low");
  try {
    error.validate();
  } catch (const ArgumentError& e) {
    throw ScenarioError("error", e.what());
  }
  try {
    fit.validate();
  } catch (const ArgumentError& e) {
    throw ScenarioError("fit", e.what());
  }
  const double max_eps = std::min(fit.delta, 1.0 - fit.delta);
  for (double eps : contamination_fractions) {
    if (!(eps >= 0.0 && eps < max_eps)) {
      throw ScenarioError("contamination.fractions", "each fraction must lie in [0, min(delta, 1 - delta))");
    }
  }
  for (double mag : contamination_magnitudes) {
    if (!(mag > 0.0)) throw ScenarioError("contamination.magnitudes", "magnitudes must be positive");
  }
  if (!(thresholds.consistency_ratio_low < thresholds.consistency_ratio_high)) {
    throw ScenarioError("threshold.consistency_ratio_low", "must be below threshold.consistency_ratio_high");
  }
}

RegressionModel SimScenario::make_model() const {
  if (model == "location") return RegressionModel::location();
  if (model == "exp") return RegressionModel::exponential();
  return RegressionModel::linear(p);
}

Dataset SimScenario::generate(int n, int rep) const {
  CounterRng rng(seed, (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(rep));
  const RegressionModel m = make_model();
  Dataset d{Matrix(n, p), Vector(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      d.x(i, j) = model == "exp" ? design_low + (design_high - design_low) * rng.uniform()
                                 : design_mean + design_sd * rng.normal();
    }
    const Vector xi = d.x.row(i).transpose();
    d.y(i) = m.eval(xi, beta0) + alpha0 + error.sample(rng);
  }
  return d;
}

std::uint64_t SimScenario::fit_seed(int n, int rep) const {
  return mix64(seed ^ mix64((static_cast<std::uint64_t>(n) << 32) ^ static_cast<std::uint64_t>(rep) ^
                            0xa0761d6478bd642fULL));
}

DesignMoments SimScenario::design_moments() const {
  DesignMoments dm;
  if (model == "location") {
    dm.b0 = Vector(0);
    dm.A0 = Matrix(0, 0);
  } else if (model == "linear") {
    dm.b0 = Vector::Constant(p, design_mean);
    dm.A0 = design_sd * design_sd * Matrix::Identity(p, p);
  } else {
    // x ~ U(low, high); g'(x) = (exp(b2 x), b1 x exp(b2 x)).
    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double b1 = beta0(0);
    const double b2 = beta0(1);
    const double width = design_high - design_low;
    auto mean_of = [&](auto f) { return Quad::integrate(f, design_low, design_high, 15, 1e-14) / width; };
    const double m1 = mean_of([&](double x) { return std::exp(b2 * x); });
    const double m2 = mean_of([&](double x) { return b1 * x * std::exp(b2 * x); });
    const double s11 = mean_of([&](double x) { return std::exp(2 * b2 * x); });
    const double s12 = mean_of([&](double x) { return b1 * x * std::exp(2 * b2 * x); });
    const double s22 = mean_of([&](double x) { return b1 * b1 * x * x * std::exp(2 * b2 * x); });
    dm.b0 = (Vector(2) << m1, m2).finished();
    dm.A0.resize(2, 2);
    dm.A0 << s11 - m1 * m1, s12 - m1 * m2, s12 - m1 * m2, s22 - m2 * m2;
  }
  return dm;
}

}  // namespace robustmm
