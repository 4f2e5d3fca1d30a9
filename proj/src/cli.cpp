#include "robustmm/cli.hpp"

#include "robustmm/csv.hpp"
#include "robustmm/montecarlo.hpp"
#include "robustmm/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace robustmm {

namespace {

// One line on stderr: "robustmm: <kind>: <message>".
int fail(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  err << "robustmm: " << kind << ": " << line << '\n';
  return code;
}

std::vector<std::string> split_columns(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("error writing '" + path + "'");
}

Json param_json(const AugmentedParam& xi) { return {{"beta", to_json(xi.beta)}, {"alpha", xi.alpha}}; }

Json metadata_json() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return {{"generated_at", stamp}, {"threads", resolve_threads(0)}};
}

struct FitOptions {
  std::string input;
  std::string y_col = "1";
  std::string x_cols;
  std::string model = "linear";
  double k0 = kDefaultK0;
  double k1 = kDefaultK1;
  double delta = kDefaultDelta;
  std::uint64_t seed = 0;
  int subsamples = 500;
  int threads = 0;
  std::string out;
  bool metadata = false;
};

struct SimulateOptions {
  std::string scenario;
  std::string out;
  std::string csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  int threads = 0;
  bool metadata = false;
};

struct CheckRhoOptions {
  std::string family = "bisquare";
  double k = kDefaultK0;
  std::string table;
  int grid = 10000;
};

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  Dataset data;
  std::vector<std::string> names;
  FitConfig cfg;
  try {
    const CsvTable table = read_csv_file(o.input);
    std::vector<std::string> x_refs = split_columns(o.x_cols);
    const std::size_t y_idx = resolve_column(table, o.y_col);
    if (o.x_cols.empty()) {
      for (std::size_t j = 0; j < table.rows.front().size(); ++j) {
        if (j != y_idx) x_refs.push_back(std::to_string(j + 1));
      }
    }
    for (const auto& ref : x_refs) {
      const std::size_t j = resolve_column(table, ref);
      names.push_back(table.header.empty() ? "x" + std::to_string(j + 1) : table.header[j]);
    }
    data = select_dataset(table, o.y_col, x_refs);
    if (o.model != "linear" && o.model != "exp") throw InputError("unknown model '" + o.model + "'");
    if (o.model == "exp" && data.p() != 1) throw InputError("the exp model takes exactly one regressor column");
    cfg.delta = o.delta;
    cfg.rho0 = RhoFunction::bisquare(o.k0);
    cfg.rho1 = RhoFunction::bisquare(o.k1);
    cfg.seed = o.seed;
    cfg.n_subsamples = o.subsamples;
    cfg.threads = resolve_threads(o.threads);
    cfg.validate();
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  } catch (const ArgumentError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  }

  const bool linear = o.model == "linear";
  IdentifiabilityReport ident = check_identifiability(data);
  // Constant regressors duplicate the intercept; they are reported and left out of the fit.
  Dataset used = data;
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
  std::vector<Eigen::Index> kept_idx;
  if (linear) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      const bool constant =
          std::find(ident.constant_columns.begin(), ident.constant_columns.end(), j) != ident.constant_columns.end();
      if (constant) {
        dropped.push_back(names[static_cast<std::size_t>(j)]);
      } else {
        kept.push_back(names[static_cast<std::size_t>(j)]);
        kept_idx.push_back(j);
      }
    }
    used.x.resize(data.n(), static_cast<Eigen::Index>(kept_idx.size()));
    for (std::size_t j = 0; j < kept_idx.size(); ++j) used.x.col(static_cast<Eigen::Index>(j)) = data.x.col(kept_idx[j]);
    for (const auto& name : dropped) ident.warnings.push_back("column '" + name + "' is constant and was dropped");
  } else {
    kept = names;
  }

  const RegressionModel model = !linear ? RegressionModel::exponential()
                                        : (used.p() == 0 ? RegressionModel::location()
                                                         : RegressionModel::linear(static_cast<int>(used.p())));
  FitResult fit_result;
  InferenceReport inference;
  try {
    used.validate();
    fit_result = fit(used, model, cfg);
    if (fit_result.exact_fit) throw FitError("exact fit: more than half of the residuals are zero, sigma = 0");
    inference = asymptotic_cov(used, model, cfg, fit_result);
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  } catch (const Error& e) {
    return fail(err, kExitFitError, "fit_error", e.what());
  }

  FitReportInput in;
  in.model_name = o.model;
  in.columns = kept;
  in.dropped = dropped;
  in.data = &used;
  in.model = &model;
  in.config = &cfg;
  in.fit = &fit_result;
  in.inference = &inference;
  in.identifiability = &ident;
  Json report = fit_report_json(in);
  if (o.metadata) report["metadata"] = metadata_json();
  const std::string text = to_json_text(report);
  try {
    if (o.out.empty()) {
      out << text;
    } else {
      write_text(o.out, text);
    }
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  }
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  SimScenario s;
  try {
    s = load_scenario(o.scenario);
    if (o.seed) s.seed = *o.seed;
    if (o.replications) s.replications = *o.replications;
    if (o.threads > 0) s.threads = o.threads;
    s.validate();
  } catch (const ScenarioError& e) {
    return fail(err, kExitInputError, "scenario_error", e.what());
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  }
  SimReport report;
  try {
    report = run_scenario(s);
  } catch (const ScenarioError& e) {
    return fail(err, kExitInputError, "scenario_error", e.what());
  } catch (const Error& e) {
    return fail(err, kExitFitError, "simulation_error", e.what());
  }
  Json j = report.to_json();
  if (o.metadata) j["metadata"] = metadata_json();
  const std::string text = to_json_text(j);
  try {
    if (o.out.empty()) {
      out << text;
    } else {
      write_text(o.out, text);
    }
    std::string csv_path = o.csv;
    if (csv_path.empty() && !o.out.empty()) {
      const auto dot = o.out.rfind('.');
      const auto slash = o.out.rfind('/');
      const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
      csv_path = (has_ext ? o.out.substr(0, dot) : o.out) + ".csv";
    }
    if (!csv_path.empty()) write_text(csv_path, report.to_csv());
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  }
  for (const auto& c : report.claims) {
    err << "robustmm: " << claim_name(c.claim) << ": " << c.status << '\n';
  }
  return report.all_pass() ? kExitOk : kExitClaimFailed;
}

int cmd_check_rho(const CheckRhoOptions& o, std::ostream& out, std::ostream& err) {
  R1Report r;
  std::string label;
  try {
    if (!o.table.empty()) {
      r = check_rho_table_file(o.table);
      label = "table " + o.table;
    } else {
      const RhoFunction f = RhoFunction::from_name(o.family, o.k);
      r = check_r1(f, o.grid);
      label = o.family + " k=" + CLI::detail::to_string(o.k);
    }
  } catch (const InputError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  } catch (const ArgumentError& e) {
    return fail(err, kExitInputError, "input_error", e.what());
  }
  char buf[64];
  out << "rho: " << label << '\n';
  out << "grid_size: " << r.grid_size << '\n';
  out << "below_one_inside: " << (r.below_one_inside ? "true" : "false") << '\n';
  std::snprintf(buf, sizeof buf, "%.6g", r.max_second_difference);
  out << "max_second_difference_log_tail: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6g", r.max_outside_deviation);
  out << "max_outside_deviation: " << buf << '\n';
  out << "r1: " << (r.holds ? "holds" : "fails") << '\n';
  return r.holds ? kExitOk : kExitClaimFailed;
}

}  // namespace

Json fit_report_json(const FitReportInput& in) {
  const FitResult& f = *in.fit;
  const InferenceReport& inf = *in.inference;
  const InferenceConstants& c = inf.constants;
  Json j;
  j["schema_version"] = kFitSchemaVersion;
  j["model"] = in.model_name;
  j["n"] = in.data->n();
  j["q"] = in.model->q();
  j["columns"] = in.columns;
  j["settings"] = {{"k0", in.config->rho0.k()},
                   {"k1", in.config->rho1.k()},
                   {"delta", in.config->delta},
                   {"seed", in.config->seed},
                   {"n_subsamples", in.config->n_subsamples}};
  j["sigma"] = f.sigma;
  j["beta_mm"] = to_json(f.xi_mm.beta);
  j["alpha_mm"] = f.xi_mm.alpha;
  j["std_errors"] = to_json(inf.std_errors);
  j["V"] = to_json(inf.V);
  j["constants"] = {{"a00", c.a00}, {"a01", c.a01}, {"e00", c.e00}, {"e01", c.e01},
                    {"d0", c.d0},   {"b0", to_json(c.b0)}, {"A0", to_json(c.A0)}};
  j["xi_s"] = param_json(f.xi_s);
  j["xi_mm"] = param_json(f.xi_mm);
  j["diagnostics"] = {{"converged_s", f.converged_s},
                      {"converged_mm", f.converged_mm},
                      {"iterations_s", f.iterations_s},
                      {"iterations_mm", f.iterations_mm},
                      {"candidates_evaluated", f.candidates_evaluated},
                      {"singular_subsamples", f.singular_subsamples},
                      {"exact_fit", f.exact_fit},
                      {"objective_mm", f.objective_mm},
                      {"equation_residual", f.equations.max_abs()},
                      {"equations_ok", f.equations_ok},
                      {"influence_mean_norm", inf.influence_mean.norm()}};
  const IdentifiabilityReport& id = *in.identifiability;
  j["identifiability"] = {{"design_rank", id.design_rank},
                          {"design_cols", id.design_cols},
                          {"at_risk", id.at_risk},
                          {"dropped_columns", in.dropped},
                          {"warnings", id.warnings}};
  return j;
}

R1Report check_rho_table_file(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  if (table.rows.front().size() != 2) throw InputError("rho table must have two columns (t, rho)");
  std::vector<double> t;
  std::vector<double> rho;
  for (const auto& row : table.rows) {
    t.push_back(row[0]);
    rho.push_back(row[1]);
  }
  try {
    return check_r1_table(t, rho);
  } catch (const ArgumentError& e) {
    throw InputError(e.what());
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust MM regression: fitting, inference and simulation checks", "robustmm"};
  app.require_subcommand(1);

  FitOptions fo;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit an MM regression to a CSV file and print a JSON report");
  fit_cmd->add_option("--input", fo.input, "CSV file")->required();
  fit_cmd->add_option("--y-col", fo.y_col, "Response column (header name or 1-based index)")->capture_default_str();
  fit_cmd->add_option("--x-cols", fo.x_cols, "Comma-separated regressor columns (default: all others)");
  fit_cmd->add_option("--model", fo.model, "Regression function: linear or exp")->capture_default_str();
  fit_cmd->add_option("--k0", fo.k0, "Bisquare constant of the S-scale")->capture_default_str();
  fit_cmd->add_option("--k1", fo.k1, "Bisquare constant of the MM step")->capture_default_str();
  fit_cmd->add_option("--delta", fo.delta, "M-scale level")->capture_default_str();
  fit_cmd->add_option("--seed", fo.seed, "Subsampling seed")->capture_default_str();
  fit_cmd->add_option("--subsamples", fo.subsamples, "Elemental subsamples")->capture_default_str();
  fit_cmd->add_option("--threads", fo.threads, "Worker threads (0: ROBUSTMM_THREADS or hardware)");
  fit_cmd->add_option("--out", fo.out, "Write the report here instead of stdout");
  fit_cmd->add_flag("--metadata", fo.metadata, "Add a metadata block (timestamp, threads)");

  SimulateOptions so;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo scenario");
  sim_cmd->add_option("--scenario", so.scenario, "Scenario file")->required();
  sim_cmd->add_option("--out", so.out, "JSON report path (stdout if omitted)");
  sim_cmd->add_option("--csv", so.csv, "Per-replication CSV path (default: --out with .csv)");
  sim_cmd->add_option("--seed", so.seed, "Override the scenario seed");
  sim_cmd->add_option("--replications", so.replications, "Override the replication count");
  sim_cmd->add_option("--threads", so.threads, "Worker threads (0: scenario, ROBUSTMM_THREADS or hardware)");
  sim_cmd->add_flag("--metadata", so.metadata, "Add a metadata block (timestamp, threads)");

  CheckRhoOptions co;
  CLI::App* rho_cmd = app.add_subcommand("check-rho", "Check condition R1 for a rho-function");
  rho_cmd->add_option("--family", co.family, "rho family (bisquare)")->capture_default_str();
  rho_cmd->add_option("--k", co.k, "Tuning constant")->capture_default_str();
  rho_cmd->add_option("--table", co.table, "Two-column CSV of (t, rho) at t >= 0 instead of a family");
  rho_cmd->add_option("--grid", co.grid, "Interior grid size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    return fail(err, kExitInputError, "usage_error", e.what());
  }

  if (fit_cmd->parsed()) return cmd_fit(fo, out, err);
  if (sim_cmd->parsed()) return cmd_simulate(so, out, err);
  return cmd_check_rho(co, out, err);
}

}  // namespace robustmm
