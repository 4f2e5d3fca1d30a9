#include "robustmm/cli.hpp"
#include "robustmm/json_writer.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace robustmm;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "robustmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(ROBUSTMM_TEST_DATA) + "/" + name; }

std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::path(ROBUSTMM_BINARY_DIR) / "cli_scratch";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string write(const std::string& name, const std::string& text) {
  const std::string path = scratch(name);
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool single_line(const std::string& s) { return !s.empty() && s.find('\n') == s.size() - 1; }

}  // namespace

TEST_CASE("fit writes the documented report", "[cli]") {
  const Run r = cli({"fit", "--input", data("fit_small.csv"), "--seed", "7", "--subsamples", "200"});
  REQUIRE(r.code == kExitOk);
  const Json j = Json::parse(r.out);
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  REQUIRE(keys == std::vector<std::string>{"schema_version", "model", "n", "q", "columns", "settings", "sigma",
                                           "beta_mm", "alpha_mm", "std_errors", "V", "constants", "xi_s", "xi_mm",
                                           "diagnostics", "identifiability"});
  REQUIRE(j["schema_version"] == kFitSchemaVersion);
  REQUIRE(j["std_errors"].size() == 3);
  REQUIRE(j["diagnostics"]["equations_ok"].get<bool>());
  REQUIRE(j["identifiability"]["warnings"].empty());
}

TEST_CASE("fit output matches the golden file", "[cli][golden]") {
  const Run r = cli({"fit", "--input", data("fit_small.csv"), "--seed", "7", "--subsamples", "200"});
  REQUIRE(r.code == kExitOk);
  REQUIRE(r.out == slurp(data("fit_small.golden.json")));
}

TEST_CASE("fit is byte-identical across runs and thread counts", "[cli][determinism]") {
  const Run a = cli({"fit", "--input", data("fit_small.csv"), "--threads", "1"});
  const Run b = cli({"fit", "--input", data("fit_small.csv"), "--threads", "4"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(a.out == b.out);
  const Run m = cli({"fit", "--input", data("fit_small.csv"), "--metadata"});
  Json j = Json::parse(m.out);
  REQUIRE(j.contains("metadata"));
  j.erase("metadata");
  REQUIRE(to_json_text(j) == a.out);
}

TEST_CASE("fit input errors exit 3 with one stderr line", "[cli]") {
  const std::string nan = write("nan.csv", "y,x\n1,2\n2,3\n3,nan\n4,5\n");
  Run r = cli({"fit", "--input", nan});
  REQUIRE(r.code == kExitInputError);
  REQUIRE(single_line(r.err));
  REQUIRE(r.err.rfind("robustmm: input_error: ", 0) == 0);
  REQUIRE(r.err.find("line 4") != std::string::npos);
  REQUIRE(r.err.find("column x") != std::string::npos);

  r = cli({"fit", "--input", scratch("missing.csv")});
  REQUIRE(r.code == kExitInputError);
  r = cli({"fit", "--input", data("fit_small.csv"), "--x-cols", "x7"});
  REQUIRE(r.code == kExitInputError);
  r = cli({"fit", "--input", data("fit_small.csv"), "--model", "cubic"});
  REQUIRE(r.code == kExitInputError);
  r = cli({"fit", "--input", data("fit_small.csv"), "--delta", "1.5"});
  REQUIRE(r.code == kExitInputError);
  r = cli({"fit"});
  REQUIRE(r.code == kExitInputError);
  REQUIRE(r.err.rfind("robustmm: usage_error: ", 0) == 0);
}

TEST_CASE("constant column gives a warning, not a failure", "[cli]") {
  std::string text = "y,x,c\n";
  for (int i = 0; i < 30; ++i) {
    const double x = i * 0.37 - 5.0;
    text += std::to_string(1.0 + 2.0 * x + ((i * 7) % 5 - 2) * 0.3) + "," + std::to_string(x) + ",4\n";
  }
  const Run r = cli({"fit", "--input", write("const.csv", text)});
  REQUIRE(r.code == kExitOk);
  const Json j = Json::parse(r.out);
  REQUIRE(j["identifiability"]["dropped_columns"] == Json::array({"c"}));
  REQUIRE_FALSE(j["identifiability"]["warnings"].empty());
  REQUIRE(j["columns"] == Json::array({"x"}));
}

TEST_CASE("exact fit is a fit error", "[cli]") {
  std::string text = "y,x\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i < 8 ? 3.0 * i : 50.0 + i) + "," + std::to_string(i) + "\n";
  const Run r = cli({"fit", "--input", write("exact.csv", text)});
  REQUIRE(r.code == kExitFitError);
  REQUIRE(single_line(r.err));
  REQUIRE(r.err.rfind("robustmm: fit_error: ", 0) == 0);
}

TEST_CASE("check-rho", "[cli]") {
  REQUIRE(cli({"check-rho", "--family", "bisquare", "--k", "1.547"}).code == kExitOk);
  REQUIRE(cli({"check-rho", "--family", "bisquare", "--k", "4.685"}).code == kExitOk);
  REQUIRE(cli({"check-rho", "--table", data("rho_bisquare.csv")}).code == kExitOk);
  const Run bad = cli({"check-rho", "--table", data("rho_corrupted.csv")});
  REQUIRE(bad.code == kExitClaimFailed);
  REQUIRE(bad.out.find("r1: fails") != std::string::npos);
  REQUIRE(cli({"check-rho", "--family", "huber", "--k", "1.3"}).code == kExitInputError);
  REQUIRE(cli({"check-rho", "--family", "bisquare", "--k", "-1"}).code == kExitInputError);
  REQUIRE(cli({"check-rho", "--table", write("rho_bad.csv", "t,rho\n0.5,0.1\n1,1\n")}).code == kExitInputError);
}

TEST_CASE("simulate", "[cli]") {
  const std::string cfg = write("tiny.cfg",
                                "name = tiny\nclaims = contamination\nmodel = linear\np = 1\nbeta0 = 1\n"
                                "sample_sizes = 40\nreplications = 3\nfit.n_subsamples = 30\n"
                                "contamination.fractions = 0.1\nseed = 9\n");
  const Run a = cli({"simulate", "--scenario", cfg, "--out", scratch("tiny_a.json"), "--threads", "1"});
  const Run b = cli({"simulate", "--scenario", cfg, "--out", scratch("tiny_b.json"), "--threads", "3"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  REQUIRE(a.err == "robustmm: contamination: pass\n");
  REQUIRE(slurp(scratch("tiny_a.json")) == slurp(scratch("tiny_b.json")));
  REQUIRE(slurp(scratch("tiny_a.csv")) == slurp(scratch("tiny_b.csv")));
  REQUIRE_FALSE(slurp(scratch("tiny_a.csv")).empty());

  const Run zero = cli({"simulate", "--scenario", cfg, "--replications", "0"});
  REQUIRE(zero.code == kExitInputError);
  REQUIRE(zero.err.find("'replications'") != std::string::npos);
  REQUIRE(single_line(zero.err));

  const Run bad = cli({"simulate", "--scenario", write("bad.cfg", "claims = consistency\nfit.delta = 2\n")});
  REQUIRE(bad.code == kExitInputError);
  REQUIRE(bad.err.rfind("robustmm: scenario_error: ", 0) == 0);
}

TEST_CASE("help exits cleanly", "[cli]") {
  const Run r = cli({"--help"});
  REQUIRE(r.code == kExitOk);
  REQUIRE(r.out.find("simulate") != std::string::npos);
}
