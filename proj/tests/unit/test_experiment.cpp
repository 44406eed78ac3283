#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "loggas/errors.hpp"
#include "loggas/experiment.hpp"

using namespace loggas;
namespace fs = std::filesystem;

namespace {

std::string minimal_config()
{
  return R"({"potential": "poly:0,0,1", "beta": 2, "xis": ["cheb:0,1"], "n_grid": [8, 16, 32], "reps": 200, "seed": 7})";
}

std::string code_of(const std::string& raw)
{
  try {
    validate_config(raw);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name)
{
  const auto p = fs::temp_directory_path() / ("loggas_test_" + name);
  fs::remove_all(p);
  return p;
}

} // namespace

TEST_CASE("validate_config accepts a minimal Gaussian config")
{
  const auto v = validate_config(minimal_config());
  CHECK(v.xis.size() == 1);
  CHECK(v.prediction.C(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(v.cfg.sampler == SamplerMethod::tridiagonal);
}

TEST_CASE("validate_config error codes")
{
  CHECK(code_of("{not json") == "config_parse");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,1"], "n_grid": [64, 32], "reps": 200})") == "n_grid_not_increasing");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,1"], "n_grid": [], "reps": 200})") == "n_grid_empty");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 99})") == "reps_too_small");
  CHECK(code_of(R"({"beta": 0, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 100})") == "beta_nonpositive");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,x"], "n_grid": [8], "reps": 100})") == "unparseable_spec");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,1", "cheb:0,2"], "n_grid": [8], "reps": 100})") ==
        "freeness_violated");
  CHECK(code_of(R"({"beta": 2, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 100, "sampler": "hmc"})") ==
        "unknown_sampler");
  CHECK(code_of(R"({"xis": ["cheb:0,1"], "n_grid": [8], "reps": 100})") == "config_field");
  CHECK(code_of(R"({"potential": "poly:0,0,-0.5,0,1", "beta": 2, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 100})") ==
        "sampler_potential_mismatch");
  CHECK(code_of(R"({"potential": "poly:0,0,-0.5,0,1", "sampler": "mala", "beta": 2, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 100})") ==
        "");

  try {
    validate_config(R"({"potential": "poly:0,0,1,0,1", "beta": 2, "xis": ["cheb:0,1"], "n_grid": [8], "reps": 100, "sampler": "mala"})");
    FAIL("expected support_not_normalized");
  } catch (const Error& e) {
    CHECK(e.code() == "support_not_normalized");
    CHECK(e.exit_code() == 2);
    const std::string msg = e.what();
    CHECK(msg.find("support not normalized") != std::string::npos);
    CHECK(msg.find("--normalize") != std::string::npos);
  }
  try {
    validate_config(R"({"beta": 2, "xis": ["cheb:0,1", "cheb:0,0,1,"], "n_grid": [8], "reps": 100})");
    FAIL("expected unparseable_spec");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("xis[1]") != std::string::npos);
  }
}

TEST_CASE("config hash is versioned and ignores the output path")
{
  auto c = config_from_json(nlohmann::json::parse(minimal_config()));
  const auto h = config_hash(c);
  CHECK(h.rfind("v1:", 0) == 0);
  c.output = "elsewhere";
  CHECK(config_hash(c) == h);
  c.seed = 8;
  CHECK(config_hash(c) != h);
}

TEST_CASE("mollified test functions")
{
  const auto v = validate_config(
    R"({"beta": 2, "xis": ["abspow:0.3,1.5"], "n_grid": [8], "reps": 100, "mollify_eps": 0.1})");
  const auto& xi = v.xis[0];
  CHECK(xi.interval() == v.eq.u_interval());
  // ||xi - xi_eps|| <= ||xi'|| eps int |y| eta, with ||xi'|| = 1.5 sqrt(1.4) on U
  const double bound = 1.5 * std::sqrt(1.4) * 0.1 * BumpKernel::instance().abs_moment();
  double err = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = -1.1 + 2.2 * i / 4000.0;
    err = std::max(err, std::abs(xi(x) - std::pow(std::abs(x - 0.3), 1.5)));
  }
  CHECK(err > 0.0);
  CHECK(err <= bound);
  CHECK(code_of(R"({"beta": 2, "xis": ["abspow:0.3,1.5"], "n_grid": [8], "reps": 100})") == "unparseable_spec");
}

TEST_CASE("run_experiment: exact-Gaussian sentinel, determinism and caching")
{
  const auto exp = validate_config(minimal_config());
  const auto out1 = scratch("run1");
  const auto out2 = scratch("run2");
  const auto r1 = run_experiment(exp, out1, 1);
  const auto r2 = run_experiment(exp, out2, 3);
  REQUIRE(r1.files.size() == r2.files.size());
  for (std::size_t i = 0; i < r1.files.size(); ++i) {
    CHECK(r1.files[i].filename() == r2.files[i].filename());
    CHECK(slurp(r1.files[i]) == slurp(r2.files[i]));
  }
  for (std::size_t n : {8, 16, 32}) {
    const auto rep = read_json_file(out1 / ("report_n" + std::to_string(n) + ".json"));
    CHECK(rep["config_hash"] == config_hash(exp.cfg));
    CHECK(rep["stein"]["bound_wasserstein"].get<double>() < 1e-12);
    CHECK(rep["stein"]["bound_tv"].get<double>() < 1e-12);
    CHECK(rep["stein"]["master_residual_max"].get<double>() < 1e-10);
    CHECK(rep["distances"].contains("w1"));
    CHECK(rep["distances"].contains("tv"));
  }
  CHECK(fs::exists(out1 / "rates_w1.csv"));
  CHECK(fs::exists(out1 / "distances.csv"));

  // rerun into the same directory hits the cache and stays byte-identical
  const auto before = slurp(out1 / "report_n16.json");
  const auto stamp = fs::last_write_time(out1 / "cache" / read_json_file(out1 / "report_n16.json")["batch"]["file"].get<std::string>());
  run_experiment(exp, out1, 2);
  CHECK(slurp(out1 / "report_n16.json") == before);
  CHECK(fs::last_write_time(out1 / "cache" / read_json_file(out1 / "report_n16.json")["batch"]["file"].get<std::string>()) == stamp);

  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("rates_from_reports refuses mixed reports")
{
  const auto exp = validate_config(minimal_config());
  const auto out = scratch("rates");
  const auto res = run_experiment(exp, out, 1);
  std::vector<fs::path> reports;
  for (std::size_t n : {8, 16, 32}) {
    reports.push_back(out / ("report_n" + std::to_string(n) + ".json"));
  }
  const auto r = rates_from_reports(reports, "w1");
  CHECK(r.n_grid == std::vector<std::size_t>{8, 16, 32});
  CHECK(std::isfinite(r.fitted_slope));
  write_rates_csv(out / "r.csv", r);
  const auto csv = slurp(out / "r.csv");
  CHECK(csv.rfind("n,distance,stderr,slope,slope_stderr\n", 0) == 0);

  auto tampered = read_json_file(reports[1]);
  tampered["version"] = "v0";
  tampered["config_hash"] = "v0:0000000000000000";
  write_json_file(out / "old.json", tampered);
  try {
    rates_from_reports({reports[0], out / "old.json", reports[2]}, "w1");
    FAIL("expected mixed_versions");
  } catch (const Error& e) {
    CHECK(e.code() == "mixed_versions");
  }
  tampered["version"] = "v1";
  tampered["config_hash"] = "v1:0000000000000000";
  write_json_file(out / "other.json", tampered);
  try {
    rates_from_reports({reports[0], out / "other.json", reports[2]}, "w1");
    FAIL("expected mixed_configs");
  } catch (const Error& e) {
    CHECK(e.code() == "mixed_configs");
  }
  try {
    rates_from_reports({out / "missing.json"}, "w1");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.exit_code() == 4);
  }
  fs::remove_all(out);
}

TEST_CASE("run_experiment names the failing stage")
{
  auto exp = validate_config(minimal_config());
  const auto out = scratch("stage");
  fs::create_directories(out);
  // a directory where the report file should go makes the write stage fail
  fs::create_directories(out / "report_n8.json");
  try {
    run_experiment(exp, out, 1);
    FAIL("expected io failure");
  } catch (const Error& e) {
    CHECK(e.exit_code() == 4);
    CHECK(std::string(e.what()).find("stage 'write n=8'") != std::string::npos);
  }
  fs::remove_all(out);
}
