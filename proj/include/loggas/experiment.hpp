#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "loggas/clt_engine.hpp"
#include "loggas/equilibrium.hpp"
#include "loggas/metrics.hpp"
#include "loggas/sampler.hpp"

namespace loggas {

inline constexpr const char* kReportVersion = "v1";

struct ExperimentConfig
{
  std::string potential = "poly:0,0,1";
  double delta = kDefaultDelta;
  double beta = 2.0;
  std::vector<std::string> xis;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 0;
  SamplerMethod sampler = SamplerMethod::tridiagonal;
  MalaBatchConfig mala;
  double p = 1.0;
  std::uint64_t seed = 0;
  std::set<std::string> metrics{"w1", "tv"};
  /// > 0: test functions are convolved with the bump kernel at this scale
  double mollify_eps = 0.0;
  double rigidity_eps = 0.1;
  std::size_t bootstrap_resamples = 100;
  std::string output = "out";
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Field-level parsing and invariant checks only; no numerics.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// "v1:" followed by the FNV-1a hash of the canonical config (output path excluded).
std::string config_hash(const ExperimentConfig& cfg);

/// Test function from a spec string on U.  Besides "poly:" and "cheb:" this
/// accepts "abspow:c,a" for |x - c|^a, which needs mollify_eps > 0.
ChebSeries build_test_function(const std::string& spec, const Equilibrium& eq, double mollify_eps);

struct ValidatedExperiment
{
  ExperimentConfig cfg;
  Equilibrium eq;
  std::vector<ChebSeries> xis;
  Prediction prediction;
};

/// Parses raw JSON text, fits every function spec, builds the equilibrium and
/// the prediction.  Each failure carries its own error code.
ValidatedExperiment validate_config(const std::string& raw);
ValidatedExperiment validate_config(const ExperimentConfig& cfg);

struct ReportOptions
{
  double p = 1.0;
  double rigidity_eps = 0.1;
  std::set<std::string> metrics{"w1", "tv"};
  std::size_t bootstrap_resamples = 100;
  std::uint64_t seed = 0;
};

/// prediction, empirical, stein, distances and diagnostics blocks for one batch.
nlohmann::json clt_report(const SteinContext& ctx,
                          const Prediction& pred,
                          const SampleBatch& batch,
                          const ReportOptions& opts);

struct RunResult
{
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// Full pipeline over the n-grid.  Sample batches are cached under
/// <out>/cache keyed by a content hash.
RunResult run_experiment(const ValidatedExperiment& exp, const std::filesystem::path& out, unsigned threads = 0);

/// Distance series of one kind ("w1", "wp", "tv", "density_sup_r0", ...) read
/// from report files.  Refuses reports with different versions or config hashes.
DistanceReport rates_from_reports(const std::vector<std::filesystem::path>& reports, const std::string& kind);

/// CSV columns n, distance, stderr, slope, slope_stderr.
void write_rates_csv(const std::filesystem::path& path, const DistanceReport& r);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace loggas
