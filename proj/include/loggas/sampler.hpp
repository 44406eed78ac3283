#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loggas/equilibrium.hpp"
#include "loggas/funcspace.hpp"

namespace loggas {

enum class SamplerMethod
{
  tridiagonal,
  mala
};

std::string to_string(SamplerMethod m);
SamplerMethod sampler_method_from_string(const std::string& s);

struct MalaMeta
{
  std::size_t steps = 0;
  double step_size = 0.0;
  double acceptance_rate = 0.0;
  /// acceptance below 0.1: step size too large
  bool low_acceptance = false;
};

struct EnsembleSample
{
  std::vector<double> lambdas;
  std::size_t n = 0;
  double beta = 0.0;
  SamplerMethod method = SamplerMethod::tridiagonal;
  std::uint64_t seed = 0;
  std::optional<MalaMeta> mala_meta;
};

//! Replicates stored row-major (reps x n).  Replicate r has seed
//! seeds[r]; for MALA batches this is the seed of the chain it came from.
struct SampleBatch
{
  std::size_t n = 0;
  double beta = 0.0;
  std::optional<SamplerMethod> method;
  std::uint64_t master_seed = 0;
  std::vector<double> data;
  std::vector<std::uint64_t> seeds;
  std::optional<MalaMeta> mala_meta;

  std::size_t reps() const { return n == 0 ? 0 : data.size() / n; }
  std::span<const double> replicate(std::size_t r) const { return {data.data() + r * n, n}; }
  std::span<double> replicate(std::size_t r) { return {data.data() + r * n, n}; }
  EnsembleSample sample(std::size_t r) const;
};

/// Counter-based stream seed for item `index` of `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Worker count used when a function is passed threads = 0.
void set_default_threads(unsigned threads);
unsigned default_threads();

/// Returned by energy() for coincident coordinates.
inline constexpr double kCollisionEnergy = std::numeric_limits<double>::infinity();

/// H_n = sum_{i<j} log 1/|l_i - l_j| + n_scale sum V(l_i).
double energy(const Potential& p, std::span<const double> lambdas, std::size_t n_scale);

/// Tridiagonal beta-Hermite draw rescaled to the density
/// |Delta|^beta exp(-beta n sum l^2).
EnsembleSample sample_gbe(std::size_t n, double beta, std::uint64_t seed);

/// Replicates first .. first + reps - 1 of the batch keyed by master_seed.
SampleBatch sample_gbe_batch(std::size_t n,
                             double beta,
                             std::size_t reps,
                             std::uint64_t master_seed,
                             unsigned threads = 0,
                             std::size_t first = 0);

/// Default step size 0.1 / (beta n^2).
double default_step_size(std::size_t n, double beta);

/// `steps` MALA steps from `init` (default: midpoint quantiles of mu_V).
EnsembleSample sample_mala(const Potential& p,
                           std::size_t n,
                           double beta,
                           std::size_t steps,
                           double step_size,
                           std::uint64_t seed,
                           std::optional<std::vector<double>> init = std::nullopt);

struct MalaBatchConfig
{
  double step_size = 0.0; // 0: default_step_size
  std::size_t burn_in_sweeps_per_n = 50;
  std::size_t thinning_per_n = 5;
  std::size_t chains = 32;
};

/// Independent chains started at the midpoint quantiles of eq, each
/// contributing a contiguous run of thinned states.
SampleBatch sample_mala_batch(const Equilibrium& eq,
                              std::size_t n,
                              double beta,
                              std::size_t reps,
                              std::uint64_t master_seed,
                              const MalaBatchConfig& cfg = {},
                              unsigned threads = 0);

/// L F for F = sum f(l_i):
///   sum f'' - beta n sum V' f' + (beta/2) sum_{i != j} (f'_i - f'_j)/(l_i - l_j).
double apply_generator(const Potential& p,
                       const ChebSeries& fp,
                       const ChebSeries& fpp,
                       std::span<const double> lambdas,
                       double beta,
                       std::size_t n);
double apply_generator(const Potential& p,
                       const ChebSeries& f,
                       std::span<const double> lambdas,
                       double beta,
                       std::size_t n);

/// Gamma[sum phi, sum psi] = sum phi'(l_i) psi'(l_i), given fp = phi', gp = psi'.
double carre_du_champ(const ChebSeries& fp, const ChebSeries& gp, std::span<const double> lambdas);

struct IbpResult
{
  double residual = 0.0;
  double std_error = 0.0;
  double gamma_mean = 0.0;
  double f_lg_mean = 0.0;
};

/// Monte Carlo E[Gamma[F, G]] + E[F L G] over the batch with batch-means
/// standard errors (F, G centred linear statistics of f, g).
IbpResult ibp_check(const Potential& p, const ChebSeries& f, const ChebSeries& g, const SampleBatch& batch);

/// Runs body(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace loggas
