#include "loggas/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

std::atomic<unsigned> g_default_threads{0};

std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_sorted(std::span<const double> l)
{
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (!(l[i] > l[i - 1])) {
      throw numerical_failure("collision", "sampled coordinates are not strictly increasing");
    }
  }
}

// sum_{i<j} log(l_j - l_i) for sorted l, grouping factors to cut log calls.
double log_vandermonde(std::span<const double> l)
{
  constexpr int kBlock = 8;
  double acc = 0.0;
  const std::size_t n = l.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double prod = 1.0;
    int count = 0;
    for (std::size_t j = i + 1; j < n; ++j) {
      prod *= l[j] - l[i];
      if (++count == kBlock) {
        acc += std::log(prod);
        prod = 1.0;
        count = 0;
      }
    }
    acc += std::log(prod);
  }
  return acc;
}

struct MalaState
{
  std::vector<double> x;
  std::vector<double> grad; // grad log pi
  double log_pi = 0.0;
};

// log pi = -beta H_n, gradient -beta [n V'(l_i) - sum_{j != i} 1/(l_i - l_j)].
void evaluate(const Potential& p, double beta, std::size_t n_scale, MalaState& s)
{
  const std::size_t n = s.x.size();
  const double nd = static_cast<double>(n_scale);
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
  double conf = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    conf += p.v(s.x[i]);
    s.grad[i] = -nd * p.v1(s.x[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double gi = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double inv = 1.0 / (s.x[i] - s.x[j]);
      gi += inv;
      s.grad[j] -= inv;
    }
    s.grad[i] += gi;
  }
  for (double& g : s.grad) {
    g *= beta;
  }
  s.log_pi = -beta * (nd * conf - log_vandermonde(s.x));
}

bool ordered(std::span<const double> l)
{
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (!(l[i] - l[i - 1] >= 1e-12)) {
      return false;
    }
  }
  return true;
}

class MalaChain
{
public:
  MalaChain(const Potential& p, double beta, double h, std::uint64_t seed, std::vector<double> init)
    : p_(p)
    , beta_(beta)
    , h_(h)
    , rng_(seed)
  {
    if (!ordered(init)) {
      std::sort(init.begin(), init.end());
      if (!ordered(init)) {
        throw rejected_input("MALA initial state has coincident coordinates");
      }
    }
    n_ = init.size();
    cur_.x = std::move(init);
    cur_.grad.resize(n_);
    prop_.x.resize(n_);
    prop_.grad.resize(n_);
    if (h_ > 0.0) {
      evaluate(p_, beta_, n_, cur_);
    }
  }

  void run(std::size_t steps)
  {
    if (h_ <= 0.0) {
      steps_ += steps;
      accepted_ += steps;
      return;
    }
    const double noise = std::sqrt(2.0 * h_);
    for (std::size_t s = 0; s < steps; ++s) {
      ++steps_;
      for (std::size_t i = 0; i < n_; ++i) {
        prop_.x[i] = cur_.x[i] + h_ * cur_.grad[i] + noise * gauss_(rng_);
      }
      const double u = uniform_(rng_);
      if (!ordered(prop_.x)) {
        continue;
      }
      evaluate(p_, beta_, n_, prop_);
      double fwd = 0.0; // |y - x - h grad(x)|^2
      double bwd = 0.0; // |x - y - h grad(y)|^2
      for (std::size_t i = 0; i < n_; ++i) {
        const double a = prop_.x[i] - cur_.x[i] - h_ * cur_.grad[i];
        const double b = cur_.x[i] - prop_.x[i] - h_ * prop_.grad[i];
        fwd += a * a;
        bwd += b * b;
      }
      const double log_alpha = prop_.log_pi - cur_.log_pi + (fwd - bwd) / (4.0 * h_);
      if (std::log(u) < log_alpha) {
        std::swap(cur_, prop_);
        ++accepted_;
      }
    }
  }

  const std::vector<double>& state() const { return cur_.x; }

  MalaMeta meta() const
  {
    MalaMeta m;
    m.steps = steps_;
    m.step_size = h_;
    m.acceptance_rate = steps_ == 0 ? 1.0 : static_cast<double>(accepted_) / static_cast<double>(steps_);
    m.low_acceptance = m.acceptance_rate < 0.1;
    return m;
  }

private:
  const Potential& p_;
  double beta_;
  double h_;
  std::size_t n_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
  std::uniform_real_distribution<double> uniform_;
  MalaState cur_;
  MalaState prop_;
  std::size_t steps_ = 0;
  std::size_t accepted_ = 0;
};

std::vector<double> midpoint_quantiles(const Equilibrium& eq, std::size_t n)
{
  const auto q = quantiles(eq, 2 * n);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = q[2 * j];
  }
  return out;
}

// Gamma[F,G] + (F - mean F) L G per replicate, and F itself.
struct IbpTerms
{
  std::vector<double> gamma;
  std::vector<double> f;
  std::vector<double> lg;
};

double batch_means_stderr(std::span<const double> y)
{
  const std::size_t r = y.size();
  const std::size_t blocks = std::min<std::size_t>(50, r);
  if (blocks < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> means(blocks, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * r / blocks;
    const std::size_t hi = (b + 1) * r / blocks;
    for (std::size_t i = lo; i < hi; ++i) {
      means[b] += y[i];
    }
    means[b] /= static_cast<double>(hi - lo);
  }
  double m = 0.0;
  for (double v : means) {
    m += v;
  }
  m /= static_cast<double>(blocks);
  double var = 0.0;
  for (double v : means) {
    var += (v - m) * (v - m);
  }
  var /= static_cast<double>(blocks - 1);
  return std::sqrt(var / static_cast<double>(blocks));
}

} // namespace

std::string to_string(SamplerMethod m)
{
  return m == SamplerMethod::tridiagonal ? "tridiagonal" : "mala";
}

SamplerMethod sampler_method_from_string(const std::string& s)
{
  if (s == "tridiagonal" || s == "gbe") {
    return SamplerMethod::tridiagonal;
  }
  if (s == "mala") {
    return SamplerMethod::mala;
  }
  throw rejected_input("unknown sampler '" + s + "' (expected gbe or mala)");
}

EnsembleSample SampleBatch::sample(std::size_t r) const
{
  EnsembleSample s;
  const auto l = replicate(r);
  s.lambdas.assign(l.begin(), l.end());
  s.n = n;
  s.beta = beta;
  s.method = method.value_or(SamplerMethod::tridiagonal);
  s.seed = r < seeds.size() ? seeds[r] : derive_seed(master_seed, r);
  s.mala_meta = mala_meta;
  return s;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
  return splitmix64(splitmix64(master) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

void set_default_threads(unsigned threads)
{
  g_default_threads = threads;
}

unsigned default_threads()
{
  const unsigned t = g_default_threads.load();
  if (t > 0) {
    return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body)
{
  if (threads == 0) {
    threads = default_threads();
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

double energy(const Potential& p, std::span<const double> lambdas, std::size_t n_scale)
{
  double acc = 0.0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    acc += static_cast<double>(n_scale) * p.v(lambdas[i]);
    for (std::size_t j = i + 1; j < lambdas.size(); ++j) {
      const double d = std::abs(lambdas[i] - lambdas[j]);
      if (d == 0.0) {
        return kCollisionEnergy;
      }
      acc -= std::log(d);
    }
  }
  return acc;
}

EnsembleSample sample_gbe(std::size_t n, double beta, std::uint64_t seed)
{
  if (n == 0 || !(beta > 0.0)) {
    throw rejected_input("sample_gbe needs n >= 1 and beta > 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = gauss(rng);
  }
  for (std::size_t i = 1; i < n; ++i) {
    // chi_{beta (n - i)} / sqrt(2)
    std::gamma_distribution<double> chi2(0.5 * beta * static_cast<double>(n - i), 2.0);
    sub[i - 1] = std::sqrt(chi2(rng) / 2.0);
  }
  EnsembleSample s;
  s.n = n;
  s.beta = beta;
  s.method = SamplerMethod::tridiagonal;
  s.seed = seed;
  const double kappa = 1.0 / std::sqrt(2.0 * beta * static_cast<double>(n));
  if (n == 1) {
    s.lambdas = {kappa * diag[0]};
    return s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw numerical_failure("eigensolver", "tridiagonal eigensolver did not converge");
  }
  s.lambdas.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.lambdas[i] = kappa * solver.eigenvalues()[static_cast<Eigen::Index>(i)];
  }
  std::sort(s.lambdas.begin(), s.lambdas.end());
  check_sorted(s.lambdas);
  return s;
}

SampleBatch sample_gbe_batch(std::size_t n,
                             double beta,
                             std::size_t reps,
                             std::uint64_t master_seed,
                             unsigned threads,
                             std::size_t first)
{
  SampleBatch b;
  b.n = n;
  b.beta = beta;
  b.method = SamplerMethod::tridiagonal;
  b.master_seed = master_seed;
  b.data.resize(reps * n);
  b.seeds.resize(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(master_seed, first + r);
    const auto s = sample_gbe(n, beta, seed);
    std::copy(s.lambdas.begin(), s.lambdas.end(), b.data.begin() + static_cast<std::ptrdiff_t>(r * n));
    b.seeds[r] = seed;
  });
  return b;
}

double default_step_size(std::size_t n, double beta)
{
  const double nd = static_cast<double>(n);
  return 0.1 / (beta * nd * nd);
}

EnsembleSample sample_mala(const Potential& p,
                           std::size_t n,
                           double beta,
                           std::size_t steps,
                           double step_size,
                           std::uint64_t seed,
                           std::optional<std::vector<double>> init)
{
  if (n == 0 || !(beta > 0.0) || steps == 0 || step_size < 0.0) {
    throw rejected_input("sample_mala needs n >= 1, beta > 0, steps >= 1, step_size >= 0");
  }
  std::vector<double> start;
  if (init) {
    if (init->size() != n) {
      throw rejected_input("initial state has the wrong length");
    }
    start = *init;
  } else {
    start = midpoint_quantiles(build_equilibrium(p), n);
  }
  MalaChain chain(p, beta, step_size, seed, std::move(start));
  chain.run(steps);
  EnsembleSample s;
  s.lambdas = chain.state();
  s.n = n;
  s.beta = beta;
  s.method = SamplerMethod::mala;
  s.seed = seed;
  s.mala_meta = chain.meta();
  return s;
}

SampleBatch sample_mala_batch(const Equilibrium& eq,
                              std::size_t n,
                              double beta,
                              std::size_t reps,
                              std::uint64_t master_seed,
                              const MalaBatchConfig& cfg,
                              unsigned threads)
{
  if (n == 0 || !(beta > 0.0) || reps == 0 || cfg.chains == 0) {
    throw rejected_input("sample_mala_batch needs n, reps, chains >= 1 and beta > 0");
  }
  const double h = cfg.step_size > 0.0 ? cfg.step_size : default_step_size(n, beta);
  const std::size_t chains = std::min(cfg.chains, reps);
  const auto init = midpoint_quantiles(eq, n);
  SampleBatch b;
  b.n = n;
  b.beta = beta;
  b.method = SamplerMethod::mala;
  b.master_seed = master_seed;
  b.data.resize(reps * n);
  b.seeds.resize(reps);
  std::vector<MalaMeta> metas(chains);
  parallel_for(chains, threads, [&](std::size_t c) {
    const std::size_t lo = c * reps / chains;
    const std::size_t hi = (c + 1) * reps / chains;
    const std::uint64_t seed = derive_seed(master_seed, c);
    MalaChain chain(eq.potential, beta, h, seed, init);
    chain.run(cfg.burn_in_sweeps_per_n * n);
    for (std::size_t r = lo; r < hi; ++r) {
      chain.run(std::max<std::size_t>(1, cfg.thinning_per_n * n));
      std::copy(chain.state().begin(), chain.state().end(), b.data.begin() + static_cast<std::ptrdiff_t>(r * n));
      b.seeds[r] = seed;
    }
    metas[c] = chain.meta();
  });
  MalaMeta total;
  total.step_size = h;
  double acc = 0.0;
  for (const auto& m : metas) {
    total.steps += m.steps;
    acc += m.acceptance_rate * static_cast<double>(m.steps);
  }
  total.acceptance_rate = total.steps == 0 ? 1.0 : acc / static_cast<double>(total.steps);
  total.low_acceptance = total.acceptance_rate < 0.1;
  b.mala_meta = total;
  return b;
}

double apply_generator(const Potential& p,
                       const ChebSeries& fp,
                       const ChebSeries& fpp,
                       std::span<const double> lambdas,
                       double beta,
                       std::size_t n)
{
  const std::size_t m = lambdas.size();
  std::vector<double> d1(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    d1[i] = fp(lambdas[i]);
    acc += fpp(lambdas[i]) - beta * static_cast<double>(n) * p.v1(lambdas[i]) * d1[i];
  }
  const double close = 0.02 * fp.interval().width();
  double pairs = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = lambdas[i] - lambdas[j];
      if (d == 0.0) {
        throw numerical_failure("collision", "apply_generator on coincident coordinates");
      }
      pairs += std::abs(d) < close ? divided_difference(fp, lambdas[i], lambdas[j]) : (d1[i] - d1[j]) / d;
    }
  }
  // sum over i != j counts each pair twice
  return acc + beta * pairs;
}

double apply_generator(const Potential& p,
                       const ChebSeries& f,
                       std::span<const double> lambdas,
                       double beta,
                       std::size_t n)
{
  const auto fp = cheb_derivative(f);
  return apply_generator(p, fp, cheb_derivative(fp), lambdas, beta, n);
}

double carre_du_champ(const ChebSeries& fp, const ChebSeries& gp, std::span<const double> lambdas)
{
  double acc = 0.0;
  for (double l : lambdas) {
    acc += fp(l) * gp(l);
  }
  return acc;
}

IbpResult ibp_check(const Potential& p, const ChebSeries& f, const ChebSeries& g, const SampleBatch& batch)
{
  const std::size_t reps = batch.reps();
  if (reps == 0) {
    throw rejected_input("ibp_check needs a non-empty batch");
  }
  const auto fp = cheb_derivative(f);
  const auto gp = cheb_derivative(g);
  const auto gpp = cheb_derivative(gp);
  IbpTerms t{std::vector<double>(reps), std::vector<double>(reps), std::vector<double>(reps)};
  parallel_for(reps, 0, [&](std::size_t r) {
    const auto l = batch.replicate(r);
    t.gamma[r] = carre_du_champ(fp, gp, l);
    double fs = 0.0;
    for (double x : l) {
      fs += f(x);
    }
    t.f[r] = fs;
    t.lg[r] = apply_generator(p, gp, gpp, l, batch.beta, batch.n);
  });
  double f_mean = 0.0;
  for (double v : t.f) {
    f_mean += v;
  }
  f_mean /= static_cast<double>(reps);
  std::vector<double> y(reps);
  IbpResult out;
  for (std::size_t r = 0; r < reps; ++r) {
    const double flg = (t.f[r] - f_mean) * t.lg[r];
    y[r] = t.gamma[r] + flg;
    out.gamma_mean += t.gamma[r];
    out.f_lg_mean += flg;
    out.residual += y[r];
  }
  out.gamma_mean /= static_cast<double>(reps);
  out.f_lg_mean /= static_cast<double>(reps);
  out.residual /= static_cast<double>(reps);
  out.std_error = batch_means_stderr(y);
  return out;
}

} // namespace loggas
