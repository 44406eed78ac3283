#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "loggas/equilibrium.hpp"
#include "loggas/funcspace.hpp"
#include "loggas/master_operator.hpp"
#include "loggas/sampler.hpp"

namespace loggas {

inline constexpr std::size_t kMaxDimension = 4;

struct Prediction
{
  /// limiting mean from the boundary-term formula
  Eigen::VectorXd m;
  /// primitive-level centering (1/2 - 1/beta) <f_i'', mu_V>
  Eigen::VectorXd m_f;
  Eigen::MatrixXd C;
  Eigen::MatrixXd Sigma;
  double A_beta = 0.0;
  /// NaN when d > 1
  double a_beta = 0.0;
  double beta = 0.0;
  double p = 1.0;

  std::size_t dim() const { return static_cast<std::size_t>(m.size()); }
};

/// E|N|^p)^{1/p} for a standard Gaussian in R^d.
double gaussian_lp_norm(std::size_t d, double p);

/// sum xi(l_i) - n int xi dmu_V.
double linear_statistic(const ChebSeries& xi, const Equilibrium& eq, std::span<const double> lambdas);

/// m, C, Sigma and the prefactors.  Throws freeness_violated when C is
/// (numerically) singular.
Prediction predict(const std::vector<ChebSeries>& xis, const Equilibrium& eq, double beta, double p = 1.0);

/// -(1/beta) <xi_i' psi_j, mu_V>.
Eigen::MatrixXd covariance_from_inversion(const std::vector<ChebSeries>& xis,
                                          const std::vector<InversionData>& invs,
                                          const Equilibrium& eq,
                                          double beta);

//! Per-test-function data reused across configurations.
struct SteinContext
{
  const Equilibrium* eq = nullptr;
  double beta = 0.0;
  std::vector<ChebSeries> xis;
  std::vector<ChebSeries> xi1;
  std::vector<InversionData> invs;
  std::vector<double> xi_mean; // int xi dmu_V
  std::vector<double> f_mean;  // int f dmu_V
  std::vector<double> m_f;
  std::vector<MeasureMoments> psi_moments;
  std::vector<double> tv_means;
};

SteinContext make_stein_context(const std::vector<ChebSeries>& xis, const Equilibrium& eq, double beta);

struct SteinTerms
{
  Eigen::VectorXd X;
  Eigen::VectorXd F;
  Eigen::VectorXd LF; // L F, not divided by n
  Eigen::VectorXd Z;
  Eigen::MatrixXd GammaXF;
  double master_residual = 0.0;
};

/// Decomposition X = m_f + LF/n + Z for one configuration.  Throws
/// outlier_configuration when some |l_i| leaves U.
SteinTerms stein_terms(const SteinContext& ctx, std::span<const double> lambdas);
SteinTerms stein_terms(const std::vector<ChebSeries>& xis,
                       const Equilibrium& eq,
                       double beta,
                       std::span<const double> lambdas);

enum class BoundMode
{
  wasserstein,
  tv
};

/// Stein bound from estimated ||C - Gamma||_{L^p} and ||Z||_{L^p}.  In tv mode
/// gamma_dev is read as ||sigma^2 - Gamma||_{L^1}.
double stein_bound(const Prediction& pred, double gamma_dev, double z_norm, double p, BoundMode mode);

//! Batch reduction of the decomposition.
struct SteinBatchSummary
{
  std::size_t reps = 0;
  std::size_t outliers = 0;
  std::size_t used = 0;
  /// used x d, row-major
  std::vector<double> X;
  std::vector<double> Z;
  Eigen::VectorXd x_mean;
  Eigen::MatrixXd x_cov;
  Eigen::MatrixXd gamma_mean;
  double gamma_dev = 0.0; // ||C - Gamma||_{L^p}
  double gamma_dev_se = 0.0;
  double z_norm = 0.0; // ||Z||_{L^p}
  double z_norm_se = 0.0;
  /// d = 1 only: ||sigma - Gamma||_{L^p}, the literal reading of the TV bound
  double gamma_dev_sigma = 0.0;
  double master_residual_max = 0.0;
  /// Var(GammaXF_11) over replicates
  double gamma11_var = 0.0;
};

SteinBatchSummary stein_batch(const SteinContext& ctx, const Prediction& pred, const SampleBatch& batch, double p);

struct RigidityReport
{
  double envelope_violation_rate = 0.0;
  double outlier_rate = 0.0;
  double max_abs_lambda = 0.0;
};

RigidityReport rigidity_report(const Equilibrium& eq, const SampleBatch& batch, double eps);

/// (eps, P(<(xi')^2, mu_n> <= eps)) per grid point.
std::vector<std::pair<double, double>> negative_moment_probe(const SampleBatch& batch,
                                                             const ChebSeries& xi_prime,
                                                             std::span<const double> eps_grid);

struct AlphaRegularity
{
  std::vector<double> eps;
  std::vector<double> measure;
  /// |measure(N) - measure(N/2)| for the two grid resolutions
  std::vector<double> richardson_gap;
  double slope = 0.0;
};

/// Leb{x in domain : |xi'(x)| <= eps} by 10^5-point grid counting.
AlphaRegularity alpha_regularity(const ChebSeries& xi_prime, std::span<const double> eps_grid, Interval domain);

nlohmann::json to_json(const Prediction& pred);

} // namespace loggas
