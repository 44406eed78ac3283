#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loggas/clt_engine.hpp"

namespace loggas {

inline constexpr std::size_t kKdeGrid = 4096;

enum class DistanceKind
{
  w1,
  wp,
  tv,
  density_sup
};

std::string to_string(DistanceKind k);
DistanceKind distance_kind_from_string(const std::string& s);

struct DistanceReport
{
  std::vector<std::size_t> n_grid;
  std::vector<double> distance;
  std::vector<double> stderr_;
  DistanceKind kind = DistanceKind::w1;
  double order = 1.0; // p for wp, r for density_sup
  double fitted_slope = 0.0;
  double slope_stderr = 0.0;
};

nlohmann::json to_json(const DistanceReport& r);

/// Quantile coupling against N(m, sigma^2) at levels (i - 1/2)/R.
double wasserstein_p(std::span<const double> xs, double m, double sigma, double p);

/// (1/2) L1 distance between a Gaussian KDE and N(m, sigma^2).  bandwidth <= 0
/// selects Silverman's rule.
double tv_kde(std::span<const double> xs, double m, double sigma, double bandwidth = 0.0);

struct DensitySup
{
  double value = 0.0;
  double bandwidth = 0.0;
  bool degenerate = false;
};

/// sup over the KDE grid of |d^r/dx^r (f_h - phi_{m, sigma^2})|, r <= 3.
DensitySup density_sup_distance(std::span<const double> xs, double m, double sigma, int r);

/// Silverman's rule 0.9 min(sd, IQR/1.34) R^{-1/5}.
double silverman_bandwidth(std::span<const double> xs);

struct RateFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Weighted least squares of log d on log n, weights (d / se)^2.  Unit weights
/// when any se is zero.
RateFit fit_rate(std::span<const double> n_grid, std::span<const double> distances, std::span<const double> stderrs);

/// Sliced lower-bound surrogate for W_p in d >= 2.  samples are R x d row-major.
double projected_wp(std::span<const double> samples,
                    const Prediction& pred,
                    double p,
                    std::size_t n_projections,
                    std::uint64_t seed = 0);

/// Same with explicit unit directions (each of length d).
double projected_wp(std::span<const double> samples,
                    const Prediction& pred,
                    double p,
                    const std::vector<std::vector<double>>& directions);

struct KsResult
{
  double statistic = 0.0;
  double p_value = 0.0;
};

/// One-sample Kolmogorov-Smirnov test against N(m, sigma^2).
KsResult ks_normal_test(std::span<const double> xs, double m, double sigma);

/// Asymptotic Kolmogorov survival function P(K > x).
double kolmogorov_survival(double x);

/// Bootstrap standard error of stat over `resamples` resamples.
double bootstrap_stderr(std::span<const double> xs,
                        const std::function<double(std::span<const double>)>& stat,
                        std::size_t resamples,
                        std::uint64_t seed);

} // namespace loggas
