#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "loggas/equilibrium.hpp"
#include "loggas/funcspace.hpp"

namespace loggas {

/// Degree of the refit of psi on U.
inline constexpr std::size_t kInversionDegree = 160;
/// Off-support check points per side.
inline constexpr std::size_t kEdgePoints = 64;

struct InversionData
{
  ChebSeries psi;  // psi = f' on U
  double c_xi = 0.0;
  ChebSeries psi1; // psi' = f''
  ChebSeries f;    // f(0) = 0
  ChebSeries xi;
  /// sup over the 512-point grid of U of |Theta_V psi - xi - c_xi|
  double residual = 0.0;
};

/// Moments of mu_V in the reference coordinate of `interval`, exact for
/// integrands of degree up to 2 * kQuadratureDegree - 1 - deg S.
MeasureMoments equilibrium_moments(const Equilibrium& eq, Interval interval, std::size_t max_degree);

/// T_V(psi)(x) = int (psi(x) - psi(y)) / (x - y) mu_V(dy).
double apply_t_v(const Equilibrium& eq, const ChebSeries& psi, double x);
std::vector<double> apply_t_v(const Equilibrium& eq, const ChebSeries& psi, std::span<const double> xs);

/// Theta_V psi = -V' psi + T_V psi.
double apply_theta_v(const Equilibrium& eq, const ChebSeries& psi, double x);
std::vector<double> apply_theta_v(const Equilibrium& eq, const ChebSeries& psi, std::span<const double> xs);

/// int U_k(y) mu_sc(dy) / (x - y) for |x| > 1.
double semicircle_stieltjes_u(std::size_t k, double x);

/// m_V(x) = int mu_V(dy) / (x - y) for |x| > 1.
double equilibrium_stieltjes(const Equilibrium& eq, double x);

/// Solves Theta_V psi = xi + c_xi on U.  Throws near_critical_edge when
/// m_V - V' nearly vanishes off the support.
InversionData invert_theta(const Equilibrium& eq, const ChebSeries& xi);

/// T_n(f)(x) with fp = f' (diagonal term f''(lambda_i)).
double apply_t_n(const ChebSeries& fp, std::span<const double> lambdas, double x);

/// <T_n f' - T_V f', nu_n - n mu_V>.
double quadratic_remainder(const Equilibrium& eq, const ChebSeries& fp, std::span<const double> lambdas);

/// Same, reusing precomputed mu_V moments in fp's coordinate.
double quadratic_remainder(const ChebSeries& fp,
                           const MeasureMoments& eq_moments,
                           double tv_mean,
                           std::span<const double> lambdas);

/// <T_V f', mu_V>, the constant part of quadratic_remainder.
double tv_mean(const Equilibrium& eq, const ChebSeries& fp, const MeasureMoments& eq_moments);

nlohmann::json to_json(const InversionData& inv);

} // namespace loggas
