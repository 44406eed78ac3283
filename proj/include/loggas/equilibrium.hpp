#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "loggas/funcspace.hpp"

namespace loggas {

/// Interval on which potentials are represented; must contain U.
inline constexpr Interval kWorkingInterval{-2.0, 2.0};
inline constexpr double kDefaultDelta = 0.1;

struct Potential
{
  ChebSeries v;
  ChebSeries v1;
  ChebSeries v2;
  /// inf V'' over the working interval
  double semiconvexity_bound = 0.0;
};

/// Derivatives and semiconvexity of `v`, kept on v's interval.
Potential make_potential(const ChebSeries& v);

/// Potential from a function spec string on the working interval.
Potential potential_from_spec(const std::string& spec, Interval interval = kWorkingInterval);

struct Equilibrium
{
  Potential potential;
  ChebSeries s;  // S on [-1, 1]
  ChebSeries s1; // S'
  /// U-basis coefficients of S
  std::vector<double> s_u;
  double delta = kDefaultDelta;
  double mass_defect = 0.0;
  double min_s = 0.0;
  double el_residual_max = 0.0;

  Interval u_interval() const { return {-1.0 - delta, 1.0 + delta}; }
};

/// Builds mu_V = S mu_sc and checks mass, positivity of S and the
/// Euler-Lagrange equation.  Throws support_not_normalized or
/// critical_or_multicut (validation errors).
Equilibrium build_equilibrium(const Potential& p, double delta = kDefaultDelta);

struct NormalizedPotential
{
  double scale = 1.0;
  double center = 0.0;
  Potential potential;
  int iterations = 0;
};

/// Finds x -> scale * x + center such that W(scale x + center) has
/// equilibrium support [-1, 1].
NormalizedPotential normalize_support(const Potential& raw);

/// mu_V((-inf, x]); 0 below -1, mass above 1.
double equilibrium_cdf(const Equilibrium& eq, double x);

/// j/n quantiles, j = 1..n.  The last one is exactly 1.
std::vector<double> quantiles(const Equilibrium& eq, std::size_t n);

/// V'(x) - 2 sum_k b_k T_{k+1}(x), with b the U-coefficients of S.
double el_residual(const Equilibrium& eq, double x);

/// Integral of g against mu_V.
double integrate_equilibrium(const Equilibrium& eq, const ChebSeries& g);

/// Density of mu_V with respect to Lebesgue measure.
double equilibrium_density(const Equilibrium& eq, double x);

nlohmann::json to_json(const Equilibrium& eq);
Equilibrium equilibrium_from_json(const nlohmann::json& j);

} // namespace loggas
