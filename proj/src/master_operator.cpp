#include "loggas/master_operator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

constexpr std::size_t kResidualGrid = 512;

double edge_w(double x)
{
  return x - std::copysign(std::sqrt(x * x - 1.0), x);
}

// sum_k c_k 2 w^{k+1}
double u_stieltjes_sum(const std::vector<double>& c, double x)
{
  const double w = edge_w(x);
  double acc = 0.0;
  double wp = w;
  for (double ck : c) {
    acc += ck * 2.0 * wp;
    wp *= w;
  }
  return acc;
}

} // namespace

MeasureMoments equilibrium_moments(const Equilibrium& eq, Interval interval, std::size_t max_degree)
{
  const auto rule = gauss_chebyshev_semicircle(kQuadratureDegree);
  std::vector<double> w(rule.weights.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = rule.weights[j] * eq.s(rule.nodes[j]);
  }
  return measure_moments(rule.nodes, w, interval, max_degree);
}

double apply_t_v(const Equilibrium& eq, const ChebSeries& psi, double x)
{
  const auto m = equilibrium_moments(eq, psi.interval(), psi.degree());
  return integrate_divided_difference(psi, m, x);
}

std::vector<double> apply_t_v(const Equilibrium& eq, const ChebSeries& psi, std::span<const double> xs)
{
  const auto m = equilibrium_moments(eq, psi.interval(), psi.degree());
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = integrate_divided_difference(psi, m, xs[i]);
  }
  return out;
}

double apply_theta_v(const Equilibrium& eq, const ChebSeries& psi, double x)
{
  return -eq.potential.v1(x) * psi(x) + apply_t_v(eq, psi, x);
}

std::vector<double> apply_theta_v(const Equilibrium& eq, const ChebSeries& psi, std::span<const double> xs)
{
  auto out = apply_t_v(eq, psi, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] -= eq.potential.v1(xs[i]) * psi(xs[i]);
  }
  return out;
}

double semicircle_stieltjes_u(std::size_t k, double x)
{
  if (std::abs(x) <= 1.0) {
    throw rejected_input("Stieltjes transform is evaluated off the support only");
  }
  return 2.0 * std::pow(edge_w(x), static_cast<double>(k + 1));
}

double equilibrium_stieltjes(const Equilibrium& eq, double x)
{
  if (std::abs(x) <= 1.0) {
    throw rejected_input("Stieltjes transform is evaluated off the support only");
  }
  return u_stieltjes_sum(eq.s_u, x);
}

InversionData invert_theta(const Equilibrium& eq, const ChebSeries& xi)
{
  const Interval u = eq.u_interval();
  if (!xi.interval().contains(u)) {
    throw rejected_input("test function must be defined on an interval containing U");
  }
  InversionData out;
  out.xi = xi;

  // Stage 1: on [-1, 1], -H[psi mu_V] = xi + c with psi mu_V = P mu_sc and
  // H[U_k mu_sc] = 2 T_{k+1}.  Boundedness at both edges leaves c = -a_0.
  const ChebSeries xi_ref = reexpand(xi, kReferenceInterval);
  const auto& a = xi_ref.coeffs();
  out.c_xi = -a[0];
  std::vector<double> p_u(std::max<std::size_t>(a.size() - 1, 1), 0.0);
  for (std::size_t k = 1; k < a.size(); ++k) {
    p_u[k - 1] = -0.5 * a[k];
  }
  const ChebSeries p(chebyshev_u_to_t(p_u));
  const auto& v1 = eq.potential.v1;

  // Stage 2: pointwise extension off the support.
  auto denominator = [&](double x) { return equilibrium_stieltjes(eq, x) - v1(x); };
  auto psi_out = [&](double x) {
    return (xi(x) + out.c_xi + u_stieltjes_sum(p_u, x)) / denominator(x);
  };
  for (std::size_t i = 1; i <= kEdgePoints; ++i) {
    const double x = 1.0 + eq.delta * static_cast<double>(i) / kEdgePoints;
    for (double side : {x, -x}) {
      const double d = denominator(side);
      if (!(std::abs(d) >= 1e-6)) {
        std::ostringstream msg;
        msg << "near-critical edge, shrink delta (|m_V - V'| = " << std::abs(d) << " at x = " << side << ")";
        throw numerical_failure("near_critical_edge", msg.str());
      }
    }
  }
  auto psi_eval = [&](double x) {
    if (std::abs(x) <= 1.0) {
      return p(x) / eq.s(x);
    }
    return psi_out(x);
  };
  out.psi = cheb_fit(psi_eval, kInversionDegree, u).truncated();
  out.psi1 = cheb_derivative(out.psi);
  out.f = cheb_primitive(out.psi, 0.0);

  std::vector<double> grid(kResidualGrid);
  for (std::size_t i = 0; i < kResidualGrid; ++i) {
    grid[i] = u.lo + u.width() * static_cast<double>(i) / (kResidualGrid - 1);
  }
  const auto theta = apply_theta_v(eq, out.psi, grid);
  double xi_sup = 0.0;
  for (std::size_t i = 0; i < kResidualGrid; ++i) {
    out.residual = std::max(out.residual, std::abs(theta[i] - xi(grid[i]) - out.c_xi));
    xi_sup = std::max(xi_sup, std::abs(xi(grid[i])));
  }
  if (!(out.residual <= 1e-8 * (1.0 + xi_sup))) {
    std::ostringstream msg;
    msg << "master-operator inversion residual " << out.residual << " exceeds tolerance";
    throw numerical_failure("inversion_residual", msg.str());
  }
  return out;
}

double apply_t_n(const ChebSeries& fp, std::span<const double> lambdas, double x)
{
  if (lambdas.empty()) {
    throw rejected_input("configuration must be non-empty");
  }
  double acc = 0.0;
  for (double l : lambdas) {
    acc += divided_difference(fp, x, l);
  }
  return acc / static_cast<double>(lambdas.size());
}

double tv_mean(const Equilibrium& eq, const ChebSeries& fp, const MeasureMoments& eq_moments)
{
  const auto rule = gauss_chebyshev_semicircle(kQuadratureDegree);
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    acc += rule.weights[j] * eq.s(rule.nodes[j]) * integrate_divided_difference(fp, eq_moments, rule.nodes[j]);
  }
  return acc;
}

double quadratic_remainder(const ChebSeries& fp,
                           const MeasureMoments& eq_moments,
                           double tv_mean_value,
                           std::span<const double> lambdas)
{
  const double n = static_cast<double>(lambdas.size());
  const auto emp = empirical_moments(lambdas, fp.interval(), fp.degree());
  double acc = 0.0;
  for (double l : lambdas) {
    acc += integrate_divided_difference(fp, emp, l) - 2.0 * integrate_divided_difference(fp, eq_moments, l);
  }
  return acc + n * tv_mean_value;
}

double quadratic_remainder(const Equilibrium& eq, const ChebSeries& fp, std::span<const double> lambdas)
{
  const auto m = equilibrium_moments(eq, fp.interval(), fp.degree());
  return quadratic_remainder(fp, m, tv_mean(eq, fp, m), lambdas);
}

nlohmann::json to_json(const InversionData& inv)
{
  return {
    {"psi", to_json(inv.psi)},
    {"c_xi", inv.c_xi},
    {"psi1", to_json(inv.psi1)},
    {"f", to_json(inv.f)},
    {"xi", to_json(inv.xi)},
    {"residual", inv.residual},
  };
}

} // namespace loggas
