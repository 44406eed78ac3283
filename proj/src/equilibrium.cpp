#include "loggas/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMassTolerance = 1e-8;
constexpr double kElTolerance = 1e-6;
constexpr std::size_t kElGrid = 512;

// S = (1/2) sum_{k>=1} v'_k U_{k-1} where V' = sum v'_k T_k on [-1, 1].
std::vector<double> density_u_coeffs(const ChebSeries& v1_ref)
{
  const auto& a = v1_ref.coeffs();
  std::vector<double> b(std::max<std::size_t>(a.size() - 1, 1), 0.0);
  for (std::size_t k = 1; k < a.size(); ++k) {
    b[k - 1] = 0.5 * a[k];
  }
  return b;
}

ChebSeries v1_on_reference(const Potential& p)
{
  if (!p.v1.interval().contains(kReferenceInterval)) {
    throw rejected_input("potential must be defined on an interval containing [-1, 1]");
  }
  return reexpand(p.v1, kReferenceInterval);
}

double mass_of(const std::vector<double>& s_t)
{
  return s_t[0] - (s_t.size() > 2 ? 0.5 * s_t[2] : 0.0);
}

// Integral from phi to pi of cos(m t) dt.
double cos_integral(std::size_t m, double phi)
{
  if (m == 0) {
    return kPi - phi;
  }
  const double md = static_cast<double>(m);
  return -std::sin(md * phi) / md;
}

double cdf_in_angle(const std::vector<double>& s, double phi)
{
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const std::size_t km2 = k >= 2 ? k - 2 : 2 - k;
    acc += s[k] * (0.5 * cos_integral(k, phi) - 0.25 * cos_integral(k + 2, phi) - 0.25 * cos_integral(km2, phi));
  }
  return 2.0 / kPi * acc;
}

// Monomial coefficients w_d, w_{d-1} of a polynomial series of degree d.
std::array<double, 2> leading_monomials(const ChebSeries& w, std::size_t d)
{
  ChebSeries dd = w;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    dd = cheb_derivative(dd);
  }
  // W^{(d-1)}(x) = d! w_d x + (d-1)! w_{d-1}
  double fact = 1.0;
  for (std::size_t k = 2; k < d; ++k) {
    fact *= static_cast<double>(k);
  }
  const double slope = cheb_derivative(dd)(0.0);
  return {slope / (fact * static_cast<double>(d)), dd(0.0) / fact};
}

} // namespace

Potential make_potential(const ChebSeries& v)
{
  Potential p;
  p.v = v;
  p.v1 = cheb_derivative(v);
  p.v2 = cheb_derivative(p.v1);
  double inf = p.v2(p.v2.interval().lo);
  const std::size_t grid = 2048;
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = p.v2.interval().lo + p.v2.interval().width() * static_cast<double>(i) / (grid - 1);
    inf = std::min(inf, p.v2(x));
  }
  p.semiconvexity_bound = inf;
  return p;
}

Potential potential_from_spec(const std::string& spec, Interval interval)
{
  return make_potential(parse_function_spec(spec, interval).truncated());
}

Equilibrium build_equilibrium(const Potential& p, double delta)
{
  if (!(delta > 0.0)) {
    throw rejected_input("delta must be positive");
  }
  const Interval u{-1.0 - delta, 1.0 + delta};
  if (!p.v.interval().contains(u)) {
    throw rejected_input("potential interval does not contain U = [-1-delta, 1+delta]");
  }
  Equilibrium eq;
  eq.potential = p;
  eq.delta = delta;
  const ChebSeries v1 = v1_on_reference(p);
  eq.s_u = density_u_coeffs(v1);
  eq.s = ChebSeries(chebyshev_u_to_t(eq.s_u));
  eq.s1 = cheb_derivative(eq.s);
  eq.mass_defect = std::abs(mass_of(eq.s.coeffs()) - 1.0);
  if (eq.mass_defect > kMassTolerance) {
    std::ostringstream msg;
    msg << "support not normalized: mass of S mu_sc is " << mass_of(eq.s.coeffs())
        << " (run normalize_support first)";
    throw Error(ErrorKind::validation, "support_not_normalized", msg.str());
  }
  eq.min_s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= 2048; ++i) {
    eq.min_s = std::min(eq.min_s, eq.s(std::cos(kPi * static_cast<double>(i) / 2048.0)));
  }
  if (!(eq.min_s > 0.0)) {
    std::ostringstream msg;
    msg << "critical or multi-cut potential: min S = " << eq.min_s;
    throw Error(ErrorKind::validation, "critical_or_multicut", msg.str());
  }
  eq.el_residual_max = 0.0;
  for (std::size_t i = 0; i < kElGrid; ++i) {
    const double x = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / kElGrid;
    eq.el_residual_max = std::max(eq.el_residual_max, std::abs(el_residual(eq, x)));
  }
  if (eq.el_residual_max > kElTolerance) {
    std::ostringstream msg;
    msg << "support not normalized: Euler-Lagrange residual " << eq.el_residual_max
        << " (run normalize_support first)";
    throw Error(ErrorKind::validation, "support_not_normalized", msg.str());
  }
  return eq;
}

NormalizedPotential normalize_support(const Potential& raw)
{
  const ChebSeries w = raw.v.truncated();
  const std::size_t d = w.degree();
  if (d < 2) {
    throw rejected_input("potential is not confining");
  }
  const auto [wd, wd1] = leading_monomials(w, d);
  if (d % 2 != 0 || !(wd > 0.0)) {
    throw rejected_input("potential is not confining (leading even coefficient must be positive)");
  }

  // mass of the pure x^d potential on [-1, 1]
  const ChebSeries xd = cheb_fit([d](double x) { return std::pow(x, static_cast<double>(d)); }, d);
  const double md = mass_of(chebyshev_u_to_t(density_u_coeffs(cheb_derivative(xd))));

  const ChebSeries w1 = cheb_derivative(w);
  const std::size_t deg1 = w1.degree();
  auto residual = [&](double scale, double center) {
    const ChebSeries v1 = cheb_fit([&](double x) { return scale * w1(scale * x + center); }, deg1);
    const auto s_t = chebyshev_u_to_t(density_u_coeffs(v1));
    return std::array<double, 2>{v1.coeffs()[0], mass_of(s_t) - 1.0};
  };
  auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

  double scale = std::pow(wd * md, -1.0 / static_cast<double>(d));
  double center = -wd1 / (static_cast<double>(d) * wd);
  auto r = residual(scale, center);
  int it = 0;
  for (; it < 200 && norm(r) > 1e-13; ++it) {
    const double hs = 1e-7 * scale;
    const double hc = 1e-7 * std::max(1.0, scale);
    const auto rs = residual(scale + hs, center);
    const auto rc = residual(scale, center + hc);
    const double j00 = (rs[0] - r[0]) / hs, j01 = (rc[0] - r[0]) / hc;
    const double j10 = (rs[1] - r[1]) / hs, j11 = (rc[1] - r[1]) / hc;
    const double det = j00 * j11 - j01 * j10;
    if (!std::isfinite(det) || det == 0.0) {
      break;
    }
    const double ds = -(j11 * r[0] - j01 * r[1]) / det;
    const double dc = -(-j10 * r[0] + j00 * r[1]) / det;
    double damp = norm(r) < 1e-6 ? 1.0 : 0.5;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt, damp *= 0.5) {
      const double ns = scale + damp * ds;
      const double nc = center + damp * dc;
      if (!(ns > 0.0)) {
        continue;
      }
      const auto nr = residual(ns, nc);
      if (norm(nr) < norm(r)) {
        scale = ns;
        center = nc;
        r = nr;
        moved = true;
        break;
      }
    }
    if (!moved) {
      break;
    }
  }
  if (!(norm(r) <= 1e-10)) {
    std::ostringstream msg;
    msg << "no one-cut normalization found (residual " << norm(r) << " after " << it << " iterations)";
    throw numerical_failure("no_one_cut_normalization", msg.str());
  }
  NormalizedPotential out;
  out.scale = scale;
  out.center = center;
  out.iterations = it;
  const ChebSeries v = cheb_fit([&](double x) { return w(scale * x + center); }, d, kWorkingInterval);
  out.potential = make_potential(v);
  return out;
}

double equilibrium_cdf(const Equilibrium& eq, double x)
{
  if (x <= -1.0) {
    return 0.0;
  }
  if (x >= 1.0) {
    return cdf_in_angle(eq.s.coeffs(), 0.0);
  }
  return cdf_in_angle(eq.s.coeffs(), std::acos(x));
}

std::vector<double> quantiles(const Equilibrium& eq, std::size_t n)
{
  if (n == 0) {
    throw rejected_input("quantiles need n >= 1");
  }
  const auto& s = eq.s.coeffs();
  const double total = cdf_in_angle(s, 0.0);
  std::vector<double> out(n);
  for (std::size_t j = 1; j <= n; ++j) {
    if (j == n) {
      out[j - 1] = 1.0;
      continue;
    }
    const double target = total * static_cast<double>(j) / static_cast<double>(n);
    // CDF is decreasing in phi; bracket [lo, hi] in phi
    double lo = 0.0;
    double hi = kPi;
    double phi = kPi * (1.0 - static_cast<double>(j) / static_cast<double>(n));
    for (int it = 0; it < 200; ++it) {
      const double g = cdf_in_angle(s, phi) - target;
      if (g > 0.0) {
        lo = phi;
      } else {
        hi = phi;
      }
      if (std::abs(g) < 1e-15 || hi - lo < 1e-15) {
        break;
      }
      const double sn = std::sin(phi);
      const double dg = -2.0 / kPi * eq.s(std::cos(phi)) * sn * sn;
      double next = dg != 0.0 ? phi - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) {
        next = 0.5 * (lo + hi);
      }
      if (std::abs(next - phi) < 1e-15) {
        phi = next;
        break;
      }
      phi = next;
    }
    out[j - 1] = std::cos(phi);
  }
  return out;
}

double el_residual(const Equilibrium& eq, double x)
{
  const auto& b = eq.s_u;
  // 2 sum b_k T_{k+1}(x)
  std::vector<double> t(b.size() + 1, 0.0);
  for (std::size_t k = 0; k < b.size(); ++k) {
    t[k + 1] = 2.0 * b[k];
  }
  return eq.potential.v1(x) - ChebSeries(std::move(t))(x);
}

double integrate_equilibrium(const Equilibrium& eq, const ChebSeries& g)
{
  const ChebSeries gr = g.interval() == kReferenceInterval ? g : reexpand(g, kReferenceInterval);
  return integral_semicircle(gr * eq.s);
}

double equilibrium_density(const Equilibrium& eq, double x)
{
  if (std::abs(x) >= 1.0) {
    return 0.0;
  }
  return eq.s(x) * 2.0 / kPi * std::sqrt(1.0 - x * x);
}

nlohmann::json to_json(const Equilibrium& eq)
{
  nlohmann::json j;
  j["potential"] = to_json(eq.potential.v);
  j["delta"] = eq.delta;
  j["S"] = to_json(eq.s);
  j["S_prime"] = to_json(eq.s1);
  j["diagnostics"] = {
    {"mass_defect", eq.mass_defect},
    {"min_S", eq.min_s},
    {"el_residual_max", eq.el_residual_max},
    {"semiconvexity_bound", eq.potential.semiconvexity_bound},
  };
  return j;
}

Equilibrium equilibrium_from_json(const nlohmann::json& j)
{
  try {
    const ChebSeries v = series_from_json(j.at("potential"));
    return build_equilibrium(make_potential(v), j.at("delta").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw rejected_input(std::string("malformed equilibrium JSON: ") + e.what());
  }
}

} // namespace loggas
