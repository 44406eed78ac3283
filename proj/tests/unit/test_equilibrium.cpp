#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "loggas/equilibrium.hpp"
#include "loggas/errors.hpp"

using namespace loggas;

namespace {

constexpr double kPi = std::numbers::pi;

Equilibrium gaussian_eq()
{
  return build_equilibrium(potential_from_spec("poly:0,0,1"));
}

Equilibrium quartic_eq()
{
  return build_equilibrium(potential_from_spec("poly:0,0,-0.5,0,1"));
}

// Principal value of int mu_V(dy) / (x - y) by singularity subtraction and
// the midpoint rule in the angle variable.
double pv_hilbert(const std::function<double(double)>& density, double x, int nodes = 200000)
{
  double acc = 0.0;
  const double gx = density(x);
  for (int j = 0; j < nodes; ++j) {
    const double th = kPi * (j + 0.5) / nodes;
    const double y = std::cos(th);
    acc += (density(y) - gx) / (x - y) * std::sin(th);
  }
  acc *= kPi / nodes;
  return acc + gx * std::log((1 + x) / (1 - x));
}

double semicircle_cdf(double x)
{
  return 0.5 + (x * std::sqrt(1 - x * x) + std::asin(x)) / kPi;
}

double bisect(const std::function<double(double)>& g, double lo, double hi)
{
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((g(lo) < 0) == (g(mid) < 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("build_equilibrium: quadratic potential gives S = 1")
{
  const auto eq = gaussian_eq();
  for (double x : {-1.0, -0.3, 0.0, 0.8}) {
    CHECK(eq.s(x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(eq.mass_defect < 1e-14);
  CHECK(eq.min_s == doctest::Approx(1.0));
  CHECK(eq.potential.semiconvexity_bound == doctest::Approx(2.0));
}

TEST_CASE("build_equilibrium: quartic x^4 - x^2/2 gives S = 2x^2 + 1/2")
{
  const auto eq = quartic_eq();
  for (double x : {-1.0, -0.6, 0.0, 0.25, 0.9}) {
    CHECK(eq.s(x) == doctest::Approx(2 * x * x + 0.5).epsilon(1e-13));
  }
  // quadrature oracle: S(x) = (1/2) int (V'(x) - V'(y)) / (x - y) rho(dy)
  auto v1 = [](double x) { return 4 * x * x * x - x; };
  for (double x : {-0.7, 0.1, 0.55}) {
    double acc = 0.0;
    const int m = 4000;
    for (int j = 0; j < m; ++j) {
      const double y = std::cos(kPi * (j + 0.5) / m);
      acc += (v1(x) - v1(y)) / (x - y);
    }
    CHECK(eq.s(x) == doctest::Approx(0.5 * acc / m).epsilon(1e-12));
  }
  CHECK(eq.mass_defect < 1e-14);
}

TEST_CASE("build_equilibrium rejects a non-normalized potential")
{
  try {
    build_equilibrium(potential_from_spec("poly:0,0,1,0,1"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "support_not_normalized");
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("build_equilibrium rejects a two-cut quartic")
{
  // a x^4 + b x^2 with 3a/2 + b = 1 has min S = 1 - a/2
  try {
    build_equilibrium(potential_from_spec("poly:0,0,-2,0,2"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "critical_or_multicut");
  }
}

TEST_CASE("normalize_support examples")
{
  auto n1 = normalize_support(potential_from_spec("poly:0,0,2", Interval{-4, 4}));
  CHECK(n1.scale == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(n1.center) < 1e-12);
  CHECK(n1.potential.v(0.7) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK_NOTHROW(build_equilibrium(n1.potential));

  auto n2 = normalize_support(potential_from_spec("poly:0,0,1"));
  CHECK(n2.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(n2.center) < 1e-12);

  auto n3 = normalize_support(potential_from_spec("poly:9,-6,1", Interval{0, 6}));
  CHECK(n3.center == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(n3.scale == doctest::Approx(1.0).epsilon(1e-12));
  const auto eq = build_equilibrium(n3.potential);
  CHECK(eq.el_residual_max < 1e-10);
  CHECK(n3.potential.v(0.4) == doctest::Approx(0.16).epsilon(1e-10));
}

TEST_CASE("normalize_support on one-cut even quartics and a shifted sextic")
{
  // W = alpha x^4 + gamma x^2 is one-cut exactly when gamma > -sqrt(2 alpha)
  const std::vector<std::pair<double, double>> cases{{1, 0}, {1, 1}, {1, -1}, {0.25, 2}, {4, -2}, {10, 0.5}};
  for (auto [alpha, gamma] : cases) {
    std::ostringstream spec;
    spec << "poly:0,0," << gamma << ",0," << alpha;
    const auto n = normalize_support(potential_from_spec(spec.str(), Interval{-6, 6}));
    const auto eq = build_equilibrium(n.potential);
    CHECK(eq.mass_defect < 1e-10);
    CHECK(eq.el_residual_max < 1e-8);
  }
  CHECK_THROWS_AS(normalize_support(potential_from_spec("poly:0,0,-3,0,1", Interval{-6, 6})), Error);

  const auto n6 = normalize_support(potential_from_spec("poly:0,1,0.5,-0.3,0.2,0,0.1", Interval{-6, 6}));
  const auto eq6 = build_equilibrium(n6.potential);
  CHECK(eq6.el_residual_max < 1e-8);
}

TEST_CASE("normalize_support rejects non-confining potentials")
{
  CHECK_THROWS_AS(normalize_support(potential_from_spec("poly:0,0,0,1")), Error);
  CHECK_THROWS_AS(normalize_support(potential_from_spec("poly:0,0,-1")), Error);
}

TEST_CASE("quantiles of the semicircle")
{
  const auto eq = gaussian_eq();
  const auto q8 = quantiles(eq, 8);
  CHECK(std::abs(q8[3]) < 1e-12);
  CHECK(q8[7] == 1.0);
  const auto q4 = quantiles(eq, 4);
  const double oracle = bisect([](double x) { return semicircle_cdf(x) - 0.25; }, -1, 1);
  CHECK(q4[0] == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(q4[0] == doctest::Approx(-0.4030).epsilon(3e-3));
}

TEST_CASE("quantiles are increasing and refinement invariant")
{
  for (const auto& eq : {gaussian_eq(), quartic_eq()}) {
    const auto q = quantiles(eq, 100);
    const auto q2 = quantiles(eq, 200);
    for (std::size_t j = 1; j < q.size(); ++j) {
      CHECK(q[j] > q[j - 1]);
      CHECK(std::abs(q[j - 1] - q2[2 * j - 1]) < 1e-10);
    }
    for (std::size_t j = 0; j + 1 < q.size(); j += 7) {
      CHECK(equilibrium_cdf(eq, q[j]) == doctest::Approx((j + 1) / 100.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("equilibrium CDF of the quartic matches direct quadrature")
{
  const auto eq = quartic_eq();
  for (double x : {-0.8, -0.1, 0.5}) {
    const int m = 200000;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      const double y = -1 + (x + 1) * (j + 0.5) / m;
      acc += (2 * y * y + 0.5) * 2 / kPi * std::sqrt(1 - y * y);
    }
    acc *= (x + 1) / m;
    CHECK(equilibrium_cdf(eq, x) == doctest::Approx(acc).epsilon(1e-7));
  }
  CHECK(equilibrium_cdf(eq, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(equilibrium_cdf(eq, -1.5) == 0.0);
}

TEST_CASE("el_residual")
{
  const auto g = gaussian_eq();
  for (double x : {-0.9, -0.2, 0.0, 0.6}) {
    CHECK(std::abs(el_residual(g, x)) < 1e-12);
  }
  const auto q = quartic_eq();
  CHECK(std::abs(el_residual(q, 0.5)) <= 1e-8);
  // PV-quadrature oracle for the Hilbert transform of mu_V
  for (double x : {-0.6, 0.5}) {
    const double h = pv_hilbert([&](double y) { return equilibrium_density(q, y); }, x);
    CHECK(std::abs(q.potential.v1(x) - h) < 1e-6);
  }
  // a constant shift of V leaves the residual unchanged
  const auto shifted = build_equilibrium(potential_from_spec("poly:5,0,-0.5,0,1"));
  CHECK(std::abs(el_residual(shifted, 0.3) - el_residual(q, 0.3)) < 1e-14);
}

TEST_CASE("integrate_equilibrium and JSON round trip")
{
  const auto q = quartic_eq();
  // int x^2 (2x^2 + 1/2) mu_sc = 2/8 + 1/8
  CHECK(integrate_equilibrium(q, cheb_fit([](double x) { return x * x; }, 2)) == doctest::Approx(0.375));
  const auto back = equilibrium_from_json(to_json(q));
  CHECK(back.s.coeffs() == q.s.coeffs());
  CHECK(back.delta == q.delta);
}
