#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "loggas/clt_engine.hpp"
#include "loggas/errors.hpp"

using namespace loggas;

namespace {

constexpr double kPi = std::numbers::pi;

const Equilibrium& gaussian_eq()
{
  static const Equilibrium eq = build_equilibrium(potential_from_spec("poly:0,0,1"));
  return eq;
}

const Equilibrium& quartic_eq()
{
  static const Equilibrium eq = build_equilibrium(potential_from_spec("poly:0,0,-0.5,0,1"));
  return eq;
}

ChebSeries t_on(const Equilibrium& eq, std::size_t k)
{
  return reexpand(ChebSeries::basis(k), eq.u_interval(), k);
}

// int g S dmu_sc with adaptive Gauss-Kronrod in theta
double mu_v_oracle(const Equilibrium& eq, const std::function<double(double)>& g)
{
  auto f = [&](double th) {
    const double x = std::cos(th);
    return g(x) * eq.s(x) * 2.0 / kPi * std::sin(th) * std::sin(th);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, kPi, 8, 1e-14);
}

// boundary-term mean by nested Gauss-Legendre in the angle variables
double mean_oracle(const Equilibrium& eq, const ChebSeries& xi, double beta)
{
  using GL = boost::math::quadrature::gauss<double, 60>;
  const double rho_int = GL::integrate([&](double th) { return xi(std::cos(th)); }, 0.0, kPi) / kPi;
  auto outer = [&](double th) {
    const double x = std::cos(th);
    auto inner = [&](double ph) { return divided_difference(xi, x, std::cos(ph)); };
    const double in = GL::integrate(inner, 0.0, kPi) / kPi;
    return eq.s1(x) / eq.s(x) * in * 2.0 / kPi * std::sin(th) * std::sin(th);
  };
  const double s_term = GL::integrate(outer, 0.0, kPi);
  return (0.5 - 1.0 / beta) * (0.5 * (xi(-1.0) + xi(1.0)) - rho_int - 0.5 * s_term);
}

std::vector<double> random_config(std::mt19937_64& rng, int n, double half_width)
{
  std::uniform_real_distribution<double> u(-half_width, half_width);
  std::vector<double> l(n);
  for (double& v : l) {
    v = u(rng);
  }
  return l;
}

} // namespace

TEST_CASE("linear_statistic examples")
{
  const auto& eq = gaussian_eq();
  const std::vector<double> cfg{-0.3, 0.1, 0.7, 0.2};
  CHECK(std::abs(linear_statistic(ChebSeries::constant(1.0, eq.u_interval()), eq, cfg)) < 1e-13);
  const std::vector<double> sym{-0.4, 0.4};
  CHECK(std::abs(linear_statistic(t_on(eq, 1), eq, sym)) < 1e-14);
  const auto x2 = parse_function_spec("poly:0,0,1", eq.u_interval());
  const std::vector<double> zeros(10, 0.0);
  CHECK(linear_statistic(x2, eq, zeros) == doctest::Approx(-10.0 / 4.0).epsilon(1e-13));
}

TEST_CASE("gaussian_lp_norm")
{
  CHECK(gaussian_lp_norm(1, 1.0) == doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-14));
  CHECK(gaussian_lp_norm(1, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gaussian_lp_norm(3, 2.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(gaussian_lp_norm(2, 1.0) == doctest::Approx(std::sqrt(kPi / 2.0)).epsilon(1e-14));
}

TEST_CASE("predict: T_k covariances and means on the Gaussian potential")
{
  const auto& eq = gaussian_eq();
  for (double beta : {1.0, 2.0, 4.0}) {
    for (std::size_t k = 1; k <= 6; ++k) {
      const auto pred = predict({t_on(eq, k)}, eq, beta);
      CHECK(std::abs(pred.C(0, 0) - k / (2.0 * beta)) < 1e-10);
      const double m = (0.5 - 1.0 / beta) * (1.0 + (k % 2 == 0 ? 1.0 : -1.0)) / 2.0;
      CHECK(std::abs(pred.m[0] - m) < 1e-10);
      const double a = 1.0 / beta / pred.C(0, 0) + std::abs(0.5 - 1.0 / beta) * std::sqrt(kPi) / 2.0;
      CHECK(pred.a_beta == doctest::Approx(a).epsilon(1e-13));
    }
  }
  const auto pred = predict({t_on(eq, 1), t_on(eq, 2)}, eq, 2.0);
  CHECK(std::abs(pred.C(0, 1)) < 1e-12);
  CHECK(std::abs(pred.C(1, 0)) < 1e-12);
  CHECK(std::isnan(pred.a_beta));
  CHECK((pred.Sigma * pred.Sigma - pred.C).norm() < 1e-10);
  CHECK(pred.m.norm() < 1e-14);
}

TEST_CASE("predict: A_beta from its definition")
{
  const auto& eq = gaussian_eq();
  const auto pred = predict({t_on(eq, 2)}, eq, 1.0, 2.0);
  // d = 1: Sigma = sqrt(C), |C^{-1}| = 1/C
  const double c = 1.0;
  CHECK(pred.C(0, 0) == doctest::Approx(c).epsilon(1e-10));
  const double expected = 1.0 * std::sqrt(c) * (1.0 / c) * 1.0 + 0.5 * std::sqrt(c);
  CHECK(pred.A_beta == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("predict: quartic mean and covariance against independent quadrature")
{
  const auto& eq = quartic_eq();
  const double beta = 1.0;
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto xi = t_on(eq, k);
    const auto pred = predict({xi}, eq, beta);
    CHECK(std::abs(pred.m[0] - mean_oracle(eq, xi, beta)) < 1e-9);
    const auto inv = invert_theta(eq, xi);
    const auto x1 = cheb_derivative(xi);
    const double cross = -(1.0 / beta) * mu_v_oracle(eq, [&](double x) { return x1(x) * inv.psi(x); });
    CHECK(std::abs(pred.C(0, 0) - cross) < 1e-8);
  }
}

TEST_CASE("covariance_from_inversion matches predict on both potentials")
{
  for (const Equilibrium* eq : {&gaussian_eq(), &quartic_eq()}) {
    std::vector<ChebSeries> xis;
    std::vector<InversionData> invs;
    for (std::size_t k = 1; k <= 6; ++k) {
      xis.push_back(t_on(*eq, k));
      invs.push_back(invert_theta(*eq, xis.back()));
    }
    const double beta = 2.0;
    const auto cross = covariance_from_inversion(xis, invs, *eq, beta);
    // pairs only, keeping C well conditioned
    for (std::size_t i = 0; i + 1 < xis.size(); ++i) {
      const auto pred = predict({xis[i], xis[i + 1]}, *eq, beta);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          CHECK(std::abs(pred.C(a, b) - cross(static_cast<Eigen::Index>(i) + a, static_cast<Eigen::Index>(i) + b)) < 1e-8);
        }
      }
    }
  }
}

TEST_CASE("predict rejects dependent test functions")
{
  const auto& eq = gaussian_eq();
  const auto t1 = t_on(eq, 1);
  try {
    predict({t1, 2.0 * t1}, eq, 2.0);
    FAIL("expected freeness_violated");
  } catch (const Error& e) {
    CHECK(e.code() == "freeness_violated");
    CHECK(e.exit_code() == 2);
  }
  CHECK_THROWS_AS(predict({ChebSeries::constant(1.0, eq.u_interval())}, eq, 2.0), Error);
  CHECK_THROWS_AS(predict({ChebSeries::basis(1)}, eq, 2.0), Error); // interval too small
}

TEST_CASE("stein_terms: exact Gaussian sentinel")
{
  const auto& eq = gaussian_eq();
  std::mt19937_64 rng(3);
  for (double beta : {1.0, 2.0, 4.0}) {
    const auto ctx = make_stein_context({t_on(eq, 1)}, eq, beta);
    for (int rep = 0; rep < 10; ++rep) {
      const auto l = random_config(rng, 50, 1.05);
      const auto t = stein_terms(ctx, l);
      CHECK(std::abs(t.Z[0]) < 1e-13);
      CHECK(std::abs(t.GammaXF(0, 0) - 1.0 / (2.0 * beta)) < 1e-14);
      CHECK(t.master_residual < 1e-12);
    }
  }
}

TEST_CASE("stein_terms: master identity on random configurations")
{
  std::mt19937_64 rng(11);
  for (const Equilibrium* eq : {&gaussian_eq(), &quartic_eq()}) {
    for (std::size_t k : {2, 3, 5, 8}) {
      const auto xi = t_on(*eq, k);
      const double c2 = c_norm(xi, 2, kReferenceInterval);
      for (double beta : {1.0, 2.5}) {
        const auto ctx = make_stein_context({xi}, *eq, beta);
        for (int n : {4, 64, 512}) {
          for (int rep = 0; rep < 5; ++rep) {
            const auto l = random_config(rng, n, 1.0 + eq->delta);
            const auto t = stein_terms(ctx, l);
            CHECK(t.master_residual <= 1e-8 * (1.0 + c2));
          }
        }
      }
    }
  }
}

TEST_CASE("stein_terms: outliers and the quantile configuration")
{
  const auto& eq = gaussian_eq();
  std::vector<double> bad{0.0, 1.2};
  try {
    stein_terms({t_on(eq, 2)}, eq, 2.0, bad);
    FAIL("expected outlier_configuration");
  } catch (const Error& e) {
    CHECK(e.code() == "outlier_configuration");
    CHECK(std::string(e.what()).find("1.2") != std::string::npos);
  }
  const double beta = 2.0;
  const std::size_t n = 128;
  std::vector<double> mid(n);
  // midpoint quantiles of the semicircle: solve F(x) = (j - 1/2)/n
  for (std::size_t j = 0; j < n; ++j) {
    const double target = (j + 0.5) / n;
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double x = 0.5 * (lo + hi);
      const double th = std::acos(x);
      const double cdf = 1.0 - (th - std::sin(2.0 * th) / 2.0) / kPi;
      (cdf < target ? lo : hi) = x;
    }
    mid[j] = 0.5 * (lo + hi);
  }
  const auto t = stein_terms({t_on(eq, 1), t_on(eq, 2)}, eq, beta, mid);
  CHECK(std::abs(t.GammaXF(0, 0) - 1.0 / (2.0 * beta)) < 0.1);
  CHECK(std::abs(t.GammaXF(1, 1) - 1.0 / beta) < 0.1);
  CHECK(std::abs(t.GammaXF(0, 1)) < 0.1);
  CHECK(std::abs(t.GammaXF(1, 0)) < 0.1);
}

TEST_CASE("stein_bound formulas")
{
  const auto& eq = gaussian_eq();
  const auto pred = predict({t_on(eq, 1)}, eq, 2.0); // sigma^2 = 1/4
  CHECK(stein_bound(pred, 0.0, 0.0, 1.0, BoundMode::wasserstein) == 0.0);
  CHECK(stein_bound(pred, 0.0, 0.0, 1.0, BoundMode::tv) == 0.0);
  const double g = 0.013, z = 0.027;
  CHECK(stein_bound(pred, g, z, 1.0, BoundMode::tv) == doctest::Approx(8.0 * g + std::sqrt(kPi) / 2.0 * z));
  // sigma_op = 1/2, |C^{-1}| = 4, ||N||_1 = sqrt(2/pi)
  CHECK(stein_bound(pred, g, z, 1.0, BoundMode::wasserstein) ==
        doctest::Approx(0.5 * 4.0 * std::sqrt(2.0 / kPi) * g + 0.5 * z));
  const auto pred2 = predict({t_on(eq, 1), t_on(eq, 2)}, eq, 2.0);
  CHECK_THROWS_AS(stein_bound(pred2, g, z, 1.0, BoundMode::tv), Error);
}

TEST_CASE("stein_batch on GbE samples")
{
  const auto& eq = gaussian_eq();
  const double beta = 2.0;
  const auto ctx1 = make_stein_context({t_on(eq, 1)}, eq, beta);
  const auto pred1 = predict({t_on(eq, 1)}, eq, beta);
  const auto b = sample_gbe_batch(32, beta, 400, 5);
  const auto s1 = stein_batch(ctx1, pred1, b, 1.0);
  CHECK(s1.gamma_dev < 1e-13);
  CHECK(s1.z_norm < 1e-13);
  CHECK(stein_bound(pred1, s1.gamma_dev, s1.z_norm, 1.0, BoundMode::wasserstein) < 1e-12);

  const auto ctx = make_stein_context({t_on(eq, 2)}, eq, beta);
  const auto pred = predict({t_on(eq, 2)}, eq, beta);
  std::vector<double> var;
  for (std::size_t n : {8, 32, 128}) {
    const auto batch = sample_gbe_batch(n, beta, 1000, 77 + n);
    const auto s = stein_batch(ctx, pred, batch, 1.0);
    CHECK(s.used + s.outliers == s.reps);
    CHECK(s.master_residual_max < 1e-9);
    CHECK(s.gamma_dev_se > 0.0);
    CHECK(std::abs(s.x_cov(0, 0) - 0.5) < 0.1);
    var.push_back(s.gamma11_var);
  }
  CHECK(var[1] < var[0]);
  CHECK(var[2] < var[1]);
}

TEST_CASE("rigidity_report synthetic batches")
{
  const auto& eq = gaussian_eq();
  const std::size_t n = 64;
  const auto rho = quantiles(eq, n);
  SampleBatch b;
  b.n = n;
  b.beta = 2.0;
  for (int r = 0; r < 3; ++r) {
    b.data.insert(b.data.end(), rho.begin(), rho.end());
  }
  auto rep = rigidity_report(eq, b, 0.1);
  CHECK(rep.envelope_violation_rate == 0.0);
  CHECK(rep.outlier_rate == 0.0);
  CHECK(rep.max_abs_lambda == doctest::Approx(rho.back()));
  b.data[n - 1] = 2.0;
  b.data[2 * n - 1] = 2.0;
  b.data[3 * n - 1] = 2.0;
  rep = rigidity_report(eq, b, 0.1);
  CHECK(rep.outlier_rate == 1.0);
  CHECK(rep.envelope_violation_rate == 1.0);
  CHECK(rep.max_abs_lambda == 2.0);
}

TEST_CASE("negative_moment_probe")
{
  const auto& eq = gaussian_eq();
  const auto batch = sample_gbe_batch(128, 2.0, 2000, 99);
  const std::vector<double> eps{0.1, 0.5, 0.9};
  for (const auto& [e, prob] : negative_moment_probe(batch, ChebSeries::constant(1.0, eq.u_interval()), eps)) {
    CHECK(prob == 0.0);
  }
  for (const auto& [e, prob] : negative_moment_probe(batch, ChebSeries::constant(0.0, eq.u_interval()), eps)) {
    CHECK(prob == 1.0);
  }
  const auto xi1 = cheb_derivative(t_on(eq, 2));
  const double half = 0.5 * mu_v_oracle(eq, [&](double x) { return xi1(x) * xi1(x); });
  const std::vector<double> e1{half};
  CHECK(negative_moment_probe(batch, xi1, e1)[0].second == 0.0);
  const std::vector<double> bad{0.5, 0.1};
  CHECK_THROWS_AS(negative_moment_probe(batch, xi1, bad), Error);
}

TEST_CASE("alpha_regularity")
{
  const std::vector<double> eps{1e-3, 1e-2, 1e-1};
  const auto lin = alpha_regularity(ChebSeries::basis(1), eps, kReferenceInterval);
  for (std::size_t k = 0; k < eps.size(); ++k) {
    CHECK(lin.measure[k] == doctest::Approx(2.0 * eps[k]).epsilon(1e-3));
    CHECK(lin.richardson_gap[k] < 1e-4);
  }
  CHECK(lin.slope == doctest::Approx(1.0).epsilon(1e-3));
  const auto sq = alpha_regularity(parse_function_spec("poly:0,0,1"), eps, kReferenceInterval);
  for (std::size_t k = 0; k < eps.size(); ++k) {
    CHECK(sq.measure[k] == doctest::Approx(2.0 * std::sqrt(eps[k])).epsilon(1e-2));
  }
  CHECK(sq.slope == doctest::Approx(0.5).epsilon(1e-2));
  const auto none = alpha_regularity(parse_function_spec("poly:2,1"), eps, kReferenceInterval);
  for (double m : none.measure) {
    CHECK(m == 0.0);
  }
}

TEST_CASE("prediction json")
{
  const auto& eq = gaussian_eq();
  const auto j = to_json(predict({t_on(eq, 2)}, eq, 2.0));
  CHECK(j["C"][0][0].get<double>() == doctest::Approx(0.5));
  CHECK(j.contains("Sigma"));
  CHECK(j.contains("A_beta"));
}
