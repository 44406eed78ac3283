#include "loggas/clt_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double integrate_mu_v(const Equilibrium& eq, const std::function<double(double)>& g)
{
  const auto rule = gauss_chebyshev_semicircle(kQuadratureDegree);
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    acc += rule.weights[j] * eq.s(rule.nodes[j]) * g(rule.nodes[j]);
  }
  return acc;
}

void check_xis(const std::vector<ChebSeries>& xis, const Equilibrium& eq)
{
  if (xis.empty() || xis.size() > kMaxDimension) {
    throw rejected_input("between 1 and 4 test functions are supported");
  }
  for (const auto& xi : xis) {
    if (!xi.interval().contains(eq.u_interval())) {
      throw rejected_input("test functions must be defined on an interval containing U");
    }
  }
}

// (mean of y^p)^{1/p} and its delete-one-block jackknife standard error.
std::pair<double, double> lp_with_jackknife(const std::vector<double>& y, double p)
{
  const std::size_t r = y.size();
  if (r == 0) {
    return {kNaN, kNaN};
  }
  std::vector<double> yp(r);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    yp[i] = std::pow(y[i], p);
    total += yp[i];
  }
  const double est = std::pow(total / static_cast<double>(r), 1.0 / p);
  const std::size_t blocks = std::min<std::size_t>(50, r);
  if (blocks < 2) {
    return {est, kNaN};
  }
  std::vector<double> leave(blocks);
  double leave_mean = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * r / blocks;
    const std::size_t hi = (b + 1) * r / blocks;
    double part = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      part += yp[i];
    }
    leave[b] = std::pow((total - part) / static_cast<double>(r - (hi - lo)), 1.0 / p);
    leave_mean += leave[b];
  }
  leave_mean /= static_cast<double>(blocks);
  double var = 0.0;
  for (double v : leave) {
    var += (v - leave_mean) * (v - leave_mean);
  }
  const double g = static_cast<double>(blocks);
  return {est, std::sqrt((g - 1.0) / g * var)};
}

} // namespace

double gaussian_lp_norm(std::size_t d, double p)
{
  const double dd = static_cast<double>(d);
  const double lg = 0.5 * p * std::log(2.0) + std::lgamma(0.5 * (dd + p)) - std::lgamma(0.5 * dd);
  return std::exp(lg / p);
}

double linear_statistic(const ChebSeries& xi, const Equilibrium& eq, std::span<const double> lambdas)
{
  double acc = 0.0;
  for (double l : lambdas) {
    acc += xi(l);
  }
  const double mean = integrate_mu_v(eq, [&](double x) { return xi(x); });
  return acc - static_cast<double>(lambdas.size()) * mean;
}

Prediction predict(const std::vector<ChebSeries>& xis, const Equilibrium& eq, double beta, double p)
{
  if (!(beta > 0.0) || !(p >= 1.0)) {
    throw rejected_input("predict needs beta > 0 and p >= 1");
  }
  check_xis(xis, eq);
  const std::size_t d = xis.size();
  const std::size_t nq = kQuadratureDegree;
  const auto arc = gauss_chebyshev_arcsine(nq);
  const auto sc = gauss_chebyshev_semicircle(nq);
  const double kappa = 0.5 - 1.0 / beta;

  Prediction out;
  out.beta = beta;
  out.p = p;
  out.m.resize(static_cast<Eigen::Index>(d));
  out.m_f.resize(static_cast<Eigen::Index>(d));
  out.C.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));

  // divided-difference tables on the arcsine tensor grid
  std::vector<std::vector<double>> dd(d, std::vector<double>(nq * nq));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t a = 0; a < nq; ++a) {
      for (std::size_t b = a; b < nq; ++b) {
        const double v = divided_difference(xis[i], arc.nodes[a], arc.nodes[b]);
        dd[i][a * nq + b] = v;
        dd[i][b * nq + a] = v;
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < nq; ++a) {
        for (std::size_t b = 0; b < nq; ++b) {
          acc += dd[i][a * nq + b] * dd[j][a * nq + b] * (1.0 - arc.nodes[a] * arc.nodes[b]);
        }
      }
      const double c = acc / static_cast<double>(nq * nq) / (2.0 * beta);
      out.C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      out.C(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
    }
  }

  for (std::size_t i = 0; i < d; ++i) {
    const auto& xi = xis[i];
    double rho_int = 0.0;
    for (double x : arc.nodes) {
      rho_int += xi(x);
    }
    rho_int /= static_cast<double>(nq);
    const auto rho_moments = measure_moments(arc.nodes, arc.weights, xi.interval(), xi.degree());
    double s_term = 0.0;
    for (std::size_t b = 0; b < nq; ++b) {
      const double x = sc.nodes[b];
      s_term += sc.weights[b] * eq.s1(x) / eq.s(x) * integrate_divided_difference(xi, rho_moments, x);
    }
    out.m[static_cast<Eigen::Index>(i)] = kappa * (0.5 * (xi(-1.0) + xi(1.0)) - rho_int - 0.5 * s_term);

    const auto inv = invert_theta(eq, xi);
    out.m_f[static_cast<Eigen::Index>(i)] = kappa * integrate_mu_v(eq, [&](double x) { return inv.psi1(x); });
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.C);
  const double trace = out.C.trace();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 1e-10 * std::abs(trace)) || !(trace > 0.0)) {
    std::ostringstream msg;
    msg << "freeness violated: 1, xi_1..xi_d are linearly dependent (smallest eigenvalue of C " << lmin << ")";
    throw Error(ErrorKind::validation, "freeness_violated", msg.str());
  }
  const Eigen::VectorXd sq = es.eigenvalues().cwiseSqrt();
  out.Sigma = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
  const double sigma_op = sq.maxCoeff();
  const double cinv_norm = out.C.inverse().norm();
  out.A_beta = (1.0 / beta) * sigma_op * cinv_norm * gaussian_lp_norm(d, p) + std::abs(kappa) * sigma_op;
  if (d == 1) {
    const double sigma2 = out.C(0, 0);
    out.a_beta = (1.0 / beta) / sigma2 + std::abs(kappa) * std::sqrt(std::numbers::pi) / 2.0;
  } else {
    out.a_beta = kNaN;
  }
  return out;
}

Eigen::MatrixXd covariance_from_inversion(const std::vector<ChebSeries>& xis,
                                          const std::vector<InversionData>& invs,
                                          const Equilibrium& eq,
                                          double beta)
{
  const std::size_t d = xis.size();
  Eigen::MatrixXd c(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    const auto x1 = cheb_derivative(xis[i]);
    for (std::size_t j = 0; j < d; ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        -(1.0 / beta) * integrate_mu_v(eq, [&](double x) { return x1(x) * invs[j].psi(x); });
    }
  }
  return c;
}

SteinContext make_stein_context(const std::vector<ChebSeries>& xis, const Equilibrium& eq, double beta)
{
  if (!(beta > 0.0)) {
    throw rejected_input("beta must be positive");
  }
  check_xis(xis, eq);
  SteinContext ctx;
  ctx.eq = &eq;
  ctx.beta = beta;
  ctx.xis = xis;
  const double kappa = 0.5 - 1.0 / beta;
  for (const auto& xi : xis) {
    ctx.xi1.push_back(cheb_derivative(xi));
    ctx.invs.push_back(invert_theta(eq, xi));
    const auto& inv = ctx.invs.back();
    ctx.xi_mean.push_back(integrate_mu_v(eq, [&](double x) { return xi(x); }));
    ctx.f_mean.push_back(integrate_mu_v(eq, [&](double x) { return inv.f(x); }));
    ctx.m_f.push_back(kappa * integrate_mu_v(eq, [&](double x) { return inv.psi1(x); }));
    ctx.psi_moments.push_back(equilibrium_moments(eq, inv.psi.interval(), inv.psi.degree()));
    ctx.tv_means.push_back(tv_mean(eq, inv.psi, ctx.psi_moments.back()));
  }
  return ctx;
}

SteinTerms stein_terms(const SteinContext& ctx, std::span<const double> lambdas)
{
  const Equilibrium& eq = *ctx.eq;
  const std::size_t n = lambdas.size();
  const std::size_t d = ctx.xis.size();
  if (n == 0) {
    throw rejected_input("configuration must be non-empty");
  }
  double max_abs = 0.0;
  for (double l : lambdas) {
    max_abs = std::max(max_abs, std::abs(l));
  }
  if (max_abs > 1.0 + eq.delta) {
    std::ostringstream msg;
    msg << "outlier configuration: max |lambda_i| = " << max_abs;
    throw numerical_failure("outlier_configuration", msg.str());
  }
  const double nd = static_cast<double>(n);
  const double beta = ctx.beta;
  const double kappa = 0.5 - 1.0 / beta;
  SteinTerms t;
  const auto di = static_cast<Eigen::Index>(d);
  t.X.resize(di);
  t.F.resize(di);
  t.LF.resize(di);
  t.Z.resize(di);
  t.GammaXF.resize(di, di);
  std::vector<std::vector<double>> psi_at(d, std::vector<double>(n));
  for (std::size_t i = 0; i < d; ++i) {
    const auto& inv = ctx.invs[i];
    double xs = 0.0, fs = 0.0, fpp = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double l = lambdas[k];
      xs += ctx.xis[i](l);
      fs += inv.f(l);
      fpp += inv.psi1(l);
      psi_at[i][k] = inv.psi(l);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    t.X[ii] = xs - nd * ctx.xi_mean[i];
    t.F[ii] = (fs - nd * ctx.f_mean[i]) / beta;
    t.LF[ii] = apply_generator(eq.potential, inv.psi, inv.psi1, lambdas, beta, n) / beta;
    const double q = quadratic_remainder(inv.psi, ctx.psi_moments[i], ctx.tv_means[i], lambdas);
    t.Z[ii] = kappa * fpp / nd - ctx.m_f[i] - 0.5 * q;
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        acc += ctx.xi1[i](lambdas[k]) * psi_at[j][k];
      }
      t.GammaXF(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -acc / (beta * nd);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    t.master_residual = std::max(t.master_residual, std::abs(t.X[ii] - ctx.m_f[i] - t.LF[ii] / nd - t.Z[ii]));
  }
  return t;
}

SteinTerms stein_terms(const std::vector<ChebSeries>& xis,
                       const Equilibrium& eq,
                       double beta,
                       std::span<const double> lambdas)
{
  return stein_terms(make_stein_context(xis, eq, beta), lambdas);
}

double stein_bound(const Prediction& pred, double gamma_dev, double z_norm, double p, BoundMode mode)
{
  if (!(gamma_dev >= 0.0) || !(z_norm >= 0.0) || !(p >= 1.0)) {
    throw rejected_input("stein_bound needs nonnegative norms and p >= 1");
  }
  const std::size_t d = pred.dim();
  if (mode == BoundMode::tv) {
    if (d != 1) {
      throw rejected_input("total-variation bound needs d = 1");
    }
    const double sigma2 = pred.C(0, 0);
    return 2.0 / sigma2 * gamma_dev + std::sqrt(std::numbers::pi) / 2.0 * z_norm;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pred.C);
  const double sigma_op = es.eigenvalues().cwiseSqrt().maxCoeff();
  const double cinv = pred.C.inverse().norm();
  return sigma_op * cinv * gaussian_lp_norm(d, p) * gamma_dev + sigma_op * z_norm;
}

SteinBatchSummary stein_batch(const SteinContext& ctx, const Prediction& pred, const SampleBatch& batch, double p)
{
  const std::size_t reps = batch.reps();
  const std::size_t d = ctx.xis.size();
  std::vector<SteinTerms> terms(reps);
  std::vector<char> ok(reps, 0);
  parallel_for(reps, 0, [&](std::size_t r) {
    try {
      terms[r] = stein_terms(ctx, batch.replicate(r));
      ok[r] = 1;
    } catch (const Error& e) {
      if (e.code() != "outlier_configuration") {
        throw;
      }
    }
  });
  SteinBatchSummary s;
  s.reps = reps;
  const auto di = static_cast<Eigen::Index>(d);
  s.x_mean = Eigen::VectorXd::Zero(di);
  s.x_cov = Eigen::MatrixXd::Zero(di, di);
  s.gamma_mean = Eigen::MatrixXd::Zero(di, di);
  std::vector<double> gdev, zn, gsig, g11;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!ok[r]) {
      ++s.outliers;
      continue;
    }
    const auto& t = terms[r];
    for (std::size_t i = 0; i < d; ++i) {
      s.X.push_back(t.X[static_cast<Eigen::Index>(i)]);
      s.Z.push_back(t.Z[static_cast<Eigen::Index>(i)]);
    }
    s.x_mean += t.X;
    s.gamma_mean += t.GammaXF;
    gdev.push_back((pred.C - t.GammaXF).norm());
    zn.push_back(t.Z.norm());
    g11.push_back(t.GammaXF(0, 0));
    if (d == 1) {
      gsig.push_back(std::abs(std::sqrt(pred.C(0, 0)) - t.GammaXF(0, 0)));
    }
    s.master_residual_max = std::max(s.master_residual_max, t.master_residual);
  }
  s.used = gdev.size();
  if (s.used == 0) {
    throw numerical_failure("no_usable_replicates", "every replicate is an outlier configuration");
  }
  const double u = static_cast<double>(s.used);
  s.x_mean /= u;
  s.gamma_mean /= u;
  for (std::size_t r = 0; r < s.used; ++r) {
    Eigen::VectorXd dx(di);
    for (std::size_t i = 0; i < d; ++i) {
      dx[static_cast<Eigen::Index>(i)] = s.X[r * d + i] - s.x_mean[static_cast<Eigen::Index>(i)];
    }
    s.x_cov += dx * dx.transpose();
  }
  if (s.used > 1) {
    s.x_cov /= (u - 1.0);
  }
  std::tie(s.gamma_dev, s.gamma_dev_se) = lp_with_jackknife(gdev, p);
  std::tie(s.z_norm, s.z_norm_se) = lp_with_jackknife(zn, p);
  if (d == 1) {
    s.gamma_dev_sigma = lp_with_jackknife(gsig, p).first;
  } else {
    s.gamma_dev_sigma = kNaN;
  }
  double m11 = 0.0;
  for (double v : g11) {
    m11 += v;
  }
  m11 /= u;
  for (double v : g11) {
    s.gamma11_var += (v - m11) * (v - m11);
  }
  s.gamma11_var /= std::max(1.0, u - 1.0);
  return s;
}

RigidityReport rigidity_report(const Equilibrium& eq, const SampleBatch& batch, double eps)
{
  const std::size_t reps = batch.reps();
  if (reps == 0) {
    throw rejected_input("rigidity_report needs a non-empty batch");
  }
  const std::size_t n = batch.n;
  const auto rho = quantiles(eq, n);
  const double nd = static_cast<double>(n);
  std::vector<double> envelope(n);
  for (std::size_t j = 1; j <= n; ++j) {
    const double jhat = static_cast<double>(std::min(j, n - j + 1));
    envelope[j - 1] = std::pow(jhat, -1.0 / 3.0) * std::pow(nd, -2.0 / 3.0 + eps);
  }
  std::size_t violations = 0, outliers = 0;
  RigidityReport out;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto l = batch.replicate(r);
    bool violated = false;
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      violated = violated || std::abs(l[j] - rho[j]) > envelope[j];
      m = std::max(m, std::abs(l[j]));
    }
    violations += violated ? 1 : 0;
    outliers += m >= 1.0 + eq.delta ? 1 : 0;
    out.max_abs_lambda = std::max(out.max_abs_lambda, m);
  }
  out.envelope_violation_rate = static_cast<double>(violations) / static_cast<double>(reps);
  out.outlier_rate = static_cast<double>(outliers) / static_cast<double>(reps);
  return out;
}

std::vector<std::pair<double, double>> negative_moment_probe(const SampleBatch& batch,
                                                             const ChebSeries& xi_prime,
                                                             std::span<const double> eps_grid)
{
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    if (!(eps_grid[k] > 0.0) || (k > 0 && !(eps_grid[k] > eps_grid[k - 1]))) {
      throw rejected_input("eps grid must be positive and increasing");
    }
  }
  const std::size_t reps = batch.reps();
  std::vector<double> stat(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    double acc = 0.0;
    for (double l : batch.replicate(r)) {
      const double v = xi_prime(l);
      acc += v * v;
    }
    stat[r] = acc / static_cast<double>(batch.n);
  }
  std::vector<std::pair<double, double>> out;
  for (double eps : eps_grid) {
    const auto hits = std::count_if(stat.begin(), stat.end(), [eps](double v) { return v <= eps; });
    out.emplace_back(eps, static_cast<double>(hits) / static_cast<double>(std::max<std::size_t>(reps, 1)));
  }
  return out;
}

AlphaRegularity alpha_regularity(const ChebSeries& xi_prime, std::span<const double> eps_grid, Interval domain)
{
  constexpr std::size_t kGrid = 100000;
  auto measure = [&](std::size_t points, std::vector<double>& out) {
    std::vector<double> absval(points);
    for (std::size_t i = 0; i < points; ++i) {
      const double x = domain.lo + domain.width() * (static_cast<double>(i) + 0.5) / static_cast<double>(points);
      absval[i] = std::abs(xi_prime(x));
    }
    std::sort(absval.begin(), absval.end());
    for (double eps : eps_grid) {
      const auto count = std::upper_bound(absval.begin(), absval.end(), eps) - absval.begin();
      out.push_back(domain.width() * static_cast<double>(count) / static_cast<double>(points));
    }
  };
  AlphaRegularity a;
  a.eps.assign(eps_grid.begin(), eps_grid.end());
  for (double e : a.eps) {
    if (!(e > 0.0)) {
      throw rejected_input("eps grid must be positive");
    }
  }
  std::vector<double> coarse;
  measure(kGrid, a.measure);
  measure(kGrid / 2, coarse);
  for (std::size_t k = 0; k < a.eps.size(); ++k) {
    a.richardson_gap.push_back(std::abs(a.measure[k] - coarse[k]));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = 0; k < a.eps.size(); ++k) {
    if (a.measure[k] > 0.0) {
      const double x = std::log(a.eps[k]);
      const double y = std::log(a.measure[k]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
  }
  const double md = static_cast<double>(m);
  a.slope = m >= 2 ? (md * sxy - sx * sy) / (md * sxx - sx * sx) : kNaN;
  return a;
}

nlohmann::json to_json(const Prediction& pred)
{
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  auto mat = [](const Eigen::MatrixXd& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        row[static_cast<std::size_t>(j)] = a(i, j);
      }
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["m"] = vec(pred.m);
  j["m_f"] = vec(pred.m_f);
  j["C"] = mat(pred.C);
  j["Sigma"] = mat(pred.Sigma);
  j["A_beta"] = pred.A_beta;
  j["a_beta"] = std::isfinite(pred.a_beta) ? nlohmann::json(pred.a_beta) : nlohmann::json(nullptr);
  j["beta"] = pred.beta;
  j["p"] = pred.p;
  return j;
}

} // namespace loggas
