#include "loggas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

double gauss_quantile(double q)
{
  static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
  return boost::math::quantile(std_normal, q);
}

double gauss_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// r-th derivative of the standard normal density divided by phi(z)
double hermite_factor(double z, int r)
{
  switch (r) {
  case 0:
    return 1.0;
  case 1:
    return -z;
  case 2:
    return z * z - 1.0;
  default:
    return -(z * z * z - 3.0 * z);
  }
}

double phi(double z)
{
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

struct Kde
{
  double lo = 0.0;
  double dx = 0.0;
  std::vector<double> values; // r-th derivative of the KDE at grid points
  double outside = 0.0;       // fraction of samples off the grid
};

// Linear binning on the grid, then discrete convolution with the analytic
// kernel derivative.
Kde binned_kde(std::span<const double> xs, double m, double sigma, double h, int r)
{
  const std::size_t g = kKdeGrid;
  Kde k;
  k.lo = m - 8.0 * sigma;
  k.dx = 16.0 * sigma / static_cast<double>(g - 1);
  std::vector<double> counts(g, 0.0);
  std::size_t off = 0;
  for (double x : xs) {
    const double t = (x - k.lo) / k.dx;
    if (!(t >= 0.0) || t > static_cast<double>(g - 1)) {
      ++off;
      continue;
    }
    const auto i = std::min(static_cast<std::size_t>(t), g - 2);
    const double w = t - static_cast<double>(i);
    counts[i] += 1.0 - w;
    counts[i + 1] += w;
  }
  const double rr = static_cast<double>(xs.size());
  k.outside = static_cast<double>(off) / rr;
  const auto half = static_cast<std::ptrdiff_t>(
    std::min<double>(static_cast<double>(g - 1), std::ceil(9.0 * h / k.dx)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  const double scale = std::pow(h, -1.0 - r) / rr;
  for (std::ptrdiff_t j = -half; j <= half; ++j) {
    const double z = static_cast<double>(j) * k.dx / h;
    kernel[static_cast<std::size_t>(j + half)] = scale * hermite_factor(z, r) * phi(z);
  }
  k.values.assign(g, 0.0);
  const auto gi = static_cast<std::ptrdiff_t>(g);
  for (std::ptrdiff_t s = 0; s < gi; ++s) {
    const double c = counts[static_cast<std::size_t>(s)];
    if (c == 0.0) {
      continue;
    }
    const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, s - half);
    const std::ptrdiff_t b = std::min<std::ptrdiff_t>(gi - 1, s + half);
    for (std::ptrdiff_t t = a; t <= b; ++t) {
      // kernel evaluated at x_t - x_s
      k.values[static_cast<std::size_t>(t)] += c * kernel[static_cast<std::size_t>(t - s + half)];
    }
  }
  return k;
}

double sample_variance(std::span<const double> xs)
{
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double acc = 0.0;
  for (double x : xs) {
    acc += (x - mean) * (x - mean);
  }
  return xs.size() > 1 ? acc / (n - 1.0) : 0.0;
}

} // namespace

std::string to_string(DistanceKind k)
{
  switch (k) {
  case DistanceKind::w1:
    return "w1";
  case DistanceKind::wp:
    return "wp";
  case DistanceKind::tv:
    return "tv";
  case DistanceKind::density_sup:
    return "density_sup";
  }
  return "w1";
}

DistanceKind distance_kind_from_string(const std::string& s)
{
  if (s == "w1") {
    return DistanceKind::w1;
  }
  if (s == "wp") {
    return DistanceKind::wp;
  }
  if (s == "tv") {
    return DistanceKind::tv;
  }
  if (s == "density_sup") {
    return DistanceKind::density_sup;
  }
  throw rejected_input("unknown metric kind '" + s + "'");
}

nlohmann::json to_json(const DistanceReport& r)
{
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["order"] = r.order;
  j["n_grid"] = r.n_grid;
  j["distance"] = r.distance;
  j["stderr"] = r.stderr_;
  j["fitted_slope"] = r.fitted_slope;
  j["slope_stderr"] = r.slope_stderr;
  return j;
}

double wasserstein_p(std::span<const double> xs, double m, double sigma, double p)
{
  if (xs.empty()) {
    throw rejected_input("wasserstein_p needs a nonempty sample");
  }
  if (!(sigma > 0.0) || !(p >= 1.0)) {
    throw rejected_input("wasserstein_p needs sigma > 0 and p >= 1");
  }
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double r = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double q = m + sigma * gauss_quantile((static_cast<double>(i) + 0.5) / r);
    const double diff = std::abs(sorted[i] - q);
    acc += p == 1.0 ? diff : std::pow(diff, p);
  }
  acc /= r;
  return p == 1.0 ? acc : std::pow(acc, 1.0 / p);
}

double silverman_bandwidth(std::span<const double> xs)
{
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double sd = std::sqrt(sample_variance(xs));
  auto q = [&](double level) {
    const double pos = level * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return i + 1 < s.size() ? (1.0 - w) * s[i] + w * s[i + 1] : s[i];
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = sd;
  if (iqr > 0.0) {
    spread = std::min(sd, iqr / 1.34);
  }
  return 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
}

double tv_kde(std::span<const double> xs, double m, double sigma, double bandwidth)
{
  if (!(sigma > 0.0)) {
    throw rejected_input("tv_kde needs sigma > 0");
  }
  if (xs.size() < 100) {
    throw rejected_input("tv_kde needs at least 100 samples");
  }
  const double dx = 16.0 * sigma / static_cast<double>(kKdeGrid - 1);
  const double h = std::max(bandwidth > 0.0 ? bandwidth : silverman_bandwidth(xs), dx);
  const auto k = binned_kde(xs, m, sigma, h, 0);
  double acc = 0.0;
  for (std::size_t i = 0; i < kKdeGrid; ++i) {
    const double x = k.lo + static_cast<double>(i) * k.dx;
    const double target = phi((x - m) / sigma) / sigma;
    const double w = (i == 0 || i + 1 == kKdeGrid) ? 0.5 : 1.0;
    acc += w * std::abs(k.values[i] - target);
  }
  const double tv = 0.5 * acc * k.dx + 0.5 * k.outside;
  return std::clamp(tv, 0.0, 1.0);
}

DensitySup density_sup_distance(std::span<const double> xs, double m, double sigma, int r)
{
  if (r < 0 || r > 3) {
    throw rejected_input("density_sup_distance supports derivative orders 0..3");
  }
  if (!(sigma > 0.0)) {
    throw rejected_input("density_sup_distance needs sigma > 0");
  }
  if (xs.size() < 1000) {
    throw rejected_input("density_sup_distance needs at least 1000 samples");
  }
  DensitySup out;
  const double dx = 16.0 * sigma / static_cast<double>(kKdeGrid - 1);
  const double rr = static_cast<double>(xs.size());
  out.degenerate = sample_variance(xs) < 1e-12;
  double h = out.degenerate ? 0.0 : silverman_bandwidth(xs);
  h *= std::pow(rr, 0.2 - 1.0 / (5.0 + 2.0 * r));
  out.bandwidth = std::max(h, dx);
  const auto k = binned_kde(xs, m, sigma, out.bandwidth, r);
  for (std::size_t i = 0; i < kKdeGrid; ++i) {
    const double z = (k.lo + static_cast<double>(i) * k.dx - m) / sigma;
    const double target = std::pow(sigma, -1.0 - r) * hermite_factor(z, r) * phi(z);
    out.value = std::max(out.value, std::abs(k.values[i] - target));
  }
  return out;
}

RateFit fit_rate(std::span<const double> n_grid, std::span<const double> distances, std::span<const double> stderrs)
{
  const std::size_t k = n_grid.size();
  if (k < 3 || distances.size() != k || (!stderrs.empty() && stderrs.size() != k)) {
    throw rejected_input("fit_rate needs at least 3 grid points and matching lengths");
  }
  bool unit = stderrs.empty();
  for (std::size_t i = 0; i < k; ++i) {
    if (!(distances[i] > 0.0)) {
      throw rejected_input("fit_rate needs positive distances");
    }
    if (!(n_grid[i] > 0.0)) {
      throw rejected_input("fit_rate needs positive n");
    }
    if (!unit && !(stderrs[i] > 0.0)) {
      unit = true;
    }
  }
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> w(k), x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    x[i] = std::log(n_grid[i]);
    y[i] = std::log(distances[i]);
    w[i] = unit ? 1.0 : std::pow(distances[i] / stderrs[i], 2);
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) {
    throw rejected_input("fit_rate needs at least two distinct n");
  }
  RateFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / sw;
  if (unit) {
    double rss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      rss += e * e;
    }
    f.slope_stderr = std::sqrt(rss / static_cast<double>(k - 2) * sw / det);
  } else {
    f.slope_stderr = std::sqrt(sw / det);
  }
  return f;
}

double projected_wp(std::span<const double> samples,
                    const Prediction& pred,
                    double p,
                    const std::vector<std::vector<double>>& directions)
{
  const std::size_t d = pred.dim();
  if (d == 0 || samples.size() % d != 0 || samples.empty()) {
    throw rejected_input("projected_wp: samples must be R x d");
  }
  if (directions.empty()) {
    throw rejected_input("projected_wp needs at least one direction");
  }
  const std::size_t r = samples.size() / d;
  std::vector<double> proj(r);
  double acc = 0.0;
  for (const auto& u : directions) {
    if (u.size() != d) {
      throw rejected_input("projected_wp: direction has wrong dimension");
    }
    const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += u[j] * samples[i * d + j];
      }
      proj[i] = s;
    }
    const double sd = std::sqrt(uv.dot(pred.C * uv));
    acc += wasserstein_p(proj, uv.dot(pred.m), sd, p);
  }
  return acc / static_cast<double>(directions.size());
}

double projected_wp(std::span<const double> samples,
                    const Prediction& pred,
                    double p,
                    std::size_t n_projections,
                    std::uint64_t seed)
{
  const std::size_t d = pred.dim();
  if (d < 2) {
    throw rejected_input("projected_wp needs d >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < n_projections; ++k) {
    std::vector<double> u(d);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& c : u) {
        c = normal(rng);
        norm += c * c;
      }
    } while (norm == 0.0);
    for (auto& c : u) {
      c /= std::sqrt(norm);
    }
    dirs.push_back(std::move(u));
  }
  return projected_wp(samples, pred, p, dirs);
}

double kolmogorov_survival(double x)
{
  if (x <= 0.0) {
    return 1.0;
  }
  if (x < 1.18) {
    // Jacobi-transformed series, fast for small x
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double o = 2.0 * k - 1.0;
      cdf += std::exp(-o * o * pi2 / (8.0 * x * x));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) {
      break;
    }
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_normal_test(std::span<const double> xs, double m, double sigma)
{
  if (xs.empty() || !(sigma > 0.0)) {
    throw rejected_input("ks_normal_test needs a nonempty sample and sigma > 0");
  }
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double r = static_cast<double>(s.size());
  KsResult out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = gauss_cdf((s[i] - m) / sigma);
    out.statistic = std::max({out.statistic, (static_cast<double>(i) + 1.0) / r - f, f - static_cast<double>(i) / r});
  }
  const double sr = std::sqrt(r);
  out.p_value = kolmogorov_survival((sr + 0.12 + 0.11 / sr) * out.statistic);
  return out;
}

double bootstrap_stderr(std::span<const double> xs,
                        const std::function<double(std::span<const double>)>& stat,
                        std::size_t resamples,
                        std::uint64_t seed)
{
  if (xs.empty() || resamples < 2) {
    throw rejected_input("bootstrap_stderr needs data and at least 2 resamples");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> buf(xs.size());
  std::vector<double> vals(resamples);
  for (auto& v : vals) {
    for (auto& b : buf) {
      b = xs[pick(rng)];
    }
    v = stat(buf);
  }
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(resamples);
  double acc = 0.0;
  for (double v : vals) {
    acc += (v - mean) * (v - mean);
  }
  return std::sqrt(acc / static_cast<double>(resamples - 1));
}

} // namespace loggas
