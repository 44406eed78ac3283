#include "loggas/funcspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

constexpr double kPi = std::numbers::pi;

void check_interval(const Interval& iv)
{
  if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
    throw rejected_input("interval must satisfy lo < hi");
  }
}

void require_reference(const ChebSeries& s, const char* what)
{
  if (!(s.interval() == kReferenceInterval)) {
    throw rejected_input(std::string(what) + " requires a series on [-1, 1]");
  }
}

} // namespace

// -- ChebSeries ---------------------------------------------------------------

ChebSeries::ChebSeries()
  : coeffs_{0.0}
{}

ChebSeries::ChebSeries(std::vector<double> coeffs, Interval interval)
  : coeffs_(std::move(coeffs))
  , interval_(interval)
{
  check_interval(interval_);
  if (coeffs_.empty()) {
    throw rejected_input("coefficient sequence must be non-empty");
  }
}

ChebSeries ChebSeries::constant(double c, Interval interval)
{
  return ChebSeries({c}, interval);
}

ChebSeries ChebSeries::basis(std::size_t k, Interval interval)
{
  std::vector<double> c(k + 1, 0.0);
  c[k] = 1.0;
  return ChebSeries(std::move(c), interval);
}

double ChebSeries::to_reference(double x) const
{
  return (2.0 * x - (interval_.lo + interval_.hi)) / interval_.width();
}

double ChebSeries::operator()(double x) const
{
  const double t = to_reference(x);
  double b1 = 0.0;
  double b2 = 0.0;
  for (std::size_t k = coeffs_.size() - 1; k >= 1; --k) {
    const double b0 = coeffs_[k] + 2.0 * t * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return coeffs_[0] + t * b1 - b2;
}

double ChebSeries::coefficient_l1() const
{
  double s = 0.0;
  for (double a : coeffs_) {
    s += std::abs(a);
  }
  return s;
}

ChebSeries ChebSeries::truncated() const
{
  const double tol = kDropTolerance * coefficient_l1();
  std::size_t keep = coeffs_.size();
  while (keep > 1 && std::abs(coeffs_[keep - 1]) <= tol) {
    --keep;
  }
  return ChebSeries(std::vector<double>(coeffs_.begin(), coeffs_.begin() + keep),
                    interval_);
}

ChebSeries ChebSeries::operator-() const
{
  return -1.0 * *this;
}

ChebSeries operator+(const ChebSeries& a, const ChebSeries& b)
{
  if (!(a.interval() == b.interval())) {
    throw rejected_input("series on different intervals cannot be added");
  }
  std::vector<double> c(std::max(a.coeffs().size(), b.coeffs().size()), 0.0);
  for (std::size_t k = 0; k < a.coeffs().size(); ++k) {
    c[k] += a.coeffs()[k];
  }
  for (std::size_t k = 0; k < b.coeffs().size(); ++k) {
    c[k] += b.coeffs()[k];
  }
  return ChebSeries(std::move(c), a.interval());
}

ChebSeries operator-(const ChebSeries& a, const ChebSeries& b)
{
  return a + (-1.0 * b);
}

ChebSeries operator*(double c, const ChebSeries& s)
{
  std::vector<double> out = s.coeffs();
  for (double& a : out) {
    a *= c;
  }
  return ChebSeries(std::move(out), s.interval());
}

ChebSeries operator*(const ChebSeries& a, const ChebSeries& b)
{
  if (!(a.interval() == b.interval())) {
    throw rejected_input("series on different intervals cannot be multiplied");
  }
  const auto& x = a.coeffs();
  const auto& y = b.coeffs();
  std::vector<double> c(x.size() + y.size() - 1, 0.0);
  // T_i T_j = (T_{i+j} + T_{|i-j|}) / 2
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double h = 0.5 * x[i] * y[j];
      c[i + j] += h;
      c[i > j ? i - j : j - i] += h;
    }
  }
  return ChebSeries(std::move(c), a.interval());
}

// -- fitting and calculus -----------------------------------------------------

ChebSeries cheb_fit(const std::function<double(double)>& evaluator,
                    std::size_t degree,
                    Interval interval)
{
  check_interval(interval);
  const std::size_t n = degree + 1;
  std::vector<double> values(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = std::cos(kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(n));
    const double x = interval.center() + 0.5 * interval.width() * t;
    const double v = evaluator(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "evaluator returned a non-finite value at x = " << x;
      throw rejected_input(msg.str());
    }
    values[j] = v;
  }
  // cos(pi k (2j+1) / (2n)) from a table indexed modulo 4n.
  const std::size_t period = 4 * n;
  std::vector<double> table(period);
  for (std::size_t m = 0; m < period; ++m) {
    table[m] = std::cos(kPi * static_cast<double>(m) / static_cast<double>(2 * n));
  }
  std::vector<double> coeffs(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += values[j] * table[(k * (2 * j + 1)) % period];
    }
    coeffs[k] = 2.0 * acc / static_cast<double>(n);
  }
  coeffs[0] *= 0.5;
  return ChebSeries(std::move(coeffs), interval);
}

double cheb_eval(const ChebSeries& s, double x)
{
  return s(x);
}

ChebSeries cheb_derivative(const ChebSeries& s)
{
  const auto& a = s.coeffs();
  const std::size_t n = a.size();
  if (n == 1) {
    return ChebSeries::constant(0.0, s.interval());
  }
  // d_{k-1} = d_{k+1} + 2 k a_k, run downwards with d_{n-1} = d_n = 0.
  std::vector<double> d(n + 1, 0.0);
  for (std::size_t k = n - 1; k >= 1; --k) {
    d[k - 1] = d[k + 1] + 2.0 * static_cast<double>(k) * a[k];
  }
  d.resize(n - 1);
  d[0] *= 0.5;
  const double scale = s.reference_scale();
  for (double& v : d) {
    v *= scale;
  }
  return ChebSeries(std::move(d), s.interval());
}

ChebSeries cheb_primitive(const ChebSeries& s, double anchor)
{
  const auto& a = s.coeffs();
  const std::size_t n = a.size();
  std::vector<double> b(n + 1, 0.0);
  auto coeff = [&](std::size_t k) { return k < n ? a[k] : 0.0; };
  b[1] = coeff(0) - 0.5 * coeff(2);
  for (std::size_t k = 2; k <= n; ++k) {
    b[k] = (coeff(k - 1) - coeff(k + 1)) / (2.0 * static_cast<double>(k));
  }
  const double half_width = 0.5 * s.interval().width();
  for (double& v : b) {
    v *= half_width;
  }
  ChebSeries prim(std::move(b), s.interval());
  std::vector<double> c = prim.coeffs();
  c[0] -= prim(anchor);
  return ChebSeries(std::move(c), s.interval());
}

ChebSeries reexpand(const ChebSeries& s, Interval target, std::size_t degree)
{
  return cheb_fit([&](double x) { return s(x); }, degree, target);
}

ChebSeries reexpand(const ChebSeries& s, Interval target)
{
  return reexpand(s, target, s.degree());
}

double integral_arcsine(const ChebSeries& s)
{
  require_reference(s, "integral_arcsine");
  return s.coeffs()[0];
}

double integral_semicircle(const ChebSeries& s)
{
  require_reference(s, "integral_semicircle");
  const auto& a = s.coeffs();
  return a[0] - (a.size() > 2 ? 0.5 * a[2] : 0.0);
}

std::vector<double> chebyshev_t_to_u(std::span<const double> t)
{
  std::vector<double> u(t.size(), 0.0);
  if (t.empty()) {
    return u;
  }
  u[0] += t[0];
  for (std::size_t k = 1; k < t.size(); ++k) {
    u[k] += 0.5 * t[k];
    if (k >= 2) {
      u[k - 2] -= 0.5 * t[k];
    }
  }
  return u;
}

std::vector<double> chebyshev_u_to_t(std::span<const double> u)
{
  const std::size_t n = u.size();
  std::vector<double> carry(n + 2, 0.0);
  std::vector<double> t(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    carry[k] = u[k] + carry[k + 2];
    t[k] = (k == 0) ? carry[k] : 2.0 * carry[k];
  }
  return t;
}

double divided_difference(const ChebSeries& s, double x, double y)
{
  const auto& a = s.coeffs();
  const double t = s.to_reference(x);
  const double r = s.to_reference(y);
  // D_0 = 0, D_1 = 1, D_{k+1} = 2 t D_k + 2 T_k(r) - D_{k-1}
  double d_prev = 0.0;
  double d_cur = 1.0;
  double tk_prev = 1.0; // T_0(r)
  double tk_cur = r;    // T_1(r)
  double acc = a.size() > 1 ? a[1] : 0.0;
  for (std::size_t k = 1; k + 1 < a.size(); ++k) {
    const double d_next = 2.0 * t * d_cur + 2.0 * tk_cur - d_prev;
    const double tk_next = 2.0 * r * tk_cur - tk_prev;
    d_prev = d_cur;
    d_cur = d_next;
    tk_prev = tk_cur;
    tk_cur = tk_next;
    acc += a[k + 1] * d_cur;
  }
  return acc * s.reference_scale();
}

MeasureMoments measure_moments(std::span<const double> nodes,
                               std::span<const double> weights,
                               Interval interval,
                               std::size_t max_degree)
{
  MeasureMoments out{interval, std::vector<double>(max_degree + 1, 0.0)};
  const double c = interval.center();
  const double h = 0.5 * interval.width();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double t = (nodes[j] - c) / h;
    const double w = weights[j];
    double tp = 1.0;
    double tc = t;
    out.m[0] += w;
    if (max_degree >= 1) {
      out.m[1] += w * t;
    }
    for (std::size_t k = 2; k <= max_degree; ++k) {
      const double tn = 2.0 * t * tc - tp;
      tp = tc;
      tc = tn;
      out.m[k] += w * tc;
    }
  }
  return out;
}

MeasureMoments empirical_moments(std::span<const double> points,
                                 Interval interval,
                                 std::size_t max_degree)
{
  std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
  return measure_moments(points, w, interval, max_degree);
}

double integrate_divided_difference(const ChebSeries& s,
                                    const MeasureMoments& moments,
                                    double x)
{
  const auto& a = s.coeffs();
  if (!(moments.interval == s.interval())) {
    throw rejected_input("moments were computed for a different interval");
  }
  if (moments.m.size() + 1 < a.size()) {
    throw rejected_input("not enough moments for the series degree");
  }
  const double t = s.to_reference(x);
  // I_0 = 0, I_1 = M_0, I_{k+1} = 2 t I_k + 2 M_k - I_{k-1}
  double i_prev = 0.0;
  double i_cur = moments.m[0];
  double acc = a.size() > 1 ? a[1] * i_cur : 0.0;
  for (std::size_t k = 1; k + 1 < a.size(); ++k) {
    const double i_next = 2.0 * t * i_cur + 2.0 * moments.m[k] - i_prev;
    i_prev = i_cur;
    i_cur = i_next;
    acc += a[k + 1] * i_cur;
  }
  return acc * s.reference_scale();
}

QuadratureRule gauss_chebyshev_arcsine(std::size_t n)
{
  QuadratureRule q{std::vector<double>(n), std::vector<double>(n, 1.0 / static_cast<double>(n))};
  for (std::size_t j = 0; j < n; ++j) {
    q.nodes[j] = std::cos(kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(n));
  }
  return q;
}

QuadratureRule gauss_chebyshev_semicircle(std::size_t n)
{
  QuadratureRule q{std::vector<double>(n), std::vector<double>(n)};
  const double np1 = static_cast<double>(n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = kPi * static_cast<double>(j + 1) / np1;
    const double s = std::sin(theta);
    q.nodes[j] = std::cos(theta);
    q.weights[j] = 2.0 / np1 * s * s;
  }
  return q;
}

double sup_norm(const ChebSeries& s, Interval on, std::size_t points)
{
  double m = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = on.lo + on.width() * static_cast<double>(i) / static_cast<double>(points - 1);
    m = std::max(m, std::abs(s(x)));
  }
  return m;
}

double c_norm(const ChebSeries& s, int r, Interval on)
{
  double m = sup_norm(s, on);
  ChebSeries d = s;
  for (int k = 1; k <= r; ++k) {
    d = cheb_derivative(d);
    m = std::max(m, sup_norm(d, on));
  }
  return m;
}

// -- mollification ------------------------------------------------------------

namespace {

double raw_bump(double y)
{
  const double q = 1.0 - y * y;
  return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

template <class F>
double integrate_on_unit(F&& f)
{
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 15, 1e-14);
}

} // namespace

BumpKernel::BumpKernel()
{
  normalization_ = integrate_on_unit(raw_bump);
  abs_moment_ = abs_moment(1.0);
}

const BumpKernel& BumpKernel::instance()
{
  static const BumpKernel k;
  return k;
}

double BumpKernel::operator()(double y) const
{
  return raw_bump(y) / normalization_;
}

double BumpKernel::abs_moment(double gamma) const
{
  const double z = normalization_;
  // symmetric: integrate on (0, 1) and double
  using boost::math::quadrature::gauss_kronrod;
  const double half = gauss_kronrod<double, 61>::integrate(
    [&](double y) { return std::pow(y, gamma) * raw_bump(y); }, 0.0, 1.0, 15, 1e-14);
  return 2.0 * half / z;
}

ChebSeries mollify(const std::function<double(double)>& evaluator,
                   Interval domain,
                   double eps,
                   std::size_t degree)
{
  if (!(eps > 0.0)) {
    throw rejected_input("mollification width must be positive");
  }
  if (!(domain.width() > 2.0 * eps)) {
    throw rejected_input("domain too small for the mollification width");
  }
  const BumpKernel& eta = BumpKernel::instance();
  const Interval target{domain.lo + eps, domain.hi - eps};
  auto smoothed = [&](double x) {
    return integrate_on_unit([&](double y) { return evaluator(x - eps * y) * eta(y); });
  };
  return cheb_fit(smoothed, degree, target).truncated();
}

ChebSeries mollify(const ChebSeries& s, double eps, std::size_t degree)
{
  return mollify([&](double x) { return s(x); },
                 s.interval(),
                 eps,
                 std::max(degree, s.degree()));
}

// -- configuration strings ----------------------------------------------------

ChebSeries parse_function_spec(const std::string& spec, Interval interval)
{
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw rejected_input("function spec must look like 'poly:...' or 'cheb:...': " + spec);
  }
  const std::string kind = spec.substr(0, colon);
  std::vector<double> values;
  std::stringstream ss(spec.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw rejected_input("unparseable coefficient '" + item + "' in " + spec);
    }
  }
  if (values.empty() || spec.back() == ',') {
    throw rejected_input("function spec has no coefficients or a trailing comma: " + spec);
  }
  const std::size_t degree = values.size() - 1;
  if (kind == "poly") {
    auto horner = [&](double x) {
      double acc = 0.0;
      for (std::size_t k = values.size(); k-- > 0;) {
        acc = acc * x + values[k];
      }
      return acc;
    };
    return cheb_fit(horner, degree, interval).truncated();
  }
  if (kind == "cheb") {
    ChebSeries ref(values, kReferenceInterval);
    if (interval == kReferenceInterval) {
      return ref;
    }
    return reexpand(ref, interval, degree).truncated();
  }
  throw rejected_input("unknown function spec kind '" + kind + "'");
}

nlohmann::json to_json(const ChebSeries& s)
{
  return nlohmann::json{{"interval", {s.interval().lo, s.interval().hi}},
                        {"coeffs", s.coeffs()}};
}

ChebSeries series_from_json(const nlohmann::json& j)
{
  try {
    const auto iv = j.at("interval");
    return ChebSeries(j.at("coeffs").get<std::vector<double>>(),
                      Interval{iv.at(0).get<double>(), iv.at(1).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw rejected_input(std::string("malformed series JSON: ") + e.what());
  }
}

} // namespace loggas
