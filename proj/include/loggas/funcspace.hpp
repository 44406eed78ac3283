#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace loggas {

/// Closed interval [lo, hi] with lo < hi.
struct Interval
{
  double lo = -1.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool contains(const Interval& other) const
  {
    return other.lo >= lo && other.hi <= hi;
  }
  bool operator==(const Interval&) const = default;
};

inline constexpr Interval kReferenceInterval{-1.0, 1.0};

/// Default fit degrees.
inline constexpr std::size_t kFitDegree = 64;
inline constexpr std::size_t kQuadratureDegree = 256;

/// Relative drop tolerance for trailing coefficients.
inline constexpr double kDropTolerance = 1e-13;

//! Finite Chebyshev-T expansion  sum_k a_k T_k(t(x))  where t maps the
//! interval affinely onto [-1, 1].  Immutable value type.
class ChebSeries
{
public:
  ChebSeries();
  explicit ChebSeries(std::vector<double> coeffs, Interval interval = kReferenceInterval);

  static ChebSeries constant(double c, Interval interval = kReferenceInterval);
  /// T_k on the given interval.
  static ChebSeries basis(std::size_t k, Interval interval = kReferenceInterval);

  const std::vector<double>& coeffs() const { return coeffs_; }
  const Interval& interval() const { return interval_; }
  std::size_t degree() const { return coeffs_.size() - 1; }

  double to_reference(double x) const;
  /// d t / d x for the affine map onto [-1, 1].
  double reference_scale() const { return 2.0 / interval_.width(); }

  double operator()(double x) const;

  /// Sum of |a_k|; bounds the series on its interval.
  double coefficient_l1() const;

  /// Drops trailing coefficients below kDropTolerance * coefficient_l1().
  ChebSeries truncated() const;

  ChebSeries operator-() const;
  friend ChebSeries operator+(const ChebSeries& a, const ChebSeries& b);
  friend ChebSeries operator-(const ChebSeries& a, const ChebSeries& b);
  friend ChebSeries operator*(double c, const ChebSeries& s);
  friend ChebSeries operator*(const ChebSeries& a, const ChebSeries& b);

private:
  std::vector<double> coeffs_;
  Interval interval_;
};

/// Interpolant of degree `degree` at the Chebyshev-Gauss (root) nodes.
/// Throws rejected_input if the evaluator returns a non-finite value.
ChebSeries cheb_fit(const std::function<double(double)>& evaluator,
                    std::size_t degree,
                    Interval interval = kReferenceInterval);

/// Clenshaw evaluation; extends polynomially outside the interval.
double cheb_eval(const ChebSeries& s, double x);

ChebSeries cheb_derivative(const ChebSeries& s);

/// Primitive F with F(anchor) = 0.
ChebSeries cheb_primitive(const ChebSeries& s, double anchor = 0.0);

/// Re-expands the polynomial represented by `s` on another interval.  Exact
/// up to roundoff when `degree >= s.degree()`.
ChebSeries reexpand(const ChebSeries& s, Interval target, std::size_t degree);
ChebSeries reexpand(const ChebSeries& s, Interval target);

/// Integral against the arcsine law dx / (pi sqrt(1 - x^2)); needs [-1, 1].
double integral_arcsine(const ChebSeries& s);

/// Integral against the semicircle law (2/pi) sqrt(1 - x^2) dx; needs [-1, 1].
double integral_semicircle(const ChebSeries& s);

/// Coefficients (b_k) with  sum a_k T_k = sum b_k U_k.
std::vector<double> chebyshev_t_to_u(std::span<const double> t_coeffs);
/// Coefficients (a_k) with  sum b_k U_k = sum a_k T_k.
std::vector<double> chebyshev_u_to_t(std::span<const double> u_coeffs);

/// (s(x) - s(y)) / (x - y), with s'(x) on the diagonal.  Uses the
/// three-term recurrence for divided differences of T_k, so there is no
/// cancellation when x and y are close.
double divided_difference(const ChebSeries& s, double x, double y);

//! Moments  M_k = sum_j w_j T_k(t(y_j))  of a discrete measure (quadrature
//! rule or empirical measure) in the reference coordinate of `interval`.
struct MeasureMoments
{
  Interval interval;
  std::vector<double> m;
};

MeasureMoments measure_moments(std::span<const double> nodes,
                               std::span<const double> weights,
                               Interval interval,
                               std::size_t max_degree);

/// Uniform-weight moments (1/n) sum_i T_k(t(lambda_i)).
MeasureMoments empirical_moments(std::span<const double> points,
                                 Interval interval,
                                 std::size_t max_degree);

/// x -> integral (s(x) - s(y)) / (x - y) mu(dy), where `moments` describes mu
/// in the coordinate of s.interval().  O(degree) per evaluation.
double integrate_divided_difference(const ChebSeries& s,
                                    const MeasureMoments& moments,
                                    double x);

//! Nodes and weights of an N-point quadrature rule.
struct QuadratureRule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Chebyshev (first kind) rule for the arcsine law; exact up to
/// degree 2N - 1.
QuadratureRule gauss_chebyshev_arcsine(std::size_t n);

/// Gauss-Chebyshev (second kind) rule for the semicircle law; exact up to
/// degree 2N - 1.
QuadratureRule gauss_chebyshev_semicircle(std::size_t n);

/// Max over `points` equally spaced samples of |s| on `on`.
double sup_norm(const ChebSeries& s, Interval on, std::size_t points = 2048);

/// max_{r' <= r} sup |s^{(r')}| on `on`.
double c_norm(const ChebSeries& s, int r, Interval on);

// -- mollification ----------------------------------------------------------

//! Normalised bump  eta(y) = exp(-1/(1-y^2)) / Z  on (-1, 1).
class BumpKernel
{
public:
  static const BumpKernel& instance();

  double operator()(double y) const;
  double normalization() const { return normalization_; }
  /// Integral of |y| eta(y) dy.
  double abs_moment() const { return abs_moment_; }
  /// Integral of |y|^gamma eta(y) dy.
  double abs_moment(double gamma) const;

private:
  BumpKernel();
  double normalization_;
  double abs_moment_;
};

/// xi_eps = xi * eta_eps on [lo + eps, hi - eps].  Output degree is
/// max(degree, s.degree()); pass 0 to keep the input degree.
ChebSeries mollify(const ChebSeries& s, double eps, std::size_t degree = 0);

/// Same convolution applied directly to a pointwise evaluator defined on
/// `domain`.
ChebSeries mollify(const std::function<double(double)>& evaluator,
                   Interval domain,
                   double eps,
                   std::size_t degree);

// -- configuration strings and serialisation ---------------------------------

/// Parses "poly:c0,c1,..." (monomials, ascending) or "cheb:a0,a1,..."
/// (T_k coefficients on [-1, 1]) and expands the polynomial on `interval`.
ChebSeries parse_function_spec(const std::string& spec,
                               Interval interval = kReferenceInterval);

nlohmann::json to_json(const ChebSeries& s);
ChebSeries series_from_json(const nlohmann::json& j);

} // namespace loggas
