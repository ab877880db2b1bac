#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dgtime {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Vector-valued function of time, t -> R^d.
using TimeFunction = std::function<Vector(double)>;

/// Raised when an evaluation point lies outside the time interval.
class out_of_domain : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised when input data (f, g, u0) contains non-finite values or
/// cannot be evaluated.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-sided limit selector at a breakpoint.
enum class Side { left, right };

/// Partition 0 = t_0 < t_1 < ... < t_N = T with slabs I_n = (t_{n-1}, t_n].
///
/// Slabs are indexed from 0 in code: slab s covers (t_s, t_{s+1}].
class TimeMesh {
 public:
  explicit TimeMesh(std::vector<double> breakpoints);

  int num_slabs() const { return static_cast<int>(points_.size()) - 1; }
  double end_time() const { return points_.back(); }
  double point(int i) const { return points_.at(i); }
  double slab_begin(int s) const { return points_.at(s); }
  double slab_end(int s) const { return points_.at(s + 1); }
  double width(int s) const { return points_.at(s + 1) - points_.at(s); }
  double max_width() const;
  std::span<const double> breakpoints() const { return points_; }

  /// Index of the slab used to evaluate at t. At an interior breakpoint
  /// t_n the left side selects slab n-1 (right-closed slabs) and the right
  /// side selects slab n.
  int locate(double t, Side side) const;

  bool operator==(const TimeMesh&) const = default;

 private:
  std::vector<double> points_;
};

TimeMesh build_uniform_mesh(double T, int N);

/// Quadrature rule on the reference interval [0, 1].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
  int exactness_degree = 0;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// n-point Gauss-Legendre rule on [0, 1], 1 <= n <= 16.
Quadrature gauss_legendre(int n);

/// Legendre polynomial P_i on [-1, 1] and its derivative, for i < count.
void legendre_values(double x, std::span<double> values, std::span<double> derivatives);

/// Shifted Legendre basis phi_i(t) = P_i(2 tau - 1), tau = (t - a) / k, on a
/// slab of width k. Values and t-derivatives at the reference point tau.
struct SlabBasis {
  Vector values;
  Vector derivatives;
};
SlabBasis slab_basis(int q, double tau, double width);

/// Polynomial of degree q-1 on one slab in the shifted Legendre basis.
/// coeffs(i, :) is the vector coefficient of phi_i.
class SlabPoly {
 public:
  SlabPoly(int q, int dim);
  explicit SlabPoly(Matrix coeffs);

  int q() const { return static_cast<int>(coeffs_.rows()); }
  int degree() const { return q() - 1; }
  int dim() const { return static_cast<int>(coeffs_.cols()); }
  const Matrix& coeffs() const { return coeffs_; }

  /// Value at the reference point tau in [0, 1].
  Vector value(double tau) const;
  /// Time derivative at tau on a slab of the given width.
  Vector derivative(double tau, double width) const;
  /// Value at the right endpoint (tau = 1); every basis function is 1 there.
  Vector right_value() const { return coeffs_.colwise().sum().transpose(); }
  /// Value at the left endpoint (tau = 0), where phi_i = (-1)^i.
  Vector left_value() const;

 private:
  Matrix coeffs_;
};

/// Piecewise polynomial of degree q-1 per slab, possibly discontinuous at
/// the breakpoints.
class BrokenFunction {
 public:
  BrokenFunction(TimeMesh mesh, std::vector<SlabPoly> slabs);
  static BrokenFunction zero(TimeMesh mesh, int q, int dim);

  const TimeMesh& mesh() const { return mesh_; }
  int q() const { return slabs_.front().q(); }
  int dim() const { return slabs_.front().dim(); }
  const SlabPoly& slab(int s) const { return slabs_.at(s); }
  const std::vector<SlabPoly>& slabs() const { return slabs_; }

  /// One-sided limit at t. side=right requires t < T, side=left t > 0.
  Vector eval(double t, Side side = Side::left) const;
  /// Value of the slab-s polynomial (extended to the closed interval) at t.
  Vector eval_in_slab(int s, double t) const;
  Vector derivative_in_slab(int s, double t) const;

  /// U^n = U|_{I_n}(t_n), n = 1..N.
  Vector left_limit(int n) const;
  /// U^n_+ = lim_{t -> t_n+} U, n = 0..N-1.
  Vector right_limit(int n) const;
  /// [U]^n = U^n_+ - U^n, n = 1..N-1.
  Vector jump(int n) const;

 private:
  TimeMesh mesh_;
  std::vector<SlabPoly> slabs_;
};

/// Quadrature of phi_i(t) * f(t) over slab s for i < q. Row i holds the
/// vector-valued moment.
Matrix slab_moments(const TimeFunction& f, const TimeMesh& mesh, int s, int q, int dim,
                    const Quadrature& quad);

/// Discrete time derivative form
///   sum_n int_{I_n} (Y', X)_M + sum_{n=1}^{N-1} ([Y]^n, X^n_+)_M + (Y^0_+, X^0_+)_M.
double dh_form(const BrokenFunction& Y, const BrokenFunction& X, const Matrix& M,
               const Quadrature& quad);

/// Adjoint form
///   sum_n int_{I_n} (Y, X')_M + sum_{n=1}^{N-1} (Y^n, [X]^n)_M - (Y^N, X^N)_M.
double dh_star_form(const BrokenFunction& Y, const BrokenFunction& X, const Matrix& M,
                    const Quadrature& quad);

}  // namespace dgtime
