#include "dgtime/timecore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dgtime {

TimeMesh::TimeMesh(std::vector<double> breakpoints) : points_(std::move(breakpoints)) {
  if (points_.size() < 2) {
    throw std::invalid_argument("TimeMesh: need at least two breakpoints");
  }
  if (points_.front() != 0.0) {
    throw std::invalid_argument("TimeMesh: first breakpoint must be 0");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]) || !std::isfinite(points_[i])) {
      throw std::invalid_argument("TimeMesh: breakpoints must be finite and strictly increasing");
    }
  }
}

double TimeMesh::max_width() const {
  double k = 0.0;
  for (int s = 0; s < num_slabs(); ++s) k = std::max(k, width(s));
  return k;
}

int TimeMesh::locate(double t, Side side) const {
  const double T = end_time();
  if (!(t >= 0.0 && t <= T)) {
    throw out_of_domain("TimeMesh::locate: t = " + std::to_string(t) + " outside [0, T]");
  }
  if (side == Side::right && t == T) {
    throw out_of_domain("TimeMesh::locate: no right limit at t = T");
  }
  if (side == Side::left && t == 0.0) {
    throw out_of_domain("TimeMesh::locate: no left limit at t = 0");
  }
  // First breakpoint >= t (left) or > t (right); the slab ends there.
  auto it = side == Side::left ? std::lower_bound(points_.begin() + 1, points_.end(), t)
                               : std::upper_bound(points_.begin() + 1, points_.end(), t);
  return static_cast<int>(it - points_.begin()) - 1;
}

TimeMesh build_uniform_mesh(double T, int N) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw std::invalid_argument("build_uniform_mesh: T must be positive");
  }
  if (N < 1) {
    throw std::invalid_argument("build_uniform_mesh: N must be >= 1");
  }
  std::vector<double> points(N + 1);
  for (int i = 0; i <= N; ++i) points[i] = T * i / N;
  points[N] = T;
  return TimeMesh(std::move(points));
}

Quadrature gauss_legendre(int n) {
  if (n < 1 || n > 16) {
    throw std::invalid_argument("gauss_legendre: n must be in 1..16");
  }
  Quadrature quad;
  quad.nodes.resize(n);
  quad.weights.resize(n);
  quad.exactness_degree = 2 * n - 1;

  // Newton iteration for the roots of P_n on [-1, 1]; the lower half is
  // computed and mirrored so the rule is exactly symmetric about 1/2.
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
    }
    // z is the i-th largest root; map x -> (1 + x) / 2.
    const double w = 1.0 / ((1.0 - z * z) * dp * dp);  // half of the [-1,1] weight
    const double x = 0.5 * (1.0 - z);
    quad.nodes[i] = x;
    quad.nodes[n - 1 - i] = 1.0 - x;
    quad.weights[i] = w;
    quad.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) quad.nodes[n / 2] = 0.5;
  return quad;
}

void legendre_values(double x, std::span<double> values, std::span<double> derivatives) {
  const std::size_t count = values.size();
  if (count == 0) return;
  values[0] = 1.0;
  if (!derivatives.empty()) derivatives[0] = 0.0;
  if (count == 1) return;
  values[1] = x;
  if (!derivatives.empty()) derivatives[1] = 1.0;
  for (std::size_t i = 2; i < count; ++i) {
    const double j = static_cast<double>(i);
    values[i] = ((2.0 * j - 1.0) * x * values[i - 1] - (j - 1.0) * values[i - 2]) / j;
    // P_i' = P_{i-2}' + (2i - 1) P_{i-1}
    if (!derivatives.empty()) {
      derivatives[i] = derivatives[i - 2] + (2.0 * j - 1.0) * values[i - 1];
    }
  }
}

SlabBasis slab_basis(int q, double tau, double width) {
  SlabBasis basis{Vector(q), Vector(q)};
  legendre_values(2.0 * tau - 1.0, std::span(basis.values.data(), q),
                  std::span(basis.derivatives.data(), q));
  basis.derivatives *= 2.0 / width;
  return basis;
}

SlabPoly::SlabPoly(int q, int dim) {
  if (q < 1 || dim < 0) {
    throw std::invalid_argument("SlabPoly: need q >= 1 and dim >= 0");
  }
  coeffs_ = Matrix::Zero(q, dim);
}

SlabPoly::SlabPoly(Matrix coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.rows() < 1) {
    throw std::invalid_argument("SlabPoly: need q >= 1");
  }
}

Vector SlabPoly::value(double tau) const {
  const SlabBasis b = slab_basis(q(), tau, 1.0);
  return coeffs_.transpose() * b.values;
}

Vector SlabPoly::derivative(double tau, double width) const {
  const SlabBasis b = slab_basis(q(), tau, width);
  return coeffs_.transpose() * b.derivatives;
}

Vector SlabPoly::left_value() const {
  Vector v = Vector::Zero(dim());
  for (int i = 0; i < q(); ++i) {
    v += (i % 2 == 0 ? 1.0 : -1.0) * coeffs_.row(i).transpose();
  }
  return v;
}

BrokenFunction::BrokenFunction(TimeMesh mesh, std::vector<SlabPoly> slabs)
    : mesh_(std::move(mesh)), slabs_(std::move(slabs)) {
  if (static_cast<int>(slabs_.size()) != mesh_.num_slabs()) {
    throw std::invalid_argument("BrokenFunction: slab count does not match the mesh");
  }
  for (const auto& s : slabs_) {
    if (s.q() != slabs_.front().q() || s.dim() != slabs_.front().dim()) {
      throw std::invalid_argument("BrokenFunction: slabs must share degree and dimension");
    }
  }
}

BrokenFunction BrokenFunction::zero(TimeMesh mesh, int q, int dim) {
  std::vector<SlabPoly> slabs(mesh.num_slabs(), SlabPoly(q, dim));
  return BrokenFunction(std::move(mesh), std::move(slabs));
}

Vector BrokenFunction::eval(double t, Side side) const {
  const int s = mesh_.locate(t, side);
  return eval_in_slab(s, t);
}

Vector BrokenFunction::eval_in_slab(int s, double t) const {
  const double tau = (t - mesh_.slab_begin(s)) / mesh_.width(s);
  return slabs_.at(s).value(tau);
}

Vector BrokenFunction::derivative_in_slab(int s, double t) const {
  const double tau = (t - mesh_.slab_begin(s)) / mesh_.width(s);
  return slabs_.at(s).derivative(tau, mesh_.width(s));
}

Vector BrokenFunction::left_limit(int n) const {
  if (n < 1 || n > mesh_.num_slabs()) {
    throw std::invalid_argument("BrokenFunction::left_limit: n must be in 1..N");
  }
  return slabs_[n - 1].right_value();
}

Vector BrokenFunction::right_limit(int n) const {
  if (n < 0 || n >= mesh_.num_slabs()) {
    throw std::invalid_argument("BrokenFunction::right_limit: n must be in 0..N-1");
  }
  return slabs_[n].left_value();
}

Vector BrokenFunction::jump(int n) const {
  if (n < 1 || n >= mesh_.num_slabs()) {
    throw std::invalid_argument("BrokenFunction::jump: n must be in 1..N-1");
  }
  return right_limit(n) - left_limit(n);
}

Matrix slab_moments(const TimeFunction& f, const TimeMesh& mesh, int s, int q, int dim,
                    const Quadrature& quad) {
  Matrix moments = Matrix::Zero(q, dim);
  const double a = mesh.slab_begin(s);
  const double k = mesh.width(s);
  for (int l = 0; l < quad.size(); ++l) {
    const double tau = quad.nodes[l];
    const Vector value = f(a + k * tau);
    if (value.size() != dim) {
      throw data_error("slab_moments: function returned a vector of the wrong size");
    }
    if (!value.allFinite()) {
      throw data_error("slab_moments: non-finite data at t = " + std::to_string(a + k * tau));
    }
    const SlabBasis b = slab_basis(q, tau, k);
    moments.noalias() += (k * quad.weights[l]) * b.values * value.transpose();
  }
  return moments;
}

namespace {

void check_pair(const BrokenFunction& Y, const BrokenFunction& X, const Matrix& M,
                const Quadrature& quad, const char* who) {
  if (!(Y.mesh() == X.mesh())) {
    throw std::invalid_argument(std::string(who) + ": functions live on different meshes");
  }
  if (Y.dim() != X.dim() || M.rows() != Y.dim() || M.cols() != Y.dim()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
  // Integrand degree is at most (qY - 1) + (qX - 1) - 1.
  if (quad.exactness_degree < Y.q() + X.q() - 3) {
    throw std::invalid_argument(std::string(who) + ": quadrature is not exact for the integrand");
  }
}

}  // namespace

double dh_form(const BrokenFunction& Y, const BrokenFunction& X, const Matrix& M,
               const Quadrature& quad) {
  check_pair(Y, X, M, quad, "dh_form");
  const TimeMesh& mesh = Y.mesh();
  const int N = mesh.num_slabs();
  double sum = 0.0;
  for (int s = 0; s < N; ++s) {
    const double k = mesh.width(s);
    for (int l = 0; l < quad.size(); ++l) {
      const double tau = quad.nodes[l];
      const Vector dy = Y.slab(s).derivative(tau, k);
      const Vector x = X.slab(s).value(tau);
      sum += k * quad.weights[l] * dy.dot(M * x);
    }
  }
  for (int n = 1; n < N; ++n) {
    sum += Y.jump(n).dot(M * X.right_limit(n));
  }
  sum += Y.right_limit(0).dot(M * X.right_limit(0));
  return sum;
}

double dh_star_form(const BrokenFunction& Y, const BrokenFunction& X, const Matrix& M,
                    const Quadrature& quad) {
  check_pair(Y, X, M, quad, "dh_star_form");
  const TimeMesh& mesh = Y.mesh();
  const int N = mesh.num_slabs();
  double sum = 0.0;
  for (int s = 0; s < N; ++s) {
    const double k = mesh.width(s);
    for (int l = 0; l < quad.size(); ++l) {
      const double tau = quad.nodes[l];
      const Vector y = Y.slab(s).value(tau);
      const Vector dx = X.slab(s).derivative(tau, k);
      sum += k * quad.weights[l] * y.dot(M * dx);
    }
  }
  for (int n = 1; n < N; ++n) {
    sum += Y.left_limit(n).dot(M * X.jump(n));
  }
  sum -= Y.left_limit(N).dot(M * X.left_limit(N));
  return sum;
}

}  // namespace dgtime
