#include "dgtime/systems.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace dgtime {

// ---------------------------------------------------------------------------
// Heat 1D

HeatManufactured heat_trig() {
  return {"heat-trig",
          [](double x, double t) { return (x * x + 1.0) * std::sin(4.0 * t); },
          [](double x, double t) { return 4.0 * (x * x + 1.0) * std::cos(4.0 * t); },
          [](double, double t) { return 2.0 * std::sin(4.0 * t); }};
}

HeatManufactured heat_stationary() {
  return {"heat-stationary", [](double x, double) { return x * x; },
          [](double, double) { return 0.0; }, [](double, double) { return 2.0; }};
}

HeatManufactured heat_polynomial(int time_degree) {
  if (time_degree < 0 || time_degree > 2) {
    throw std::invalid_argument("heat_polynomial: time degree must be in 0..2");
  }
  const int d = time_degree;
  auto coeff = [](int j, double x) {
    switch (j) {
      case 0: return 1.0 + x * x;
      case 1: return 2.0 * x - x * x;
      default: return 0.5 + x * x;
    }
  };
  auto coeff_xx = [](int j) { return j == 1 ? -2.0 : 2.0; };
  HeatManufactured h;
  h.name = "heat-poly" + std::to_string(d);
  h.u = [=](double x, double t) {
    double v = 0.0;
    for (int j = 0; j <= d; ++j) v += coeff(j, x) * std::pow(t, j);
    return v;
  };
  h.u_t = [=](double x, double t) {
    double v = 0.0;
    for (int j = 1; j <= d; ++j) v += j * coeff(j, x) * std::pow(t, j - 1);
    return v;
  };
  h.u_xx = [=](double, double t) {
    double v = 0.0;
    for (int j = 0; j <= d; ++j) v += coeff_xx(j) * std::pow(t, j);
    return v;
  };
  return h;
}

namespace {

// Quadratic Lagrange shape functions on the reference cell [0, 1].
Eigen::Vector3d p2_shape(double xi) {
  return {(1.0 - xi) * (1.0 - 2.0 * xi), 4.0 * xi * (1.0 - xi), xi * (2.0 * xi - 1.0)};
}

Eigen::Vector3d p2_shape_grad(double xi) { return {4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0}; }

// Three points integrate degree five exactly.
const Quadrature& spatial_rule() {
  static const Quadrature rule = gauss_legendre(3);
  return rule;
}

}  // namespace

Matrix p2_element_mass(double h) {
  Matrix mass = Matrix::Zero(3, 3);
  const Quadrature& rule = spatial_rule();
  for (int l = 0; l < rule.size(); ++l) {
    const Eigen::Vector3d N = p2_shape(rule.nodes[l]);
    mass += h * rule.weights[l] * N * N.transpose();
  }
  return mass;
}

Matrix p2_element_stiffness(double h) {
  Matrix stiff = Matrix::Zero(3, 3);
  const Quadrature& rule = spatial_rule();
  for (int l = 0; l < rule.size(); ++l) {
    const Eigen::Vector3d dN = p2_shape_grad(rule.nodes[l]) / h;
    stiff += h * rule.weights[l] * dN * dN.transpose();
  }
  return stiff;
}

Vector p2_interpolate(int elements, const std::function<double(double)>& field) {
  const int m = 2 * elements + 1;
  Vector v(m);
  for (int i = 0; i < m; ++i) v[i] = field(static_cast<double>(i) / (m - 1));
  return v;
}

ConstrainedSystem build_heat_1d(int elements, const HeatManufactured& mf) {
  if (elements < 2) {
    throw std::invalid_argument("build_heat_1d: need at least two elements");
  }
  const int m = 2 * elements + 1;
  const double h = 1.0 / elements;

  // The P2 space must contain u(., t); compare the interpolant with u at
  // interior points of every cell for a few sample times.
  const Quadrature probe = gauss_legendre(4);
  for (double t : {0.0, 0.3711, 0.9, 1.0}) {
    for (int e = 0; e < elements; ++e) {
      const double xl = e * h;
      const Eigen::Vector3d nodal{mf.u(xl, t), mf.u(xl + 0.5 * h, t), mf.u(xl + h, t)};
      for (double xi : probe.nodes) {
        const double exact = mf.u(xl + xi * h, t);
        const double interp = p2_shape(xi).dot(nodal);
        if (std::abs(exact - interp) > 1e-10 * (1.0 + std::abs(exact))) {
          throw std::invalid_argument("build_heat_1d: manufactured solution '" + mf.name +
                                      "' is not quadratic in x");
        }
      }
    }
  }

  ConstrainedSystem sys;
  sys.name = "heat1d";
  sys.M = Matrix::Zero(m, m);
  sys.A = Matrix::Zero(m, m);
  const Matrix Me = p2_element_mass(h);
  const Matrix Ae = p2_element_stiffness(h);
  for (int e = 0; e < elements; ++e) {
    sys.M.block(2 * e, 2 * e, 3, 3) += Me;
    sys.A.block(2 * e, 2 * e, 3, 3) += Ae;
  }
  sys.B1 = Matrix::Zero(0, m);
  sys.B2 = Matrix::Zero(2, m);
  sys.B2(0, 0) = 1.0;
  sys.B2(1, m - 1) = 1.0;
  sys.lift = sys.B2.transpose();
  sys.normU = sys.M + sys.A;
  sys.normQ1 = Matrix::Zero(0, 0);

  auto u = mf.u;
  auto u_t = mf.u_t;
  auto u_xx = mf.u_xx;
  sys.u0 = p2_interpolate(elements, [&](double x) { return u(x, 0.0); });

  sys.f = [=](double t) {
    Vector load = Vector::Zero(m);
    const Quadrature& rule = spatial_rule();
    for (int e = 0; e < elements; ++e) {
      const double xl = e * h;
      for (int l = 0; l < rule.size(); ++l) {
        const double x = xl + rule.nodes[l] * h;
        const double source = u_t(x, t) - u_xx(x, t);
        load.segment<3>(2 * e) += h * rule.weights[l] * source * p2_shape(rule.nodes[l]);
      }
    }
    return load;
  };
  sys.g1 = [](double) { return Vector(0); };
  sys.g2 = [=](double t) { return Vector{{u(0.0, t), u(1.0, t)}}; };
  sys.exact_u = [=](double t) { return p2_interpolate(elements, [&](double x) { return u(x, t); }); };
  record_initial_compatibility(sys);
  return sys;
}

// ---------------------------------------------------------------------------
// Saddle DAE

namespace {

int numerical_rank(const Matrix& B, Vector* singular_values = nullptr) {
  if (B.rows() == 0 || B.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(B);
  const Vector& sv = svd.singularValues();
  if (singular_values) *singular_values = sv;
  const double tol = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > tol ? 1 : 0;
  return rank;
}

}  // namespace

Matrix right_inverse(const Matrix& B2) {
  if (B2.rows() == 0) return Matrix::Zero(B2.cols(), 0);
  const Matrix gram = B2 * B2.transpose();
  return B2.transpose() * gram.ldlt().solve(Matrix::Identity(B2.rows(), B2.rows()));
}

ConstrainedSystem assemble_manufactured_system(std::string name, Matrix M, Matrix A, Matrix B1,
                                               Matrix B2, std::optional<Matrix> lift,
                                               const SaddleManufactured& mf) {
  const int m = static_cast<int>(M.rows());
  if (M.cols() != m || A.rows() != m || A.cols() != m || B1.cols() != m || B2.cols() != m) {
    throw std::invalid_argument("assemble_manufactured_system: matrix shapes do not match");
  }
  ConstrainedSystem sys;
  sys.name = std::move(name);
  sys.M = std::move(M);
  sys.A = std::move(A);
  sys.B1 = std::move(B1);
  sys.B2 = std::move(B2);
  sys.lift = lift ? std::move(*lift) : right_inverse(sys.B2);
  sys.normU = sys.M + sys.A;
  sys.normQ1 = Matrix::Identity(sys.r1(), sys.r1());
  sys.u0 = mf.u(0.0);

  const Matrix Mc = sys.M, Ac = sys.A, B1c = sys.B1, B2c = sys.B2;
  auto u = mf.u;
  auto du = mf.du;
  auto p = mf.p;
  sys.f = [=](double t) -> Vector {
    Vector rhs = Mc * du(t) + Ac * u(t);
    if (B1c.rows() > 0) rhs += B1c.transpose() * p(t);
    return rhs;
  };
  sys.g1 = [=](double t) -> Vector { return B1c * u(t); };
  sys.g2 = [=](double t) -> Vector { return B2c * u(t); };
  sys.exact_u = u;
  if (sys.r1() > 0) sys.exact_p = p;
  record_initial_compatibility(sys);
  return sys;
}

ConstrainedSystem build_saddle_dae(std::string name, Matrix M, Matrix A, Matrix B1,
                                   const SaddleManufactured& mf) {
  if (B1.rows() > 0 && numerical_rank(B1) < B1.rows()) {
    throw std::invalid_argument("build_saddle_dae: B1 must have full row rank");
  }
  const int m = static_cast<int>(M.rows());
  return assemble_manufactured_system(std::move(name), std::move(M), std::move(A), std::move(B1),
                                      Matrix::Zero(0, m), std::nullopt, mf);
}

SaddleManufactured stokes3_solution() {
  SaddleManufactured mf;
  mf.u = [](double t) {
    return Vector{{std::sin(4.0 * t) * (1.0 + t), std::cos(3.0 * t), std::exp(-t) + t * t}};
  };
  mf.du = [](double t) {
    return Vector{{4.0 * std::cos(4.0 * t) * (1.0 + t) + std::sin(4.0 * t), -3.0 * std::sin(3.0 * t),
                   -std::exp(-t) + 2.0 * t}};
  };
  mf.p = [](double t) { return Vector{{std::exp(t)}}; };
  return mf;
}

ConstrainedSystem build_stokes3() {
  Matrix A(3, 3);
  A << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  Matrix B1(1, 3);
  B1 << 1, 1, 1;
  return build_saddle_dae("stokes3", Matrix::Identity(3, 3), A, B1, stokes3_solution());
}

ConstrainedSystem build_saddle_preset(std::string_view name) {
  if (name == "stokes3") return build_stokes3();
  throw std::invalid_argument("unknown saddle preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Validation

Matrix kernel_basis(const Matrix& B, int m) {
  if (B.rows() == 0) return Matrix::Identity(m, m);

  bool selection = true;
  std::vector<bool> used(m, false);
  for (Eigen::Index r = 0; r < B.rows() && selection; ++r) {
    int hit = -1;
    for (int c = 0; c < m; ++c) {
      if (B(r, c) == 0.0) continue;
      if (B(r, c) != 1.0 || hit >= 0) {
        selection = false;
        break;
      }
      hit = c;
    }
    if (hit < 0 || used[hit]) selection = false;
    if (selection) used[hit] = true;
  }
  if (selection) {
    const int dim = m - static_cast<int>(B.rows());
    Matrix Z = Matrix::Zero(m, dim);
    int col = 0;
    for (int c = 0; c < m; ++c) {
      if (!used[c]) Z(c, col++) = 1.0;
    }
    return Z;
  }

  Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullV);
  const int rank = numerical_rank(B);
  return svd.matrixV().rightCols(m - rank);
}

bool ValidationReport::passed() const {
  for (const auto& c : checks) {
    if (c.required && !c.passed) return false;
  }
  return true;
}

const ValidationCheck* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double initial_incompatibility(const ConstrainedSystem& sys) {
  double residual = 0.0;
  if (sys.r1() > 0 && sys.g1) residual = std::max(residual, (sys.B1 * sys.u0 - sys.g1(0.0)).cwiseAbs().maxCoeff());
  if (sys.r2() > 0 && sys.g2) residual = std::max(residual, (sys.B2 * sys.u0 - sys.g2(0.0)).cwiseAbs().maxCoeff());
  return residual;
}

void record_initial_compatibility(ConstrainedSystem& sys) {
  const double residual = initial_incompatibility(sys);
  const double scale = 1.0 + (sys.u0.size() ? sys.u0.cwiseAbs().maxCoeff() : 0.0);
  if (residual > 1e-12 * scale) {
    std::ostringstream msg;
    msg << "initial state is incompatible with the constraints at t = 0 (residual " << residual
        << "); expect reduced accuracy near t = 0";
    sys.warnings.push_back(msg.str());
  }
}

ValidationReport validate_system(const ConstrainedSystem& sys) {
  ValidationReport report;
  const int m = sys.m();
  const int r1 = sys.r1();
  const int r2 = sys.r2();

  const bool shapes_ok = sys.M.cols() == m && sys.A.rows() == m && sys.A.cols() == m &&
                         sys.B1.cols() == m && sys.B2.cols() == m && sys.lift.rows() == m &&
                         sys.lift.cols() == r2 && sys.u0.size() == m && sys.normU.rows() == m &&
                         sys.normU.cols() == m && sys.normQ1.rows() == r1 && sys.normQ1.cols() == r1;
  report.checks.push_back({"shapes", shapes_ok, 0.0,
                           shapes_ok ? "dimensions consistent" : "inconsistent matrix dimensions"});
  if (!shapes_ok) return report;

  {
    const double norm = std::max(sys.M.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (sys.M - sys.M.transpose()).cwiseAbs().maxCoeff() / norm;
    Eigen::LLT<Matrix> llt(sys.M);
    const bool ok = asym <= 1e-12 && llt.info() == Eigen::Success && m > 0;
    report.checks.push_back({"mass-spd", ok, asym,
                             ok ? "M symmetric positive definite"
                                : "M is not symmetric positive definite"});
  }
  {
    const double norm = sys.A.size() ? sys.A.cwiseAbs().maxCoeff() : 0.0;
    const double asym = (sys.A - sys.A.transpose()).cwiseAbs().maxCoeff();
    const bool ok = asym <= 1e-12 * std::max(norm, 1.0);
    report.checks.push_back({"stiffness-symmetric", ok, asym,
                             ok ? "A symmetric" : "A is not symmetric"});
  }

  Matrix B(r1 + r2, m);
  B << sys.B1, sys.B2;
  {
    Vector sv;
    const int rank = numerical_rank(B, &sv);
    const bool ok = rank == r1 + r2;
    std::ostringstream detail;
    detail << "rank [B1; B2] = " << rank << " of " << r1 + r2;
    report.checks.push_back({"constraint-rank", ok, sv.size() ? sv[sv.size() - 1] : 0.0, detail.str()});
  }
  {
    const Matrix Z = kernel_basis(B, m);
    report.kernel_dim = static_cast<int>(Z.cols());
    bool ok = true;
    double lambda = std::numeric_limits<double>::infinity();
    if (Z.cols() > 0) {
      const Matrix reduced = Z.transpose() * (0.5 * (sys.A + sys.A.transpose())) * Z;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced, Eigen::EigenvaluesOnly);
      lambda = eig.eigenvalues()[0];
      const double scale = std::max(1.0, sys.A.cwiseAbs().maxCoeff());
      ok = lambda > 1e-12 * scale;
    }
    report.min_kernel_eig = lambda;
    std::ostringstream detail;
    detail << "kernel dimension " << Z.cols() << ", smallest eigenvalue of Z^T A Z " << lambda;
    report.checks.push_back({"ellipticity", ok, lambda, detail.str()});
  }
  {
    double residual = 0.0;
    if (r2 > 0) residual = (sys.B2 * sys.lift - Matrix::Identity(r2, r2)).cwiseAbs().maxCoeff();
    const bool ok = residual <= 1e-12;
    report.checks.push_back({"lift-residual", ok, residual,
                             ok ? "B2 * lift = I" : "lift is not a right inverse of B2"});
  }
  {
    bool ok = true;
    double beta = std::numeric_limits<double>::infinity();
    if (r1 > 0) {
      const Matrix Z2 = kernel_basis(sys.B2, m);
      const Matrix restricted = sys.B1 * Z2;
      if (restricted.cols() < r1) {
        ok = false;
        beta = 0.0;
      } else {
        Eigen::JacobiSVD<Matrix> svd(restricted);
        beta = svd.singularValues()[r1 - 1];
        const double scale = std::max(1.0, sys.B1.cwiseAbs().maxCoeff());
        ok = beta > 1e-10 * scale;
      }
    }
    report.inf_sup = beta;
    std::ostringstream detail;
    detail << "smallest singular value of B1 on ker B2: " << beta;
    report.checks.push_back({"inf-sup", ok, beta, detail.str()});
  }
  {
    const double residual = initial_incompatibility(sys);
    const bool ok = residual <= 1e-12 * (1.0 + sys.u0.cwiseAbs().maxCoeff());
    std::ostringstream detail;
    detail << "constraint residual of u0 at t = 0: " << residual << (ok ? "" : " (warning)");
    report.checks.push_back({"initial-compatibility", ok, residual, detail.str(), false});
  }
  return report;
}

}  // namespace dgtime
