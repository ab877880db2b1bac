#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgtime/timecore.hpp"

namespace dgtime {

/// Finite-dimensional constrained parabolic system
///
///   M u' + A u + B1^T p = f,   B1 u = g1,   B2 u = g2,   u(0) = u0,
///
/// with B1 treated through a Lagrange multiplier p and B2 treated
/// explicitly through the right inverse `lift` (B2 * lift = I).
/// All function members must be pure and reentrant.
struct ConstrainedSystem {
  std::string name;

  Matrix M;       // m x m, SPD
  Matrix A;       // m x m, symmetric
  Matrix B1;      // r1 x m
  Matrix B2;      // r2 x m
  Matrix lift;    // m x r2
  Matrix normU;   // m x m, SPD
  Matrix normQ1;  // r1 x r1, SPD
  Vector u0;

  TimeFunction f;
  TimeFunction g1;
  TimeFunction g2;
  TimeFunction exact_u;  // empty when no manufactured solution is known
  TimeFunction exact_p;

  std::vector<std::string> warnings;

  int m() const { return static_cast<int>(M.rows()); }
  int r1() const { return static_cast<int>(B1.rows()); }
  int r2() const { return static_cast<int>(B2.rows()); }
};

// ---------------------------------------------------------------------------
// 1D heat equation with P2 elements

/// Manufactured scalar field u(x, t) on (0, 1), quadratic in x.
struct HeatManufactured {
  std::string name;
  std::function<double(double x, double t)> u;
  std::function<double(double x, double t)> u_t;
  std::function<double(double x, double t)> u_xx;
};

/// u(x, t) = (x^2 + 1) sin(4t).
HeatManufactured heat_trig();
/// u(x, t) = x^2, stationary.
HeatManufactured heat_stationary();
/// u(x, t) = sum_{j <= time_degree} a_j(x) t^j with a_0 = 1 + x^2,
/// a_1 = 2x - x^2, a_2 = 1/2 + x^2 (time_degree in 0..2).
HeatManufactured heat_polynomial(int time_degree);

/// Element matrices of quadratic Lagrange elements, local dof order
/// (left, midpoint, right).
Matrix p2_element_mass(double h);
Matrix p2_element_stiffness(double h);

/// Assembles u_t - u_xx = f on (0, 1) with P2 elements on a uniform mesh
/// of `elements` cells, Dirichlet data at x = 0 and x = 1 as the explicit
/// constraint (r1 = 0, r2 = 2). The nodal interpolant of the manufactured
/// solution is the exact semi-discrete solution, so all measured error is
/// temporal. Throws std::invalid_argument if u is not quadratic in x.
ConstrainedSystem build_heat_1d(int elements, const HeatManufactured& manufactured);

/// Nodal interpolation of a field onto the P2 dofs (dof i sits at x = i h / 2).
Vector p2_interpolate(int elements, const std::function<double(double)>& field);

// ---------------------------------------------------------------------------
// Saddle-point DAE with a Lagrange multiplier

struct SaddleManufactured {
  TimeFunction u;
  TimeFunction du;
  TimeFunction p;
};

/// Builds M u' + A u + B1^T p = f, B1 u = g1 with f and g1 derived from the
/// manufactured pair. r2 = 0. normU = M + A, normQ1 = I.
/// Throws std::invalid_argument if B1 is rank deficient.
ConstrainedSystem build_saddle_dae(std::string name, Matrix M, Matrix A, Matrix B1,
                                   const SaddleManufactured& manufactured);

/// The 3x3 preset: M = I, A = tridiag(-1, 2, -1), B1 = [1 1 1],
/// u = (sin 4t (1 + t), cos 3t, e^{-t} + t^2), p = e^t.
ConstrainedSystem build_stokes3();
SaddleManufactured stokes3_solution();

/// Looks up a named saddle preset ("stokes3"); throws std::invalid_argument.
ConstrainedSystem build_saddle_preset(std::string_view name);

/// Generic builder for systems with both constraint blocks; f, g1, g2 are
/// derived from the manufactured pair when given, and u0 = u(0). No rank
/// checks; run validate_system on the result.
ConstrainedSystem assemble_manufactured_system(std::string name, Matrix M, Matrix A, Matrix B1,
                                               Matrix B2, std::optional<Matrix> lift,
                                               const SaddleManufactured& manufactured);

/// Right inverse B2^T (B2 B2^T)^{-1}.
Matrix right_inverse(const Matrix& B2);

// ---------------------------------------------------------------------------
// Validation

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
  bool required = true;  // informational checks never fail the report
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  int kernel_dim = 0;          // dim ker [B1; B2]
  double min_kernel_eig = 0;   // smallest eigenvalue of Z^T A Z
  double inf_sup = 0;          // smallest singular value of B1 on ker B2

  bool passed() const;
  const ValidationCheck* find(std::string_view name) const;
};

/// Checks: shapes, mass-spd, stiffness-symmetric, constraint-rank,
/// ellipticity, lift-residual, inf-sup, and the informational
/// initial-compatibility.
ValidationReport validate_system(const ConstrainedSystem& sys);

/// Residual max(|B1 u0 - g1(0)|, |B2 u0 - g2(0)|).
double initial_incompatibility(const ConstrainedSystem& sys);

/// Appends a warning to sys.warnings when u0 violates the constraints at
/// t = 0. The solvers still accept such data.
void record_initial_compatibility(ConstrainedSystem& sys);

/// Orthonormal basis of ker(B) as columns. Unit-row selection matrices
/// yield the complementary identity columns.
Matrix kernel_basis(const Matrix& B, int m);

}  // namespace dgtime
