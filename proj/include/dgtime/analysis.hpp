#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dgtime/dgsolver.hpp"

namespace dgtime {

/// sqrt(int_0^T ||U(t) - exact(t)||^2_W dt), slab-wise Gauss quadrature.
double error_l2_energy(const BrokenFunction& U, const TimeFunction& exact, const Matrix& W,
                       const Quadrature& quad);

/// max_{n=1..N} ||U^n - exact(t_n)||_M.
double error_nodal_max(const BrokenFunction& U, const TimeFunction& exact, const Matrix& M);

/// Same quantity as error_l2_energy, for the multiplier in the Q1 norm.
double error_l2_multiplier(const BrokenFunction& P, const TimeFunction& exact_p,
                           const Matrix& normQ1, const Quadrature& quad);

/// L2-orthogonal projection onto degree q-1 per slab (moments by quad).
/// Measurement utility; the solver never uses it.
BrokenFunction l2_project_broken(const TimeFunction& phi, const TimeMesh& mesh, int dim, int q,
                                 const Quadrature& quad);

/// Errors at or below this value make the order unmeasurable.
inline constexpr double kErrorFloor = 1e-13;

struct Order {
  double value = 0.0;
  bool at_floor = false;
};

/// order_i = log(err_{i-1}/err_i) / log(N_i/N_{i-1}) for i >= 1; result has
/// errors.size() - 1 entries.
std::vector<Order> eoc(const std::vector<double>& errors, const std::vector<int>& Ns);

struct NormSelection {
  bool energy = true;
  bool nodal = true;
  bool multiplier = true;
};

struct EOCRow {
  int N = 0;
  double k = 0.0;
  std::optional<double> err_energy, err_nodal, err_p;
  std::optional<Order> eoc_energy, eoc_nodal, eoc_p;
};

struct EOCTable {
  std::string problem;
  int q = 0;
  bool use_projection = true;
  std::string note;
  std::vector<EOCRow> rows;
};

struct StudyOptions {
  int q = 2;
  std::vector<int> Ns;
  bool use_projection = true;
  NormSelection norms;
  double T = 1.0;
  int threads = 1;  // concurrent solves across N
};

/// Solves on uniform meshes for every N and tabulates errors and EOCs.
/// The multiplier column is filled only when the system has r1 > 0.
/// Solver failures are rethrown as solver_failure annotated with N.
EOCTable run_study(const ConstrainedSystem& sys, const StudyOptions& opts);

/// Quadrature used for error measurement: q + 3 Gauss points.
Quadrature error_quadrature(int q);

}  // namespace dgtime
