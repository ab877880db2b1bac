#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgtime/projection.hpp"
#include "dgtime/systems.hpp"

namespace dgtime {

/// A slab system could not be factored; usually a violated inf-sup
/// condition or a non-elliptic stiffness on the constraint kernel.
class solver_failure : public std::runtime_error {
 public:
  solver_failure(const std::string& what, int slab) : std::runtime_error(what), slab_(slab) {}
  int slab() const { return slab_; }

 private:
  int slab_;
};

struct SolverOptions {
  int q = 2;                    // temporal dofs per slab (degree q - 1)
  bool use_projection = true;   // project constraint data with I_q
  int quadrature_points = 0;    // 0 selects max(q + 2, 4)

  int effective_quadrature_points() const;
  Quadrature quadrature() const;
  void validate() const;
};

struct SlabDiagnostics {
  int slab = 0;
  int size = 0;        // order of the slab linear system
  double rcond = 0.0;  // reciprocal condition estimate of the LU factors
};

struct MixedSolution {
  BrokenFunction U;
  std::optional<BrokenFunction> P;  // absent when r1 = 0
  std::vector<SlabDiagnostics> diagnostics;
};

/// Per-slab temporal matrices in the shifted Legendre basis:
///   D(i, j) = int phi_j' phi_i + phi_j(t_{n-1}^+) phi_i(t_{n-1}^+)
///   S(i, j) = int phi_j phi_i
///   e(i)    = phi_i(t_{n-1}^+)
struct TemporalMatrices {
  Matrix D;
  Matrix S;
  Vector e;
};

TemporalMatrices assemble_temporal_matrices(double width, int q, const Quadrature& quad);

/// Constraint data in the form used by the slab equations: coefficients of
/// I_q g1 and of I_q (lift g2) when projecting, otherwise the L2-type
/// moment fits (c_i = (2i + 1)/k int phi_i g).
struct ConstraintData {
  std::optional<BrokenFunction> g1;    // dim r1
  std::optional<BrokenFunction> lift;  // dim m, the lifted explicit data
};

ConstraintData constraint_data(const ConstrainedSystem& sys, const TimeMesh& mesh,
                               const SolverOptions& opts);

/// Linear system of one slab: lhs x = rhs + coupling * u_prev, where
/// u_prev is the terminal value of the previous slab (u0 for the first).
/// Unknowns are ordered [w_0 .. w_{q-1}, p_0 .. p_{q-1}] with w_j the
/// ker(B2) coordinates of the j-th temporal coefficient.
struct SlabSystem {
  Matrix lhs;
  Vector rhs;
  Matrix coupling;
  Matrix lifted;  // q x m coefficients of the lifted explicit data (zero if r2 = 0)
};

SlabSystem assemble_slab_system(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts, int slab);

/// Mixed path (r2 = 0): Lagrange multiplier for B1.
MixedSolution solve_mixed(const ConstrainedSystem& sys, const TimeMesh& mesh,
                          const SolverOptions& opts);

/// Constrained path (r2 >= 1): explicit lifting of the B2 data; any B1 block
/// is kept as a Lagrange multiplier on ker(B2).
MixedSolution solve_constrained(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts);

/// Routes to solve_mixed or solve_constrained by the shape of sys.
MixedSolution solve(const ConstrainedSystem& sys, const TimeMesh& mesh, const SolverOptions& opts);

/// Assembles every slab into one block lower-triangular system and solves
/// it with a single factorization. Meant for verification on small N.
MixedSolution solve_monolithic(const ConstrainedSystem& sys, const TimeMesh& mesh,
                               const SolverOptions& opts);

/// Max absolute residual per slab of both Galerkin equations, tested with
/// every temporal basis function times every kernel (momentum) or
/// multiplier (constraint) direction, plus the explicit-constraint
/// coefficient mismatch. Evaluated by quadrature on the broken functions,
/// independently of the slab matrices.
std::vector<double> dg_residual(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts, const BrokenFunction& U,
                                const std::optional<BrokenFunction>& P);

/// Max modal coefficient per slab of B1 U - I_q g1 and B2 U - I_q g2.
std::vector<double> constraint_residual(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                        const SolverOptions& opts, const BrokenFunction& U);

}  // namespace dgtime
