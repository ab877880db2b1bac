#include "dgtime/dgsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace dgtime {

int SolverOptions::effective_quadrature_points() const {
  return quadrature_points > 0 ? quadrature_points : std::max(q + 2, 4);
}

Quadrature SolverOptions::quadrature() const { return gauss_legendre(effective_quadrature_points()); }

void SolverOptions::validate() const {
  if (q < 1) throw std::invalid_argument("SolverOptions: q must be >= 1");
  const int n = effective_quadrature_points();
  if (n > 16) throw std::invalid_argument("SolverOptions: at most 16 quadrature points");
  if (2 * n - 1 < 2 * q - 1) {
    throw std::invalid_argument("SolverOptions: quadrature exactness must be >= 2q - 1");
  }
}

TemporalMatrices assemble_temporal_matrices(double width, int q, const Quadrature& quad) {
  TemporalMatrices T{Matrix::Zero(q, q), Matrix::Zero(q, q), Vector(q)};
  for (int l = 0; l < quad.size(); ++l) {
    const SlabBasis b = slab_basis(q, quad.nodes[l], width);
    const double w = width * quad.weights[l];
    T.D.noalias() += w * b.values * b.derivatives.transpose();
    T.S.noalias() += w * b.values * b.values.transpose();
  }
  for (int i = 0; i < q; ++i) T.e[i] = i % 2 == 0 ? 1.0 : -1.0;
  T.D.noalias() += T.e * T.e.transpose();
  return T;
}

namespace {

// Coefficients c_i = (2i + 1)/k * int_{slab} phi_i g, the L2 fit of g on
// the slab computed from quadrature moments.
SlabPoly moment_fit(const TimeFunction& g, const TimeMesh& mesh, int s, int q, int dim,
                    const Quadrature& quad) {
  Matrix c = slab_moments(g, mesh, s, q, dim, quad);
  const double k = mesh.width(s);
  for (int i = 0; i < q; ++i) c.row(i) *= (2.0 * i + 1.0) / k;
  return SlabPoly(std::move(c));
}

BrokenFunction fit_broken(const TimeFunction& g, const TimeMesh& mesh, int q, int dim,
                          const Quadrature& quad, bool use_projection) {
  if (use_projection) return project_broken(g, mesh, dim, ProjectionSpec(q, quad));
  std::vector<SlabPoly> slabs;
  for (int s = 0; s < mesh.num_slabs(); ++s) slabs.push_back(moment_fit(g, mesh, s, q, dim, quad));
  return BrokenFunction(mesh, std::move(slabs));
}

void check_shapes(const ConstrainedSystem& sys) {
  const int m = sys.m();
  if (m == 0 || sys.M.cols() != m || sys.A.rows() != m || sys.A.cols() != m ||
      sys.B1.cols() != m || sys.B2.cols() != m || sys.u0.size() != m) {
    throw std::invalid_argument("solver: system matrices have inconsistent shapes");
  }
  if (!sys.f) throw std::invalid_argument("solver: load f is not set");
  if (sys.r1() > 0 && !sys.g1) throw std::invalid_argument("solver: g1 is not set");
  if (sys.r2() > 0) {
    if (!sys.g2) throw std::invalid_argument("solver: g2 is not set");
    if (sys.lift.rows() != m || sys.lift.cols() != sys.r2()) {
      throw std::invalid_argument("solver: lift has the wrong shape");
    }
    const double residual =
        (sys.B2 * sys.lift - Matrix::Identity(sys.r2(), sys.r2())).cwiseAbs().maxCoeff();
    if (residual > 1e-12) {
      throw std::invalid_argument("solver: lift is not a right inverse of B2");
    }
  }
  if (!sys.u0.allFinite()) throw data_error("solver: initial state contains non-finite values");
}

// Spatial operators restricted to the kernel coordinates Z of B2.
struct ReducedOperators {
  Matrix Z;      // m x mz
  Matrix ZtM;    // mz x m
  Matrix ZtA;    // mz x m
  Matrix ZtMZ;
  Matrix ZtAZ;
  Matrix ZtB1t;  // mz x r1
  Matrix B1Z;    // r1 x mz
  int m = 0, mz = 0, r1 = 0;
};

ReducedOperators reduce(const ConstrainedSystem& sys) {
  ReducedOperators op;
  op.m = sys.m();
  op.r1 = sys.r1();
  op.Z = kernel_basis(sys.B2, op.m);
  op.mz = static_cast<int>(op.Z.cols());
  op.ZtM = op.Z.transpose() * sys.M;
  op.ZtA = op.Z.transpose() * sys.A;
  op.ZtMZ = op.ZtM * op.Z;
  op.ZtAZ = op.ZtA * op.Z;
  op.ZtB1t = op.Z.transpose() * sys.B1.transpose();
  op.B1Z = sys.B1 * op.Z;
  return op;
}

class SlabAssembler {
 public:
  SlabAssembler(const ConstrainedSystem& sys, const TimeMesh& mesh, const SolverOptions& opts)
      : sys_(sys), mesh_(mesh), opts_(opts), quad_(opts.quadrature()), op_(reduce(sys)),
        data_(constraint_data(sys, mesh, opts)) {}

  int q() const { return opts_.q; }
  int local_size() const { return q() * (op_.mz + op_.r1); }
  const ReducedOperators& op() const { return op_; }

  SlabSystem assemble(int s) const {
    const int q = opts_.q;
    const int m = op_.m, mz = op_.mz, r1 = op_.r1;
    const int n = local_size();
    const TemporalMatrices T = assemble_temporal_matrices(mesh_.width(s), q, quad_);

    SlabSystem out{Matrix::Zero(n, n), Vector::Zero(n), Matrix::Zero(n, m), Matrix::Zero(q, m)};
    if (data_.lift) out.lifted = data_.lift->slab(s).coeffs();

    const Matrix F = slab_moments(sys_.f, mesh_, s, q, m, quad_);
    Matrix G1 = Matrix::Zero(q, r1);
    if (r1 > 0) {
      // Moments of the projected data are exact: S times its coefficients.
      // Without projection the raw quadrature moments of g1 are used.
      G1 = opts_.use_projection ? Matrix(T.S * data_.g1->slab(s).coeffs())
                                : slab_moments(sys_.g1, mesh_, s, q, r1, quad_);
    }

    const int p0 = q * mz;
    for (int i = 0; i < q; ++i) {
      Vector lifted_force = Vector::Zero(m);
      for (int j = 0; j < q; ++j) {
        out.lhs.block(i * mz, j * mz, mz, mz) = T.D(i, j) * op_.ZtMZ + T.S(i, j) * op_.ZtAZ;
        if (r1 > 0) {
          out.lhs.block(i * mz, p0 + j * r1, mz, r1) = T.S(i, j) * op_.ZtB1t;
          out.lhs.block(p0 + i * r1, j * mz, r1, mz) = T.S(i, j) * op_.B1Z;
        }
        if (data_.lift) {
          const Vector gj = out.lifted.row(j).transpose();
          lifted_force += T.D(i, j) * (sys_.M * gj) + T.S(i, j) * (sys_.A * gj);
        }
      }
      out.rhs.segment(i * mz, mz) = op_.Z.transpose() * (F.row(i).transpose() - lifted_force);
      out.coupling.block(i * mz, 0, mz, m) = T.e[i] * op_.ZtM;
      if (r1 > 0) {
        Vector con = G1.row(i).transpose();
        if (data_.lift) {
          for (int j = 0; j < q; ++j) con -= T.S(i, j) * (sys_.B1 * out.lifted.row(j).transpose());
        }
        out.rhs.segment(p0 + i * r1, r1) = con;
      }
    }
    return out;
  }

  // Unknown vector -> (U coefficients, P coefficients).
  std::pair<SlabPoly, SlabPoly> unpack(const Vector& x, const SlabSystem& slab) const {
    const int q = opts_.q;
    const int mz = op_.mz, r1 = op_.r1;
    Matrix u = slab.lifted;
    Matrix p(q, r1);
    for (int j = 0; j < q; ++j) {
      u.row(j) += (op_.Z * x.segment(j * mz, mz)).transpose();
      if (r1 > 0) p.row(j) = x.segment(q * mz + j * r1, r1).transpose();
    }
    return {SlabPoly(std::move(u)), SlabPoly(std::move(p))};
  }

  // Terminal value as an affine map of the slab unknowns: E x + offset.
  Matrix terminal_map() const {
    Matrix E = Matrix::Zero(op_.m, local_size());
    for (int j = 0; j < opts_.q; ++j) E.block(0, j * op_.mz, op_.m, op_.mz) = op_.Z;
    return E;
  }

 private:
  const ConstrainedSystem& sys_;
  const TimeMesh& mesh_;
  SolverOptions opts_;
  Quadrature quad_;
  ReducedOperators op_;
  ConstraintData data_;
};

Vector solve_checked(const Matrix& lhs, const Vector& rhs, int slab, SlabDiagnostics& diag) {
  Eigen::PartialPivLU<Matrix> lu(lhs);
  diag.size = static_cast<int>(lhs.rows());
  // The rcond estimator is unreliable once a pivot is exactly zero, so the
  // pivot ratio bounds it as well.
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double ratio = pivots.size() ? pivots.minCoeff() / pivots.maxCoeff() : 1.0;
  diag.rcond = std::min(lu.rcond(), ratio);
  Vector x = lu.solve(rhs);
  if (!(diag.rcond > 1e3 * std::numeric_limits<double>::epsilon()) || !x.allFinite()) {
    throw solver_failure("slab " + std::to_string(slab + 1) +
                             ": singular slab system (violated inf-sup or ellipticity?), rcond = " +
                             std::to_string(diag.rcond),
                         slab);
  }
  return x;
}

MixedSolution run_sequential(const ConstrainedSystem& sys, const TimeMesh& mesh,
                             const SolverOptions& opts) {
  const SlabAssembler assembler(sys, mesh, opts);
  const int N = mesh.num_slabs();
  std::vector<SlabPoly> u_slabs, p_slabs;
  std::vector<SlabDiagnostics> diagnostics;
  Vector u_prev = sys.u0;
  for (int s = 0; s < N; ++s) {
    const SlabSystem slab = assembler.assemble(s);
    SlabDiagnostics diag{s, 0, 0.0};
    const Vector x = solve_checked(slab.lhs, slab.rhs + slab.coupling * u_prev, s, diag);
    auto [u, p] = assembler.unpack(x, slab);
    u_prev = u.right_value();
    u_slabs.push_back(std::move(u));
    p_slabs.push_back(std::move(p));
    diagnostics.push_back(diag);
  }
  MixedSolution sol{BrokenFunction(mesh, std::move(u_slabs)), std::nullopt, std::move(diagnostics)};
  if (sys.r1() > 0) sol.P = BrokenFunction(mesh, std::move(p_slabs));
  return sol;
}

}  // namespace

ConstraintData constraint_data(const ConstrainedSystem& sys, const TimeMesh& mesh,
                               const SolverOptions& opts) {
  opts.validate();
  const Quadrature quad = opts.quadrature();
  ConstraintData data;
  if (sys.r1() > 0) {
    data.g1 = fit_broken(sys.g1, mesh, opts.q, sys.r1(), quad, opts.use_projection);
  }
  if (sys.r2() > 0) {
    const Matrix lift = sys.lift;
    const TimeFunction g2 = sys.g2;
    const TimeFunction lifted = [lift, g2](double t) -> Vector { return lift * g2(t); };
    data.lift = fit_broken(lifted, mesh, opts.q, sys.m(), quad, opts.use_projection);
  }
  return data;
}

SlabSystem assemble_slab_system(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts, int slab) {
  opts.validate();
  check_shapes(sys);
  if (slab < 0 || slab >= mesh.num_slabs()) {
    throw std::invalid_argument("assemble_slab_system: slab index out of range");
  }
  return SlabAssembler(sys, mesh, opts).assemble(slab);
}

MixedSolution solve_mixed(const ConstrainedSystem& sys, const TimeMesh& mesh,
                          const SolverOptions& opts) {
  opts.validate();
  check_shapes(sys);
  if (sys.r2() != 0) {
    throw std::invalid_argument("solve_mixed: explicit constraints present; use solve_constrained");
  }
  return run_sequential(sys, mesh, opts);
}

MixedSolution solve_constrained(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts) {
  opts.validate();
  check_shapes(sys);
  if (sys.r2() < 1) {
    throw std::invalid_argument("solve_constrained: no explicit constraints; use solve_mixed");
  }
  return run_sequential(sys, mesh, opts);
}

MixedSolution solve(const ConstrainedSystem& sys, const TimeMesh& mesh, const SolverOptions& opts) {
  return sys.r2() > 0 ? solve_constrained(sys, mesh, opts) : solve_mixed(sys, mesh, opts);
}

MixedSolution solve_monolithic(const ConstrainedSystem& sys, const TimeMesh& mesh,
                               const SolverOptions& opts) {
  opts.validate();
  check_shapes(sys);
  const SlabAssembler assembler(sys, mesh, opts);
  const int N = mesh.num_slabs();
  const int n = assembler.local_size();
  const Matrix E = assembler.terminal_map();

  std::vector<SlabSystem> slabs;
  for (int s = 0; s < N; ++s) slabs.push_back(assembler.assemble(s));

  Matrix lhs = Matrix::Zero(N * n, N * n);
  Vector rhs = Vector::Zero(N * n);
  for (int s = 0; s < N; ++s) {
    lhs.block(s * n, s * n, n, n) = slabs[s].lhs;
    rhs.segment(s * n, n) = slabs[s].rhs;
    if (s == 0) {
      rhs.segment(0, n) += slabs[0].coupling * sys.u0;
    } else {
      const Vector offset = slabs[s - 1].lifted.colwise().sum().transpose();
      lhs.block(s * n, (s - 1) * n, n, n) = -slabs[s].coupling * E;
      rhs.segment(s * n, n) += slabs[s].coupling * offset;
    }
  }
  SlabDiagnostics diag{0, 0, 0.0};
  const Vector x = solve_checked(lhs, rhs, 0, diag);

  std::vector<SlabPoly> u_slabs, p_slabs;
  for (int s = 0; s < N; ++s) {
    auto [u, p] = assembler.unpack(x.segment(s * n, n), slabs[s]);
    u_slabs.push_back(std::move(u));
    p_slabs.push_back(std::move(p));
  }
  MixedSolution sol{BrokenFunction(mesh, std::move(u_slabs)), std::nullopt, {diag}};
  if (sys.r1() > 0) sol.P = BrokenFunction(mesh, std::move(p_slabs));
  return sol;
}

std::vector<double> dg_residual(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                const SolverOptions& opts, const BrokenFunction& U,
                                const std::optional<BrokenFunction>& P) {
  opts.validate();
  check_shapes(sys);
  const int m = sys.m(), r1 = sys.r1(), r2 = sys.r2(), q = opts.q;
  if (!(U.mesh() == mesh) || U.dim() != m || U.q() != q) {
    throw std::invalid_argument("dg_residual: U does not match the system and mesh");
  }
  if (r1 > 0 && (!P || !(P->mesh() == mesh) || P->dim() != r1 || P->q() != q)) {
    throw std::invalid_argument("dg_residual: P does not match the system and mesh");
  }
  const Quadrature quad = opts.quadrature();
  const Matrix Z = kernel_basis(sys.B2, m);

  std::optional<BrokenFunction> g1_fit;
  if (r1 > 0 && opts.use_projection) {
    g1_fit = project_broken(sys.g1, mesh, r1, ProjectionSpec(q, quad));
  }
  std::optional<BrokenFunction> g2_fit;
  if (r2 > 0) g2_fit = fit_broken(sys.g2, mesh, q, r2, quad, opts.use_projection);

  std::vector<double> residuals(mesh.num_slabs(), 0.0);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    const double a = mesh.slab_begin(s);
    const double k = mesh.width(s);
    Matrix momentum = Matrix::Zero(q, m);
    Matrix constraint = Matrix::Zero(q, r1);
    for (int l = 0; l < quad.size(); ++l) {
      const double tau = quad.nodes[l];
      const double t = a + k * tau;
      const double w = k * quad.weights[l];
      const SlabBasis b = slab_basis(q, tau, k);
      Vector r = sys.M * U.derivative_in_slab(s, t) + sys.A * U.eval_in_slab(s, t) - sys.f(t);
      if (r1 > 0) {
        r += sys.B1.transpose() * P->eval_in_slab(s, t);
        const Vector g = g1_fit ? g1_fit->eval_in_slab(s, t) : sys.g1(t);
        constraint.noalias() += w * b.values * (sys.B1 * U.eval_in_slab(s, t) - g).transpose();
      }
      momentum.noalias() += w * b.values * r.transpose();
    }
    const Vector previous = s == 0 ? sys.u0 : U.left_limit(s);
    const Vector jump_term = sys.M * (U.right_limit(s) - previous);
    for (int i = 0; i < q; ++i) momentum.row(i) += (i % 2 == 0 ? 1.0 : -1.0) * jump_term.transpose();

    double worst = (momentum * Z).cwiseAbs().maxCoeff();
    if (r1 > 0) worst = std::max(worst, constraint.cwiseAbs().maxCoeff());
    if (r2 > 0) {
      const Matrix mismatch = U.slab(s).coeffs() * sys.B2.transpose() - g2_fit->slab(s).coeffs();
      worst = std::max(worst, mismatch.cwiseAbs().maxCoeff());
    }
    residuals[s] = worst;
  }
  return residuals;
}

std::vector<double> constraint_residual(const ConstrainedSystem& sys, const TimeMesh& mesh,
                                        const SolverOptions& opts, const BrokenFunction& U) {
  opts.validate();
  const Quadrature quad = opts.quadrature();
  const int q = opts.q;
  std::optional<BrokenFunction> g1_fit, g2_fit;
  if (sys.r1() > 0) g1_fit = fit_broken(sys.g1, mesh, q, sys.r1(), quad, opts.use_projection);
  if (sys.r2() > 0) g2_fit = fit_broken(sys.g2, mesh, q, sys.r2(), quad, opts.use_projection);
  std::vector<double> out(mesh.num_slabs(), 0.0);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    double worst = 0.0;
    if (g1_fit) {
      const Matrix diff = U.slab(s).coeffs() * sys.B1.transpose() - g1_fit->slab(s).coeffs();
      worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
    if (g2_fit) {
      const Matrix diff = U.slab(s).coeffs() * sys.B2.transpose() - g2_fit->slab(s).coeffs();
      worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
    out[s] = worst;
  }
  return out;
}

}  // namespace dgtime
