#include <doctest.h>

#include <cmath>
#include <limits>

#include "dgtime/dgsolver.hpp"
#include "test_support.hpp"

using namespace dgtime;
using namespace dgtime::testing;

namespace {

// Temporal matrices from closed forms: with x = 2 tau - 1,
// int P_j' P_i dx = 2 when j > i and i + j is odd, S = diag(k / (2i + 1)),
// and the upwind term contributes (-1)^(i + j).
void closed_form_temporal(int q, double k, Matrix& D, Matrix& S) {
  D = Matrix::Zero(q, q);
  S = Matrix::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    S(i, i) = k / (2 * i + 1);
    for (int j = 0; j < q; ++j) {
      if (j > i && (i + j) % 2 == 1) D(i, j) += 2.0;
      D(i, j) += (i + j) % 2 == 0 ? 1.0 : -1.0;
    }
  }
}

// Polynomial in t with vector coefficients coef.row(j) for t^j.
struct VectorPoly {
  Matrix coef;
  Vector operator()(double t) const {
    Vector v = Vector::Zero(coef.cols());
    for (int j = static_cast<int>(coef.rows()) - 1; j >= 0; --j) v = v * t + coef.row(j).transpose();
    return v;
  }
  VectorPoly derivative() const {
    if (coef.rows() == 1) return {Matrix::Zero(1, coef.cols())};
    Matrix d(coef.rows() - 1, coef.cols());
    for (int j = 1; j < coef.rows(); ++j) d.row(j - 1) = j * coef.row(j);
    return {d};
  }
};

SaddleManufactured polynomial_pair(Rng& rng, int m, int r1, int degree) {
  const VectorPoly u{rng.matrix(degree + 1, m)};
  const VectorPoly p{rng.matrix(degree + 1, std::max(r1, 0))};
  const VectorPoly du = u.derivative();
  return {[u](double t) { return u(t); }, [du](double t) { return du(t); },
          [p](double t) { return p(t); }};
}

HeatManufactured heat_homogeneous() {
  return {"heat-homogeneous", [](double x, double t) { return x * (1 - x) * std::sin(4 * t); },
          [](double x, double t) { return 4 * x * (1 - x) * std::cos(4 * t); },
          [](double, double t) { return -2 * std::sin(4 * t); }};
}

HeatManufactured heat_x2t() {
  return {"heat-x2t", [](double x, double t) { return x * x * t; },
          [](double x, double) { return x * x; }, [](double, double t) { return 2 * t; }};
}

double relative_coeff_error(const BrokenFunction& U, const BrokenFunction& ref) {
  double err = 0.0, scale = 1.0;
  for (int s = 0; s < U.mesh().num_slabs(); ++s) {
    err = std::max(err, max_abs(U.slab(s).coeffs() - ref.slab(s).coeffs()));
    scale = std::max(scale, max_abs(ref.slab(s).coeffs()));
  }
  return err / scale;
}

ConstrainedSystem random_saddle(Rng& rng, int m, int r1, int r2, const SaddleManufactured& mf) {
  const Matrix M = rng.spd(m), A = rng.spd(m);
  return assemble_manufactured_system("random", M, A, rng.matrix(r1, m), rng.matrix(r2, m),
                                      std::nullopt, mf);
}

SaddleManufactured trig_pair(int m, int r1) {
  return {[m](double t) {
            Vector v(m);
            for (int i = 0; i < m; ++i) v[i] = std::sin((1.0 + i) * t + 0.2 * i);
            return v;
          },
          [m](double t) {
            Vector v(m);
            for (int i = 0; i < m; ++i) v[i] = (1.0 + i) * std::cos((1.0 + i) * t + 0.2 * i);
            return v;
          },
          [r1](double t) {
            Vector v(r1);
            for (int j = 0; j < r1; ++j) v[j] = std::exp(0.3 * (j + 1) * t);
            return v;
          }};
}

}  // namespace

TEST_CASE("temporal matrices") {
  const Quadrature quad = gauss_legendre(4);
  const TemporalMatrices one = assemble_temporal_matrices(0.3, 1, quad);
  CHECK(one.D(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(one.S(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(one.e[0] == 1.0);

  const TemporalMatrices two = assemble_temporal_matrices(1.0, 2, quad);
  CHECK(std::abs(two.S(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(two.S(1, 1) - 1.0 / 3.0) < 1e-15);
  CHECK(std::abs(two.S(0, 1)) < 1e-15);
  CHECK(two.e[1] == -1.0);

  for (int q = 1; q <= 6; ++q) {
    const double k = 0.17 * q;
    Matrix D, S;
    closed_form_temporal(q, k, D, S);
    const TemporalMatrices T = assemble_temporal_matrices(k, q, gauss_legendre(q + 2));
    CHECK(max_abs(T.D - D) < 1e-13);
    CHECK(max_abs(T.S - S) < 1e-15);
  }
}

TEST_CASE("property: slab coercivity of the temporal matrix") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int q = rng.integer(1, 6);
    const TemporalMatrices T = assemble_temporal_matrices(rng.uniform(0.01, 2.0), q, gauss_legendre(q + 2));
    const Vector x = rng.vector(q);
    // x^T D x = (x(t_n)^2 + x(t_{n-1}^+)^2) / 2.
    const double right = x.sum(), left = T.e.dot(x);
    CHECK(x.dot(T.D * x) == doctest::Approx(0.5 * (right * right + left * left)).epsilon(1e-12));
  }
}

TEST_CASE("zero data gives the zero solution") {
  const ConstrainedSystem ref = build_stokes3();
  SaddleManufactured zero{[](double) { return Vector::Zero(3).eval(); },
                          [](double) { return Vector::Zero(3).eval(); },
                          [](double) { return Vector::Zero(1).eval(); }};
  const ConstrainedSystem sys = build_saddle_dae("zero", ref.M, ref.A, ref.B1, zero);
  const MixedSolution sol = solve_mixed(sys, build_uniform_mesh(1.0, 4), SolverOptions{});
  for (int s = 0; s < 4; ++s) {
    CHECK(max_abs(sol.U.slab(s).coeffs()) == 0.0);
    CHECK(max_abs(sol.P->slab(s).coeffs()) == 0.0);
  }
  REQUIRE(sol.diagnostics.size() == 4);
  CHECK(sol.diagnostics[0].size == 2 * (3 + 1));
  CHECK(sol.diagnostics[0].rcond > 0.0);
}

TEST_CASE("linear-in-time saddle solution is reproduced") {
  const ConstrainedSystem ref = build_stokes3();
  const Vector a{{0.5, -1.0, 2.0}}, b{{1.0, 0.25, -0.75}};
  SaddleManufactured mf{[=](double t) { return Vector(a + t * b); }, [=](double) { return b; },
                        [](double) { return Vector{{1.5}}; }};
  const ConstrainedSystem sys = build_saddle_dae("linear", ref.M, ref.A, ref.B1, mf);
  const TimeMesh mesh = build_uniform_mesh(1.0, 3);
  const MixedSolution sol = solve_mixed(sys, mesh, SolverOptions{});
  for (int s = 0; s < 3; ++s) {
    // Modal coefficients of a + b t: c0 = a + b t_mid, c1 = b k / 2.
    const double mid = 0.5 * (mesh.slab_begin(s) + mesh.slab_end(s));
    CHECK(max_abs(sol.U.slab(s).coeffs().row(0).transpose() - (a + mid * b)) < 1e-10);
    CHECK(max_abs(sol.U.slab(s).coeffs().row(1).transpose() - 0.5 * mesh.width(s) * b) < 1e-10);
    CHECK(std::abs(sol.P->slab(s).coeffs()(0, 0) - 1.5) < 1e-10);
    CHECK(std::abs(sol.P->slab(s).coeffs()(1, 0)) < 1e-10);
  }
}

TEST_CASE("property: polynomial solutions of degree q-1 are reproduced") {
  Rng rng(77);
  for (int q = 1; q <= 3; ++q) {
    for (int trial = 0; trial < 6; ++trial) {
      const int m = rng.integer(2, 5);
      const int r1 = rng.integer(0, 1), r2 = rng.integer(0, 1);
      const SaddleManufactured mf = polynomial_pair(rng, m, r1, q - 1);
      const ConstrainedSystem sys = random_saddle(rng, m, r1, r2, mf);
      const TimeMesh mesh = rng.mesh(rng.uniform(0.5, 2.0), rng.integer(1, 5));
      const MixedSolution sol = solve(sys, mesh, SolverOptions{q});
      INFO("q " << q << " m " << m << " r1 " << r1 << " r2 " << r2);
      CHECK(relative_coeff_error(sol.U, interpolate_broken(mf.u, mesh, q, m)) <= 1e-9);
      if (r1 > 0) CHECK(relative_coeff_error(*sol.P, interpolate_broken(mf.p, mesh, q, r1)) <= 1e-9);
    }
    const ConstrainedSystem heat = build_heat_1d(4, heat_polynomial(q - 1));
    const TimeMesh mesh = build_uniform_mesh(1.0, 5);
    const MixedSolution sol = solve_constrained(heat, mesh, SolverOptions{q});
    CHECK(relative_coeff_error(sol.U, interpolate_broken(heat.exact_u, mesh, q, heat.m())) <= 1e-9);
  }
}

TEST_CASE("heat examples") {
  const TimeMesh mesh = build_uniform_mesh(1.0, 4);
  {
    const ConstrainedSystem sys = build_heat_1d(3, heat_x2t());
    const MixedSolution sol = solve_constrained(sys, mesh, SolverOptions{2});
    CHECK(relative_coeff_error(sol.U, interpolate_broken(sys.exact_u, mesh, 2, sys.m())) <= 1e-10);
    CHECK_FALSE(sol.P.has_value());
  }
  {
    // Stationary x^2: U equals the discrete steady state on every slab.
    const ConstrainedSystem sys = build_heat_1d(3, heat_stationary());
    const MixedSolution sol = solve_constrained(sys, mesh, SolverOptions{2});
    const int m = sys.m(), n = m - 2;
    Vector g = Vector::Zero(m);
    g[m - 1] = 1.0;
    const Vector rhs = (sys.f(0.0) - sys.A * g).segment(1, n);
    const Vector inner = sys.A.block(1, 1, n, n).ldlt().solve(rhs);
    Vector steady = g;
    steady.segment(1, n) = inner;
    for (int s = 0; s < 4; ++s) {
      CHECK(max_abs(sol.U.slab(s).coeffs().row(0).transpose() - steady) < 1e-12);
      CHECK(max_abs(sol.U.slab(s).coeffs().row(1)) < 1e-12);
    }
  }
}

TEST_CASE("homogeneous Dirichlet matches a boundary-deleted solver") {
  const int elements = 4;
  const ConstrainedSystem sys = build_heat_1d(elements, heat_homogeneous());
  const int m = sys.m(), n = m - 2;
  for (int q : {1, 2, 3}) {
    const TimeMesh mesh = build_uniform_mesh(1.0, 6);
    const SolverOptions opts{q};
    const MixedSolution sol = solve_constrained(sys, mesh, opts);

    const Matrix MI = sys.M.block(1, 1, n, n), AI = sys.A.block(1, 1, n, n);
    Vector u_prev = sys.u0.segment(1, n);
    for (int s = 0; s < mesh.num_slabs(); ++s) {
      Matrix D, S;
      closed_form_temporal(q, mesh.width(s), D, S);
      const Matrix F = slab_moments(sys.f, mesh, s, q, m, opts.quadrature());
      Matrix lhs(q * n, q * n);
      Vector rhs(q * n);
      for (int i = 0; i < q; ++i) {
        for (int j = 0; j < q; ++j) lhs.block(i * n, j * n, n, n) = D(i, j) * MI + S(i, j) * AI;
        rhs.segment(i * n, n) = F.row(i).transpose().segment(1, n) + (i % 2 == 0 ? 1.0 : -1.0) * MI * u_prev;
      }
      const Vector x = lhs.partialPivLu().solve(rhs);
      Vector end = Vector::Zero(n);
      for (int j = 0; j < q; ++j) {
        const Vector cj = x.segment(j * n, n);
        const Vector got = sol.U.slab(s).coeffs().row(j).transpose();
        CHECK(max_abs(got.segment(1, n) - cj) < 1e-12);
        CHECK(std::abs(got[0]) < 1e-14);
        CHECK(std::abs(got[m - 1]) < 1e-14);
        end += cj;
      }
      u_prev = end;
    }
  }
}

TEST_CASE("dg residual examples") {
  const ConstrainedSystem sys = build_stokes3();
  const TimeMesh mesh = build_uniform_mesh(1.0, 5);
  const SolverOptions opts{2};
  const MixedSolution sol = solve_mixed(sys, mesh, opts);
  const double scale = 1.0 + 10.0;  // |f|, |u| and |p| are below 10 on [0, 1]
  for (double r : dg_residual(sys, mesh, opts, sol.U, sol.P)) CHECK(r <= 1e-10 * scale);

  // Exact polynomial solution injected.
  Rng rng(6);
  const SaddleManufactured mf = polynomial_pair(rng, 3, 1, 1);
  const ConstrainedSystem poly = build_saddle_dae("poly", sys.M, sys.A, sys.B1, mf);
  const BrokenFunction U = interpolate_broken(mf.u, mesh, 2, 3);
  const BrokenFunction P = interpolate_broken(mf.p, mesh, 2, 1);
  for (double r : dg_residual(poly, mesh, opts, U, P)) CHECK(r <= 1e-10 * scale);

  const ConstrainedSystem heat = build_heat_1d(3, heat_x2t());
  const BrokenFunction Uh = interpolate_broken(heat.exact_u, mesh, 2, heat.m());
  for (double r : dg_residual(heat, mesh, opts, Uh, std::nullopt)) CHECK(r <= 1e-10 * scale);

  // A unit perturbation of one coefficient on the last slab.
  const int s = 4, i = 1, c = 2;
  std::vector<SlabPoly> slabs = sol.U.slabs();
  Matrix coeffs = slabs[s].coeffs();
  coeffs(i, c) += 1.0;
  slabs[s] = SlabPoly(coeffs);
  const BrokenFunction perturbed(mesh, slabs);
  const SlabSystem slab = assemble_slab_system(sys, mesh, opts, s);
  const double column = slab.lhs.col(i * 3 + c).cwiseAbs().maxCoeff();
  CHECK(dg_residual(sys, mesh, opts, perturbed, sol.P)[s] >= column - 1e-10);

  CHECK_THROWS_AS(dg_residual(sys, build_uniform_mesh(1.0, 4), opts, sol.U, sol.P), std::invalid_argument);
  CHECK_THROWS_AS(dg_residual(sys, mesh, opts, sol.U, std::nullopt), std::invalid_argument);
}

TEST_CASE("property: projected constraints hold coefficient-wise") {
  Rng rng(12);
  for (int trial = 0; trial < 12; ++trial) {
    const int m = rng.integer(3, 6), r1 = rng.integer(0, 2), r2 = rng.integer(0, 1);
    const ConstrainedSystem sys = random_saddle(rng, m, r1, r2, trig_pair(m, r1));
    const TimeMesh mesh = rng.mesh(1.0, rng.integer(2, 8));
    const SolverOptions opts{rng.integer(1, 3)};
    const MixedSolution sol = solve(sys, mesh, opts);
    double gmax = 0.0;
    for (int l = 0; l <= 100; ++l) {
      const double t = l / 100.0;
      if (r1 > 0) gmax = std::max(gmax, sys.g1(t).cwiseAbs().maxCoeff());
      if (r2 > 0) gmax = std::max(gmax, sys.g2(t).cwiseAbs().maxCoeff());
    }
    for (double r : constraint_residual(sys, mesh, opts, sol.U)) CHECK(r <= 1e-11 * (1.0 + gmax));
  }
}

TEST_CASE("property: energy stability without data") {
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = rng.integer(2, 6), r1 = rng.integer(0, m - 1);
    ConstrainedSystem sys;
    sys.M = rng.spd(m);
    sys.A = rng.spd(m, 0.0);
    sys.B1 = rng.matrix(r1, m);
    sys.B2 = Matrix::Zero(0, m);
    sys.lift = Matrix::Zero(m, 0);
    sys.u0 = rng.vector(m, -5.0, 5.0);
    sys.f = [m](double) { return Vector::Zero(m).eval(); };
    sys.g1 = [r1](double) { return Vector::Zero(r1).eval(); };
    sys.g2 = [](double) { return Vector(0); };
    const TimeMesh mesh = rng.mesh(rng.uniform(0.5, 3.0), rng.integer(1, 10));
    const MixedSolution sol = solve_mixed(sys, mesh, SolverOptions{rng.integer(1, 4)});
    const Vector uN = sol.U.left_limit(mesh.num_slabs());
    CHECK(std::sqrt(uN.dot(sys.M * uN)) <= std::sqrt(sys.u0.dot(sys.M * sys.u0)) + 1e-10);
  }
}

TEST_CASE("property: sequential and monolithic solves agree") {
  Rng rng(55);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = rng.integer(2, 5), r1 = rng.integer(0, 1), r2 = rng.integer(0, 1);
    const ConstrainedSystem sys = random_saddle(rng, m, r1, r2, trig_pair(m, r1));
    const TimeMesh mesh = rng.mesh(1.0, rng.integer(1, 4));
    const SolverOptions opts{rng.integer(1, 3), rng.integer(0, 1) == 1};
    const MixedSolution a = solve(sys, mesh, opts);
    const MixedSolution b = solve_monolithic(sys, mesh, opts);
    CHECK(relative_coeff_error(b.U, a.U) <= 1e-11);
    if (r1 > 0) CHECK(relative_coeff_error(*b.P, *a.P) <= 1e-11);
  }
  const ConstrainedSystem heat = build_heat_1d(4, heat_trig());
  const TimeMesh mesh = build_uniform_mesh(1.0, 4);
  CHECK(relative_coeff_error(solve_monolithic(heat, mesh, {}).U, solve(heat, mesh, {}).U) <= 1e-11);
}

TEST_CASE("projection switch changes only the data side") {
  Rng rng(90);
  const TimeMesh mesh = build_uniform_mesh(1.0, 3);
  std::vector<ConstrainedSystem> systems{build_stokes3(), build_heat_1d(4, heat_trig()),
                                         random_saddle(rng, 4, 1, 1, trig_pair(4, 1))};
  for (const ConstrainedSystem& sys : systems) {
    for (int s = 0; s < 3; ++s) {
      const SlabSystem on = assemble_slab_system(sys, mesh, SolverOptions{2, true}, s);
      const SlabSystem off = assemble_slab_system(sys, mesh, SolverOptions{2, false}, s);
      CHECK(on.lhs == off.lhs);
      CHECK(on.coupling == off.coupling);
      CHECK_FALSE(on.rhs == off.rhs);
      if (sys.r2() == 0) {
        const int n = 2 * sys.m();
        CHECK(on.rhs.head(n) == off.rhs.head(n));
      }
    }
  }
}

TEST_CASE("solver error paths") {
  const ConstrainedSystem ref = build_stokes3();
  const TimeMesh mesh = build_uniform_mesh(1.0, 3);

  Matrix B1(2, 3);
  B1 << 1, 1, 1, 2, 2, 2;
  const ConstrainedSystem singular = assemble_manufactured_system(
      "singular", ref.M, ref.A, B1, Matrix::Zero(0, 3), std::nullopt,
      {[](double) { return Vector::Zero(3).eval(); }, [](double) { return Vector::Zero(3).eval(); },
       [](double) { return Vector::Zero(2).eval(); }});
  try {
    solve_mixed(singular, mesh, {});
    FAIL("expected solver_failure");
  } catch (const solver_failure& e) {
    CHECK(e.slab() == 0);
  }
  CHECK_THROWS_AS(solve_monolithic(singular, mesh, {}), solver_failure);

  ConstrainedSystem nan = build_stokes3();
  nan.f = [](double t) { return t > 0.5 ? Vector::Constant(3, std::nan("")).eval() : Vector::Zero(3).eval(); };
  CHECK_THROWS_AS(solve_mixed(nan, mesh, {}), data_error);
  ConstrainedSystem bad_u0 = build_stokes3();
  bad_u0.u0[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_mixed(bad_u0, mesh, {}), data_error);

  ConstrainedSystem heat = build_heat_1d(3, heat_trig());
  CHECK_THROWS_AS(solve_mixed(heat, mesh, {}), std::invalid_argument);
  CHECK_THROWS_AS(solve_constrained(ref, mesh, {}), std::invalid_argument);
  heat.lift *= 2.0;
  CHECK_THROWS_AS(solve_constrained(heat, mesh, {}), std::invalid_argument);

  ConstrainedSystem shape = build_stokes3();
  shape.A = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve(shape, mesh, {}), std::invalid_argument);

  CHECK_THROWS_AS(solve(ref, mesh, SolverOptions{0}), std::invalid_argument);
  CHECK_THROWS_AS(solve(ref, mesh, SolverOptions{3, true, 1}), std::invalid_argument);
  CHECK_THROWS_AS(solve(ref, mesh, SolverOptions{2, true, 17}), std::invalid_argument);
  CHECK_THROWS_AS(assemble_slab_system(ref, mesh, {}, 3), std::invalid_argument);
}

TEST_CASE("quadrature option") {
  CHECK(SolverOptions{1}.effective_quadrature_points() == 4);
  CHECK(SolverOptions{2}.effective_quadrature_points() == 4);
  CHECK(SolverOptions{4}.effective_quadrature_points() == 6);
  CHECK(SolverOptions{2, true, 7}.effective_quadrature_points() == 7);
}

TEST_CASE("stokes3 terminal error drops by about 2^3 when the step halves") {
  const ConstrainedSystem sys = build_stokes3();
  auto terminal_error = [&](int N) {
    const MixedSolution sol = solve_mixed(sys, build_uniform_mesh(1.0, N), SolverOptions{2});
    const Vector e = sol.U.left_limit(N) - sys.exact_u(1.0);
    return std::sqrt(e.dot(sys.M * e));
  };
  const double ratio = terminal_error(8) / terminal_error(16);
  CHECK(ratio > 6.5);
  CHECK(ratio < 9.5);
}
