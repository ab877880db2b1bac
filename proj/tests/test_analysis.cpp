#include <doctest.h>

#include <cmath>

#include "dgtime/analysis.hpp"
#include "test_support.hpp"

using namespace dgtime;
using namespace dgtime::testing;

namespace {

BrokenFunction constant_broken(const TimeMesh& mesh, int q, const Vector& c) {
  Matrix coeffs = Matrix::Zero(q, c.size());
  coeffs.row(0) = c.transpose();
  return BrokenFunction(mesh, std::vector<SlabPoly>(mesh.num_slabs(), SlabPoly(coeffs)));
}

}  // namespace

TEST_CASE("energy error examples") {
  const TimeMesh mesh = build_uniform_mesh(2.0, 3);
  const Quadrature quad = error_quadrature(2);
  CHECK(quad.size() == 5);

  const Vector c{{0.6, -0.8}};
  const BrokenFunction U = constant_broken(mesh, 2, c);
  auto zero2 = [](double) { return Vector::Zero(2).eval(); };
  CHECK(error_l2_energy(U, zero2, Matrix::Identity(2, 2), quad) ==
        doctest::Approx(1.0 * std::sqrt(2.0)).epsilon(1e-14));

  const TimeMesh unit = build_uniform_mesh(1.0, 4);
  const BrokenFunction Z = BrokenFunction::zero(unit, 2, 1);
  CHECK(error_l2_energy(Z, [](double t) { return scalar(t); }, Matrix::Identity(1, 1), quad) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));

  // Projection of a polynomial of degree <= q - 1 is exact.
  auto lin = [](double t) { return Vector{{1.0 + 2.0 * t, -t}}; };
  const BrokenFunction P = project_broken(lin, unit, 2, ProjectionSpec(2, gauss_legendre(4)));
  CHECK(error_l2_energy(P, lin, Matrix::Identity(2, 2), quad) < 1e-11);

  CHECK_THROWS_AS(error_l2_energy(U, zero2, Matrix::Identity(3, 3), quad), std::invalid_argument);
  CHECK_THROWS_AS(error_l2_energy(U, zero2, Matrix::Identity(2, 2), gauss_legendre(2)), std::invalid_argument);
}

TEST_CASE("nodal error examples") {
  const TimeMesh mesh = build_uniform_mesh(1.0, 4);
  auto sq = [](double t) { return scalar(t * t); };
  const BrokenFunction P = project_broken(sq, mesh, 1, ProjectionSpec(2, gauss_legendre(4)));
  CHECK(error_nodal_max(P, sq, Matrix::Identity(1, 1)) < 1e-15);

  const TimeMesh one = build_uniform_mesh(1.0, 1);
  const Vector v{{3.0, 4.0}};
  const BrokenFunction U = constant_broken(one, 1, v);
  const Matrix M = (Matrix(2, 2) << 2.0, 0.0, 0.0, 0.5).finished();
  CHECK(error_nodal_max(U, [](double) { return Vector::Zero(2).eval(); }, M) ==
        doctest::Approx(std::sqrt(v.dot(M * v))));
}

TEST_CASE("nodal error of stokes3 matches breakpoint re-evaluation") {
  const ConstrainedSystem sys = build_stokes3();
  const TimeMesh mesh = build_uniform_mesh(1.0, 16);
  const MixedSolution sol = solve_mixed(sys, mesh, SolverOptions{2});
  const double value = error_nodal_max(sol.U, sys.exact_u, sys.M);

  const MixedSolution again = solve_mixed(sys, mesh, SolverOptions{2});
  double oracle = 0.0;
  for (int n = 1; n <= 16; ++n) {
    const double t = mesh.point(n);
    const Vector e = again.U.eval(t, Side::left) - sys.exact_u(t);
    oracle = std::max(oracle, std::sqrt(e.dot(sys.M * e)));
  }
  CHECK(value == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(value > 1e-8);
}

TEST_CASE("multiplier error mirrors the energy error") {
  const TimeMesh mesh = build_uniform_mesh(1.0, 2);
  const BrokenFunction P = constant_broken(mesh, 2, Vector{{2.0}});
  CHECK(error_l2_multiplier(P, [](double) { return scalar(0.0); }, Matrix::Identity(1, 1),
                            error_quadrature(2)) == doctest::Approx(2.0));
}

TEST_CASE("l2 projection utility") {
  const TimeMesh mesh = build_uniform_mesh(1.0, 1);
  const BrokenFunction P = l2_project_broken([](double t) { return scalar(t * t); }, mesh, 1, 2, gauss_legendre(4));
  // Best linear fit of t^2 on [0, 1] is t - 1/6.
  CHECK(P.eval(0.25)[0] == doctest::Approx(0.25 - 1.0 / 6.0).epsilon(1e-13));
  CHECK(P.eval(1.0)[0] == doctest::Approx(1.0 - 1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("eoc examples") {
  std::vector<Order> o = eoc({0.4, 0.1}, {4, 8});
  REQUIRE(o.size() == 1);
  CHECK(o[0].value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_FALSE(o[0].at_floor);

  // Values from the published energy-error table.
  o = eoc({0.46966, 0.11928}, {4, 8});
  CHECK(std::abs(o[0].value - 1.97726) < 1e-3);
  o = eoc({0.02990, 0.00748}, {16, 32});
  CHECK(std::abs(o[0].value - 1.999) < 1e-3);
  // The table's own value 1.99831 was computed from unrounded errors.
  CHECK(std::abs(o[0].value - 1.99831) < 2e-3);

  o = eoc({1e-3, 1e-14, 1e-15}, {2, 4, 8});
  CHECK(o[0].at_floor);
  CHECK(o[1].at_floor);

  CHECK(eoc({1.0}, {4}).empty());
  CHECK_THROWS_AS(eoc({1.0, 0.5}, {4}), std::invalid_argument);
}

TEST_CASE("property: eoc translation invariance") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> errs;
    std::vector<int> Ns;
    double e = rng.uniform(0.1, 1.0);
    int N = rng.integer(2, 5);
    for (int i = 0; i < 5; ++i) {
      errs.push_back(e);
      Ns.push_back(N);
      e *= rng.uniform(0.05, 0.6);
      N *= 2;
    }
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    std::vector<double> scaled;
    for (double x : errs) scaled.push_back(c * x);
    const auto a = eoc(errs, Ns), b = eoc(scaled, Ns);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i].value - b[i].value) <= 1e-12);
  }
}

TEST_CASE("property: error norms are homogeneous") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = rng.integer(1, 3), q = rng.integer(1, 3);
    const TimeMesh mesh = rng.mesh(1.0, rng.integer(1, 6));
    const Matrix W = rng.spd(dim);
    const BrokenFunction U = random_broken(rng, mesh, q, dim);
    const double s = rng.uniform(-4.0, 4.0);
    std::vector<SlabPoly> scaled;
    for (const SlabPoly& p : U.slabs()) scaled.emplace_back(Matrix(s * p.coeffs()));
    const BrokenFunction sU(mesh, scaled);
    auto zero = [dim](double) { return Vector::Zero(dim).eval(); };
    const Quadrature quad = error_quadrature(q);
    const double e1 = error_l2_energy(U, zero, W, quad), e2 = error_l2_energy(sU, zero, W, quad);
    CHECK(e2 == doctest::Approx(std::abs(s) * e1).epsilon(1e-12));
    const double n1 = error_nodal_max(U, zero, W), n2 = error_nodal_max(sU, zero, W);
    CHECK(n2 == doctest::Approx(std::abs(s) * n1).epsilon(1e-12));
    CHECK(e1 > 0.0);
  }
}

TEST_CASE("study tables") {
  const ConstrainedSystem heat = build_heat_1d(4, heat_trig());
  StudyOptions opts;
  opts.q = 2;
  opts.Ns = {8, 16, 32, 64};
  const EOCTable table = run_study(heat, opts);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.q == 2);
  CHECK(table.use_projection);
  CHECK_FALSE(table.rows[0].eoc_energy.has_value());
  for (std::size_t i = 1; i < 4; ++i) {
    const EOCRow& row = table.rows[i];
    CHECK(row.k == doctest::Approx(1.0 / row.N));
    REQUIRE(row.eoc_energy.has_value());
    CHECK(row.eoc_energy->value >= 1.9);
    CHECK(row.eoc_energy->value <= 2.1);
    CHECK(row.eoc_nodal->value >= 2.8);
    CHECK(row.eoc_nodal->value <= 3.2);
    CHECK_FALSE(row.err_p.has_value());
  }

  // Stokes3: multiplier column present; thread count does not change the result.
  const ConstrainedSystem stokes = build_stokes3();
  opts.Ns = {4, 8, 16};
  opts.norms = {false, true, true};
  const EOCTable serial = run_study(stokes, opts);
  opts.threads = 3;
  const EOCTable parallel = run_study(stokes, opts);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK_FALSE(serial.rows[i].err_energy.has_value());
    REQUIRE(serial.rows[i].err_p.has_value());
    CHECK(*serial.rows[i].err_p == *parallel.rows[i].err_p);
    CHECK(*serial.rows[i].err_nodal == *parallel.rows[i].err_nodal);
  }

  opts.Ns = {};
  CHECK_THROWS_AS(run_study(stokes, opts), std::invalid_argument);
  opts.Ns = {8, 4};
  CHECK_THROWS_AS(run_study(stokes, opts), std::invalid_argument);
}

TEST_CASE("study reports the failing N") {
  ConstrainedSystem sys = build_stokes3();
  sys.B1 = Matrix::Zero(1, 3);
  StudyOptions opts;
  opts.Ns = {4, 8};
  try {
    run_study(sys, opts);
    FAIL("expected solver_failure");
  } catch (const solver_failure& e) {
    CHECK(std::string(e.what()).find("N = 4") != std::string::npos);
  }
}

TEST_CASE("quadrature sufficiency of the error measurement") {
  const ConstrainedSystem heat = build_heat_1d(4, heat_trig());
  const ConstrainedSystem stokes = build_stokes3();
  for (int q : {1, 2, 3}) {
    for (const ConstrainedSystem* sys : {&heat, &stokes}) {
      const TimeMesh mesh = build_uniform_mesh(1.0, 16);
      const MixedSolution sol = solve(*sys, mesh, SolverOptions{q});
      const Quadrature base = error_quadrature(q);
      const Quadrature doubled = gauss_legendre(2 * base.size());
      const double e1 = error_l2_energy(sol.U, sys->exact_u, sys->normU, base);
      const double e2 = error_l2_energy(sol.U, sys->exact_u, sys->normU, doubled);
      INFO(sys->name << " q " << q);
      CHECK(std::abs(e1 - e2) < 1e-8 * e2);
    }
  }
}
