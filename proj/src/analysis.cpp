#include "dgtime/analysis.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <algorithm>
#include <thread>

namespace dgtime {

Quadrature error_quadrature(int q) { return gauss_legendre(std::min(q + 3, 16)); }

double error_l2_energy(const BrokenFunction& U, const TimeFunction& exact, const Matrix& W,
                       const Quadrature& quad) {
  if (W.rows() != U.dim() || W.cols() != U.dim()) {
    throw std::invalid_argument("error_l2_energy: norm matrix does not match the dimension");
  }
  if (quad.size() < U.q() + 2) {
    throw std::invalid_argument("error_l2_energy: need at least q + 2 quadrature points");
  }
  const TimeMesh& mesh = U.mesh();
  double sum = 0.0;
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    const double a = mesh.slab_begin(s);
    const double k = mesh.width(s);
    for (int l = 0; l < quad.size(); ++l) {
      const double t = a + k * quad.nodes[l];
      const Vector ex = exact(t);
      if (ex.size() != U.dim()) throw std::invalid_argument("error_l2_energy: exact has wrong dimension");
      const Vector d = U.eval_in_slab(s, t) - ex;
      sum += k * quad.weights[l] * d.dot(W * d);
    }
  }
  return std::sqrt(std::max(sum, 0.0));
}

double error_nodal_max(const BrokenFunction& U, const TimeFunction& exact, const Matrix& M) {
  if (M.rows() != U.dim() || M.cols() != U.dim()) {
    throw std::invalid_argument("error_nodal_max: norm matrix does not match the dimension");
  }
  double worst = 0.0;
  const TimeMesh& mesh = U.mesh();
  for (int n = 1; n <= mesh.num_slabs(); ++n) {
    const Vector ex = exact(mesh.point(n));
    if (ex.size() != U.dim()) throw std::invalid_argument("error_nodal_max: exact has wrong dimension");
    const Vector d = U.left_limit(n) - ex;
    worst = std::max(worst, std::sqrt(std::max(d.dot(M * d), 0.0)));
  }
  return worst;
}

double error_l2_multiplier(const BrokenFunction& P, const TimeFunction& exact_p,
                           const Matrix& normQ1, const Quadrature& quad) {
  return error_l2_energy(P, exact_p, normQ1, quad);
}

BrokenFunction l2_project_broken(const TimeFunction& phi, const TimeMesh& mesh, int dim, int q,
                                 const Quadrature& quad) {
  if (quad.exactness_degree < 2 * q - 2) {
    throw std::invalid_argument("l2_project_broken: quadrature too weak for degree q - 1");
  }
  std::vector<SlabPoly> slabs;
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    Matrix c = slab_moments(phi, mesh, s, q, dim, quad);
    for (int i = 0; i < q; ++i) c.row(i) *= (2.0 * i + 1.0) / mesh.width(s);
    slabs.emplace_back(std::move(c));
  }
  return BrokenFunction(mesh, std::move(slabs));
}

std::vector<Order> eoc(const std::vector<double>& errors, const std::vector<int>& Ns) {
  if (errors.size() != Ns.size()) {
    throw std::invalid_argument("eoc: errors and Ns differ in length");
  }
  std::vector<Order> orders;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    if (Ns[i] <= Ns[i - 1]) throw std::invalid_argument("eoc: Ns must be strictly increasing");
    if (!(errors[i - 1] > kErrorFloor) || !(errors[i] > kErrorFloor)) {
      orders.push_back({0.0, true});
      continue;
    }
    const double ratio = static_cast<double>(Ns[i]) / Ns[i - 1];
    orders.push_back({std::log(errors[i - 1] / errors[i]) / std::log(ratio), false});
  }
  return orders;
}

namespace {

EOCRow measure(const ConstrainedSystem& sys, const StudyOptions& opts, int N) {
  const TimeMesh mesh = build_uniform_mesh(opts.T, N);
  SolverOptions so;
  so.q = opts.q;
  so.use_projection = opts.use_projection;
  MixedSolution sol = [&] {
    try {
      return solve(sys, mesh, so);
    } catch (const solver_failure& e) {
      throw solver_failure("N = " + std::to_string(N) + ": " + e.what(), e.slab());
    }
  }();
  const Quadrature quad = error_quadrature(opts.q);
  EOCRow row;
  row.N = N;
  row.k = opts.T / N;
  if (opts.norms.energy) row.err_energy = error_l2_energy(sol.U, sys.exact_u, sys.normU, quad);
  if (opts.norms.nodal) row.err_nodal = error_nodal_max(sol.U, sys.exact_u, sys.M);
  if (opts.norms.multiplier && sys.r1() > 0) {
    row.err_p = error_l2_multiplier(*sol.P, sys.exact_p, sys.normQ1, quad);
  }
  return row;
}

void fill_orders(std::vector<EOCRow>& rows, std::optional<double> EOCRow::*err,
                 std::optional<Order> EOCRow::*order) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].*err) || !(rows[i - 1].*err)) continue;
    rows[i].*order = eoc({*(rows[i - 1].*err), *(rows[i].*err)}, {rows[i - 1].N, rows[i].N})[0];
  }
}

}  // namespace

EOCTable run_study(const ConstrainedSystem& sys, const StudyOptions& opts) {
  if (opts.Ns.empty()) throw std::invalid_argument("run_study: no mesh sizes given");
  for (std::size_t i = 1; i < opts.Ns.size(); ++i) {
    if (opts.Ns[i] <= opts.Ns[i - 1]) throw std::invalid_argument("run_study: Ns must be increasing");
  }
  if (!sys.exact_u) throw std::invalid_argument("run_study: system has no manufactured solution");
  if (opts.norms.multiplier && sys.r1() > 0 && !sys.exact_p) {
    throw std::invalid_argument("run_study: system has no manufactured multiplier");
  }

  const std::size_t count = opts.Ns.size();
  std::vector<EOCRow> rows(count);
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        rows[i] = measure(sys, opts, opts.Ns[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(opts.threads, 1, static_cast<int>(count));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  fill_orders(rows, &EOCRow::err_energy, &EOCRow::eoc_energy);
  fill_orders(rows, &EOCRow::err_nodal, &EOCRow::eoc_nodal);
  fill_orders(rows, &EOCRow::err_p, &EOCRow::eoc_p);

  EOCTable table;
  table.problem = sys.name;
  table.q = opts.q;
  table.use_projection = opts.use_projection;
  table.note = "EOC_T compares each N with the previous one";
  table.rows = std::move(rows);
  return table;
}

}  // namespace dgtime
