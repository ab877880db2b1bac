#include "dgtime/projection.hpp"

#include <string>

namespace dgtime {

ProjectionSpec::ProjectionSpec(int q_, Quadrature quadrature_)
    : q(q_), quadrature(std::move(quadrature_)) {
  if (q < 1) throw std::invalid_argument("ProjectionSpec: q must be >= 1");
  if (quadrature.exactness_degree < 2 * q - 2) {
    throw std::invalid_argument("ProjectionSpec: quadrature exactness must be >= 2q - 2");
  }
}

SlabPoly project_slab(const TimeFunction& phi, double a, double b, int dim,
                      const ProjectionSpec& spec) {
  if (!(b > a)) {
    throw std::logic_error("project_slab: empty interval");
  }
  const int q = spec.q;
  const double k = b - a;
  const Quadrature& quad = spec.quadrature;

  // In the shifted Legendre basis the defining system is
  //   sum_j c_j = phi(b)                          (phi_j(b) = 1)
  //   c_i * k / (2i + 1) = int phi * phi_i,  i <= q-2  (orthogonality)
  // which is triangular: the moment rows fix c_0..c_{q-2} directly.
  Matrix c = Matrix::Zero(q, dim);
  if (q > 1) {
    for (int l = 0; l < quad.size(); ++l) {
      const double tau = quad.nodes[l];
      const Vector v = phi(a + k * tau);
      if (v.size() != dim) throw data_error("project_slab: function has the wrong dimension");
      const SlabBasis basis = slab_basis(q - 1, tau, k);
      c.topRows(q - 1).noalias() += quad.weights[l] * basis.values * v.transpose();
    }
    for (int i = 0; i < q - 1; ++i) c.row(i) *= 2.0 * i + 1.0;
  }
  const Vector end_value = phi(b);
  if (end_value.size() != dim) throw data_error("project_slab: function has the wrong dimension");
  c.row(q - 1) = end_value.transpose() - c.topRows(q - 1).colwise().sum();
  if (!c.allFinite()) {
    throw data_error("project_slab: non-finite data on (" + std::to_string(a) + ", " +
                     std::to_string(b) + "]");
  }
  return SlabPoly(std::move(c));
}

BrokenFunction project_broken(const TimeFunction& phi, const TimeMesh& mesh, int dim,
                              const ProjectionSpec& spec) {
  std::vector<SlabPoly> slabs;
  slabs.reserve(mesh.num_slabs());
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    slabs.push_back(project_slab(phi, mesh.slab_begin(s), mesh.slab_end(s), dim, spec));
  }
  return BrokenFunction(mesh, std::move(slabs));
}

TimeFunction as_time_function(const BrokenFunction& F) {
  return [F](double t) { return F.eval(t, Side::left); };
}

}  // namespace dgtime
