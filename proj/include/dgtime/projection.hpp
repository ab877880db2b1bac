#pragma once

#include "dgtime/timecore.hpp"

namespace dgtime {

/// Temporal degree and the rule used for moments of non-polynomial input.
struct ProjectionSpec {
  ProjectionSpec(int q, Quadrature quadrature);

  int q;
  Quadrature quadrature;
};

/// Projection onto polynomials of degree q-1 on (a, b] that interpolates
/// phi at b and matches its moments against all polynomials of degree q-2.
/// For q = 1 only the endpoint condition applies.
SlabPoly project_slab(const TimeFunction& phi, double a, double b, int dim,
                      const ProjectionSpec& spec);

/// Slab-wise application of project_slab on every slab of the mesh. The
/// result interpolates phi at every t_n, n >= 1.
BrokenFunction project_broken(const TimeFunction& phi, const TimeMesh& mesh, int dim,
                              const ProjectionSpec& spec);

/// Wraps a broken function as a TimeFunction using left limits, which is
/// the slab-interior value wherever the projection samples it.
TimeFunction as_time_function(const BrokenFunction& F);

}  // namespace dgtime
