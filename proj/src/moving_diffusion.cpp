#include "biofilm/moving_diffusion.hpp"

#include <cmath>

namespace biofilm {

PullbackCoefficients pullback_coefficients(const DeformationMap& map, double kappa,
                                           const SpaceTimeScalar& f, double t) {
  const DeformationMap* mp = &map;
  PullbackCoefficients out;
  out.A = [mp, kappa, t](int, const Vec2& x) {
    JacobianData jd = mp->jacobian_at(x, t);
    return Mat2(kappa * jd.detJ * (jd.Jinv * jd.Jinv.transpose()));
  };
  out.b = [mp, t](int, const Vec2& x) {
    JacobianData jd = mp->jacobian_at(x, t);
    return Vec2(-jd.detJ * (jd.Jinv * jd.map_velocity));
  };
  out.c = [mp, t](int, const Vec2& x) { return mp->jacobian_at(x, t).detJ; };
  if (f) {
    out.f = [mp, f, t](int, const Vec2& x) {
      JacobianData jd = mp->jacobian_at(x, t);
      return f(mp->map(x, t), t) * jd.detJ;
    };
  } else {
    out.f = nullptr;
  }
  return out;
}

HomogenizedProblem homogenize(const Field& e0, const Expr& g_of_t, const SpaceTimeScalar& f) {
  // The change of unknown requires g constant in space.
  for (const char* var : {"x1", "x2"}) {
    Expr d = g_of_t.derivative(var);
    for (double s : {0.0, 0.37, 1.0, 2.13}) {
      if (std::abs(d.eval(s, 1.0 - s, 0.5 * s)) > 1e-14)
        throw InvalidInput("homogenize: boundary value must not depend on space");
    }
  }
  HomogenizedProblem hp;
  hp.g = g_of_t;
  hp.e0_shifted = e0;
  hp.e0_shifted.coeffs.array() -= g_of_t.eval(0, 0, 0.0);
  Expr g_rate = g_of_t.derivative("t");
  hp.source_shifted = [f, g_rate](const Vec2& y, double t) {
    return (f ? f(y, t) : 0.0) - g_rate.eval(0, 0, t);
  };
  return hp;
}

LevelOperators assemble_level(const Mesh& mesh, const PullbackCoefficients& coeffs) {
  LevelOperators ops;
  SparseSystem mass = assemble_scalar(mesh, 1, nullptr, nullptr, coeffs.c, coeffs.f);
  // Conservative pairing: with the d/dt(c-weighted mass) time term, the
  // convection must sit in the integrated-by-parts slot -int u (J^-1 V detJ
  // . grad w); div(J^-1 V detJ) = d(detJ)/dt makes the two forms equal for
  // test functions vanishing on the boundary.
  VectorCoeff b = coeffs.b;
  VectorCoeff b_adjoint = [b](int tri, const Vec2& x) { return Vec2(-b(tri, x)); };
  ScalarFormOptions opt;
  opt.convection_form = ConvectionForm::Adjoint;
  SparseSystem stiff = assemble_scalar(mesh, 1, coeffs.A, b_adjoint, nullptr, nullptr, opt);
  ops.mass = std::move(mass.unconstrained);
  ops.load = std::move(mass.rhs_unconstrained);
  ops.stiff = std::move(stiff.unconstrained);
  return ops;
}

VecX theta_step(const Mesh& mesh, const LevelOperators& now, const LevelOperators& next,
                const VecX& u_n, double dt, double theta, const ScalarBC& bc_next,
                double history_factor) {
  if (!(dt > 0.0)) throw InvalidInput("step: dt must be positive");
  if (theta < 0.5 || theta > 1.0) throw InvalidInput("step: theta must lie in [0.5, 1]");

  SparseMat lhs = next.mass * (1.0 / dt) + theta * next.stiff;
  VecX rhs = history_factor * ((1.0 / dt) * (now.mass * u_n) - (1.0 - theta) * (now.stiff * u_n) +
                               (1.0 - theta) * now.load) +
             theta * next.load;

  SparseSystem sys;
  sys.rank = FieldRank::Scalar;
  sys.degree = 1;
  sys.unconstrained = lhs;
  sys.rhs_unconstrained = rhs;
  sys.matrix = sys.unconstrained;
  sys.rhs = sys.rhs_unconstrained;
  sys.symmetric = false;
  sys.triplets.reserve(lhs.nonZeros());
  for (int k = 0; k < lhs.outerSize(); ++k)
    for (SparseMat::InnerIterator it(lhs, k); it; ++it)
      sys.triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                it.value());
  apply_dirichlet(sys, mesh, BoundarySelector::All,
                  bc_next ? bc_next : ScalarBC([](const Vec2&) { return 0.0; }));
  return solve(sys);
}

Field step(const Mesh& mesh, const PullbackCoefficients& now, const PullbackCoefficients& next,
           const Field& u_n, double dt, double theta, const ScalarBC& bc_next) {
  LevelOperators ops_now = assemble_level(mesh, now);
  LevelOperators ops_next = assemble_level(mesh, next);
  Field u = u_n;
  u.coeffs = theta_step(mesh, ops_now, ops_next, u_n.coeffs, dt, theta, bc_next);
  return u;
}

Mesh DiffusionTrajectory::deformed_at(int i) const {
  return deform_mesh(*mesh, *map, times.at(i));
}

DiffusionTrajectory solve_moving_diffusion(const MovingDiffusionProblem& problem) {
  const Mesh& mesh = *problem.mesh;
  const DeformationMap& map = *problem.map;
  if (problem.T > map.t_max() * (1.0 + 1e-12))
    throw InvalidInput("solve_moving_diffusion: T exceeds the map's admissible t_max");

  const bool general_bc = static_cast<bool>(problem.dirichlet_ref);
  const double lambda = problem.lambda_shift.value_or(0.0);

  // Model path: homogenize against the constant-in-space boundary value.
  SpaceTimeScalar source = problem.source;
  Field u0 = problem.e0;
  Expr g = problem.dirichlet;
  if (!general_bc) {
    HomogenizedProblem hp = homogenize(problem.e0, problem.dirichlet, problem.source);
    source = hp.source_shifted;
    u0 = hp.e0_shifted;
  }

  const int steps = static_cast<int>(std::ceil(problem.T / problem.dt - 1e-12));
  DiffusionTrajectory traj;
  traj.mesh = problem.mesh;
  traj.map = problem.map;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);

  auto boundary_values = [&](double t) -> ScalarBC {
    double scale = std::exp(-lambda * t);
    if (general_bc) {
      SpaceTimeScalar bc = problem.dirichlet_ref;
      return [bc, t, scale](const Vec2& x) { return scale * bc(x, t); };
    }
    return [scale](const Vec2&) { return 0.0; };  // homogenized
  };

  auto reconstruct = [&](const VecX& v, double t) {
    Field out = make_field(mesh, FieldRank::Scalar, 1);
    out.coeffs = std::exp(lambda * t) * v;
    if (!general_bc) out.coeffs.array() += g.eval(0, 0, t);
    return out;
  };

  VecX v = u0.coeffs * 1.0;  // shifted variable (equals u at t=0)
  PullbackCoefficients coeffs = pullback_coefficients(map, problem.kappa, source, 0.0);
  LevelOperators ops = assemble_level(mesh, coeffs);
  if (general_bc) {
    // Initial datum must carry its own boundary values.
    Field init = problem.e0;
    v = init.coeffs;
  }
  traj.times.push_back(0.0);
  traj.states.push_back(reconstruct(v, 0.0));
  traj.energy.push_back(std::sqrt(std::max(0.0, v.dot(ops.mass * v))));

  double t = 0.0;
  for (int n = 0; n < steps; ++n) {
    double dt = std::min(problem.dt, problem.T - t);
    double t_next = t + dt;
    // Scale the source consistently with the shifted variable.
    SpaceTimeScalar scaled_source;
    if (source) {
      SpaceTimeScalar src = source;
      double lam = lambda;
      scaled_source = [src, lam](const Vec2& y, double tt) {
        return std::exp(-lam * tt) * src(y, tt);
      };
    }
    PullbackCoefficients coeffs_next =
        pullback_coefficients(map, problem.kappa, scaled_source, t_next);
    LevelOperators ops_next = assemble_level(mesh, coeffs_next);
    double history_factor = std::exp(-lambda * dt);
    v = theta_step(mesh, ops, ops_next, v, dt, problem.theta, boundary_values(t_next),
                   history_factor);
    t = t_next;
    traj.times.push_back(t);
    traj.states.push_back(reconstruct(v, t));
    traj.energy.push_back(std::exp(lambda * t) *
                          std::sqrt(std::max(0.0, v.dot(ops_next.mass * v))));
    ops = std::move(ops_next);
  }
  return traj;
}

}  // namespace biofilm
