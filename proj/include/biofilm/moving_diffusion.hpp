#pragma once

#include "biofilm/deformation.hpp"
#include "biofilm/fem.hpp"
#include "biofilm/mechanics.hpp"

#include <optional>

namespace biofilm {

/// Coefficient fields of the diffusion problem pulled back to the reference
/// domain: A = kappa (J^T J)^-1 det J, b = -J^-1 dPhi/dt det J, c = det J and
/// the transported source f(Phi(x,t),t) det J. The convection term enters
/// the bilinear form as +(b . grad u, w). All callables take reference
/// coordinates.
struct PullbackCoefficients {
  MatrixCoeff A;
  VectorCoeff b;
  ScalarCoeff c;
  ScalarCoeff f;
};

using SpaceTimeScalar = std::function<double(const Vec2&, double)>;

PullbackCoefficients pullback_coefficients(const DeformationMap& map, double kappa,
                                           const SpaceTimeScalar& f, double t);

/// Shifted problem data for a spatially constant boundary value g(t):
/// initial datum e0 - g(0), source f - g'(t), reconstruction adds g back.
/// Rejects g with any spatial dependence.
struct HomogenizedProblem {
  Field e0_shifted;
  SpaceTimeScalar source_shifted;
  Expr g;  // of t
};

HomogenizedProblem homogenize(const Field& e0, const Expr& g_of_t, const SpaceTimeScalar& f);

/// Mass (c-weighted, with load) and stiffness+convection operators of one
/// time level.
struct LevelOperators {
  SparseMat mass;
  SparseMat stiff;
  VecX load;
};

LevelOperators assemble_level(const Mesh& mesh, const PullbackCoefficients& coeffs);

/// One theta-scheme step of the conservative form
///   (M^{n+1} u^{n+1} - M^n u^n)/dt + theta L^{n+1} u^{n+1}
///   + (1-theta) L^n u^n = theta F^{n+1} + (1-theta) F^n,
/// with Dirichlet values bc_next on the whole boundary (zero for the
/// homogenized model problem). history_factor scales the old-level terms;
/// it is 1 except inside the exponential-shift integration.
Field step(const Mesh& mesh, const PullbackCoefficients& now, const PullbackCoefficients& next,
           const Field& u_n, double dt, double theta, const ScalarBC& bc_next = nullptr);

VecX theta_step(const Mesh& mesh, const LevelOperators& now, const LevelOperators& next,
                const VecX& u_n, double dt, double theta, const ScalarBC& bc_next,
                double history_factor = 1.0);

struct DiffusionTrajectory {
  std::vector<double> times;
  std::vector<Field> states;   // on the reference mesh, boundary value added back
  std::vector<double> energy;  // c-weighted L2 norm per accepted step
  const Mesh* mesh = nullptr;
  const DeformationMap* map = nullptr;

  /// Push-forward sampler: the deformed mesh carrying states[i].
  Mesh deformed_at(int i) const;
};

struct MovingDiffusionProblem {
  const Mesh* mesh = nullptr;
  const DeformationMap* map = nullptr;
  double kappa = 1.0;
  SpaceTimeScalar source;           // Eulerian f(y,t); empty means zero
  Expr dirichlet;                   // g(t), spatially constant (model path)
  SpaceTimeScalar dirichlet_ref;    // general Dirichlet data at reference
                                    // boundary points; overrides `dirichlet`
  Field e0;                         // degree-1 initial datum, reference mesh
  double T = 1.0;
  double dt = 0.1;
  double theta = 1.0;
  std::optional<double> lambda_shift;
};

/// Full pulled-back trajectory. When lambda_shift is set, the shifted
/// variable v = exp(-lambda t) u is integrated with exact per-step
/// integrating factors and rescaled, so the two paths agree to roundoff.
DiffusionTrajectory solve_moving_diffusion(const MovingDiffusionProblem& problem);

}  // namespace biofilm
