#pragma once

#include "biofilm/concentration.hpp"
#include "biofilm/moving_diffusion.hpp"
#include "biofilm/volume_fraction.hpp"

namespace biofilm {

struct SweepConfig {
  int max_iters = 30;
  double rel_tol = 1e-8;
  double relaxation = 1.0;  // applied to the two frozen quantities only
  double phi_infty = 0.5;   // initial constant solid fraction
  double fraction_tol = 1e-9;

  void validate() const;
};

/// Converged bundle at one time slab. The deformed mesh is held behind a
/// shared pointer so the fields' mesh references stay valid when the state
/// is moved or copied.
struct SlabState {
  double t = 0.0;
  std::shared_ptr<const Mesh> mesh;
  Field e_rate;                 // dilatation rate, nodal on the slab mesh
  Field p_rate, p;              // degree-1 scalars
  Field u_s, v_s, v_f;          // degree-2 vectors
  Field phi_f, phi_s, c;        // degree-1 scalars
  std::vector<double> sweep_history;  // max relative L2 change per sweep
  AdmissibilityReport admissibility;
  double div_consistency = 0.0;  // || div v_s - e' ||_L2, reported only
  double height_flux_norm = 0.0;

  const Mesh& mesh_t() const { return *mesh; }

  // Internal continuation data.
  VecX e_hat;                    // homogenized dilatation rate on the reference mesh
  BoundaryField traction_corr;   // relaxed correction r of the last sweep
};

struct CoupledModel {
  const Mesh* mesh_ref = nullptr;
  const DeformationMap* map = nullptr;
  MaterialParams mp;
  SweepConfig sweep;
  double theta = 1.0;          // time scheme for the dilatation-rate step
  std::optional<double> lambda_shift;  // exponential shift of the rate step
  BoundaryTraction g;          // boundary traction; empty -> -(p_ext - pi_ext) n
  BoundaryVectorCoeff dg_dt;   // Eulerian time derivative; empty -> analytic default
};

struct SweepIterate {
  Field p_rate, v_s, p, v_f, phi_f, phi_s, u_s, c;
  BoundaryField traction_corr;
  AdmissibilityReport admissibility;
};

/// One fixed-point sweep in the order p', v_s, p, v_f, phi_f, phi_s, u_s, c,
/// freezing the previous iterate's phi_s in the displacement solve and the
/// previous displacement gradient in the traction correction. iteration is
/// 1-based; an inadmissible v_f aborts on iteration 1 and is tolerated later
/// only below 10x the sign tolerance.
SweepIterate quasistationary_sweep(const CoupledModel& model, const Mesh& mesh_t, double t,
                                   const Field& e_rate, const SweepIterate& prev, int iteration);

/// Initial slab at t = 0: constant-fraction start, zero displacement,
/// sweeps to tolerance.
SlabState initial_slab(const CoupledModel& model);

/// Steps the dilatation rate over [prev.t, t_next], then sweeps the
/// quasi-stationary block to tolerance. Throws SlabFailure on
/// non-convergence, carrying the sweep history.
SlabState solve_time_slab(const CoupledModel& model, const SlabState& prev, double t_next);

/// Residual of the height equation at the column abscissae:
///   R(x1) = dh/dt + d/dx1 int_0^h v.e1 dx2 - v.e2|_{x2=0},
/// with the composite velocity v = v_s - k_h grad(p - Pi phi_s). Column
/// integrals use the vertical mesh lines; the x1-derivative is a central
/// difference on the column abscissae. Diagnostic only.
struct HeightFluxResidual {
  std::vector<double> x1;
  std::vector<double> residual;
  double norm_l2 = 0.0;
  double norm_max = 0.0;
};

HeightFluxResidual height_flux_residual(const SlabState& state, const MaterialParams& mp,
                                        const DeformationMap& map, double t);

/// Experimental explicit height update
///   h_next = h - dt (d/dx1 int_0^h v.e1 dx2 - v.e2|_0),
/// clipped at h_floor, dt limited so the largest column change stays under
/// 0.1 h_floor. Refuses to run unless the experimental flag is on.
struct HeightUpdate {
  std::vector<double> x1;
  std::vector<double> h_next;
  double dt_used = 0.0;
  bool clipped = false;
};

HeightUpdate height_explicit_update(const std::vector<double>& h, const SlabState& state,
                                    const MaterialParams& mp, double dt, double h_floor,
                                    bool experimental);

/// Composite mixture velocity v_s - k_h grad(p - Pi phi_s) as a degree-2
/// field on the slab mesh.
Field composite_velocity(const SlabState& state, const MaterialParams& mp);

/// The mechanical bundle of a slab (displacement, velocities, pressure and
/// its rate). Clamped nodes carry exact zeros; the pressure trace carries
/// the prescribed value exactly.
MechState mechanical_state(const SlabState& state);

}  // namespace biofilm
