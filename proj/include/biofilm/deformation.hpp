#pragma once

#include "biofilm/expression.hpp"
#include "biofilm/mesh.hpp"
#include "biofilm/types.hpp"

#include <functional>
#include <optional>

namespace biofilm {

/// Jacobian of the deformation at one reference point: J, det J, J^-1 and
/// the map velocity dPhi/dt there. J * Jinv = I to solver tolerance.
struct JacobianData {
  Mat2 J = Mat2::Identity();
  double detJ = 1.0;
  Mat2 Jinv = Mat2::Identity();
  Vec2 map_velocity = Vec2::Zero();
};

/// Normal data of the moving top boundary at the current configuration,
/// extended off-surface as a function of x1 alone (independent of x2).
struct SurfaceFrame {
  Vec2 normal = Vec2(0.0, 1.0);
  Vec2 dnormal_dx1 = Vec2::Zero();
  Vec2 dnormal_dt = Vec2::Zero();
  double slope = 0.0;  // dH/dx1 of the current top graph
};

/// Time-indexed family of deformations Phi(x,t) of the reference slice.
///
/// LinearField mode: Phi(x,t) = x + t*nu(x) for a smooth vector field nu.
/// GraphHeight mode: Phi(x,t) = (x1, x2*h(x1,t)/h0(x1)) for a prescribed
/// height profile with h(x1,0) = h0(x1).
///
/// Phi(x,0) = x, det J > 0 on [0, t_max] (t_max is found at construction by
/// sampling det J on a grid and bisecting, never trusted from the caller),
/// and in GraphHeight mode h >= h_floor > 0.
/// Instances are immutable and safe to share across threads.
class DeformationMap {
 public:
  enum class Mode { LinearField, GraphHeight };

  using ScalarFn = std::function<double(double)>;           // of x1
  using SpaceTimeFn = std::function<double(double, double)>;  // of (x1, t)
  using VectorFieldFn = std::function<Vec2(const Vec2&)>;
  using MatrixFieldFn = std::function<Mat2(const Vec2&)>;

  /// Fixed domain: Phi = identity for all t.
  static DeformationMap identity(double t_max = 1e30);

  static DeformationMap linear_field(VectorFieldFn nu, MatrixFieldFn grad_nu,
                                     double length, ScalarFn h0, ScalarFn dh0_dx1,
                                     double t_max_request);

  /// Callable-based graph mode; all derivative callables are analytic,
  /// including the mixed partial d2h/dt dx1.
  static DeformationMap graph_height(SpaceTimeFn h, SpaceTimeFn dh_dt, SpaceTimeFn dh_dx1,
                                     SpaceTimeFn d2h_dx1x1, SpaceTimeFn d2h_dtdx1, ScalarFn h0,
                                     ScalarFn dh0_dx1, double length, double h_floor,
                                     double t_max_request);

  /// Graph mode from an expression h(x1,t); derivatives are symbolic.
  static DeformationMap graph_height_expr(const Expr& h, const Expr& h0, double length,
                                          double h_floor, double t_max_request);

  Mode mode() const { return mode_; }
  double t_max() const { return t_max_; }
  double h_floor() const { return h_floor_; }

  Vec2 map(const Vec2& x, double t) const;
  JacobianData jacobian_at(const Vec2& x, double t) const;

  /// det J * ||J^-T n||: the ratio of deformed to reference surface measure
  /// at a point of the reference top boundary with unit normal n.
  double surface_dilation(const Vec2& x, const Vec2& n_ref, double t) const;

  /// Map velocity dPhi/dt expressed at the current configuration, and its
  /// gradient with respect to current coordinates. The reference point is
  /// passed; the value is attached to Phi(x,t).
  Vec2 velocity_current(const Vec2& x_ref, double t) const;
  Mat2 velocity_gradient_current(const Vec2& x_ref, double t) const;

  /// Current-configuration normal extension of the top boundary: n(x1) of
  /// the deformed graph and its x1-derivative. Assumes the top stays a graph
  /// over the reference abscissa (exact for vertical motions).
  SurfaceFrame top_frame(double x1, double t) const;

  /// Height of the current top graph above abscissa x1.
  double top_height(double x1, double t) const;

 private:
  DeformationMap() = default;
  void compute_t_max(double t_request);
  void check_time(double t) const;

  Mode mode_ = Mode::LinearField;
  double t_max_ = 0.0;
  double h_floor_ = 0.0;
  double length_ = 1.0;
  // LinearField
  VectorFieldFn nu_;
  MatrixFieldFn grad_nu_;
  // GraphHeight
  SpaceTimeFn h_, dh_dt_, dh_dx1_, d2h_dx1x1_, d2h_dtdx1_;
  ScalarFn h0_, dh0_dx1_;
};

/// Vertex-wise image of the mesh under Phi(.,t); connectivity and tags
/// unchanged. Always maps from the reference mesh, never incrementally.
/// Throws DegenerateDeformation if any triangle inverts.
Mesh deform_mesh(const Mesh& mesh, const DeformationMap& map, double t);

}  // namespace biofilm
