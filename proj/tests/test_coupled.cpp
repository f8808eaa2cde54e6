#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "biofilm/coupled.hpp"

#include <cmath>

using namespace biofilm;

namespace {

Mesh unit_square(int n) { return build_strip_mesh(1.0, [](double) { return 1.0; }, n, n); }

DeformationMap graph_map(double rate, double t_max) {
  std::ostringstream os;
  os << "1 + " << rate << "*t";
  return DeformationMap::graph_height_expr(Expr::parse(os.str()), Expr::parse("1"), 1.0, 0.05,
                                           t_max);
}

CoupledModel make_null_model(const Mesh& mesh, const DeformationMap& map) {
  CoupledModel model;
  model.mesh_ref = &mesh;
  model.map = &map;
  model.mp.ec = {1.0, 1.0};
  model.mp.p_ext = Expr::parse("0.1");
  return model;
}

CoupledModel make_moving_model(const Mesh& mesh, const DeformationMap& map) {
  CoupledModel model;
  model.mesh_ref = &mesh;
  model.map = &map;
  model.mp.ec = {1.0, 1.0};
  model.mp.Pi = 1e-3;
  model.mp.xi_inf = 3.0;
  model.mp.k_c = 0.1;
  model.mp.g_c = 0.1;
  model.mp.d = 5.0;
  model.mp.p_ext = Expr::parse("0.1");
  model.mp.pi_ext = Expr::parse("0.05*t");  // osmotic ramp drives the film
  return model;
}

}  // namespace

TEST_CASE("null data: one-sweep fixed point with trivial fields") {
  Mesh mesh = unit_square(8);
  DeformationMap map = DeformationMap::identity();
  CoupledModel model = make_null_model(mesh, map);
  SlabState s = initial_slab(model);
  CHECK(s.sweep_history.size() <= 2);
  CHECK((s.p.coeffs.array() - 0.1).abs().maxCoeff() < 1e-12);
  CHECK(linf_norm(s.u_s) < 1e-12);
  CHECK((s.phi_f.coeffs.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((s.c.coeffs.array() - 1.0).abs().maxCoeff() < 1e-12);

  // Re-running the sweep from the fixed point changes nothing.
  SweepIterate fixed;
  fixed.p_rate = s.p_rate;
  fixed.p = s.p;
  fixed.v_s = s.v_s;
  fixed.v_f = s.v_f;
  fixed.u_s = s.u_s;
  fixed.phi_f = s.phi_f;
  fixed.phi_s = s.phi_s;
  fixed.c = s.c;
  fixed.traction_corr = s.traction_corr;
  SweepIterate again = quasistationary_sweep(model, s.mesh_t(), 0.0, s.e_rate, fixed, 2);
  CHECK((again.u_s.coeffs - s.u_s.coeffs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((again.p.coeffs - s.p.coeffs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((again.c.coeffs - s.c.coeffs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("re-solving the same slab is a fixed point") {
  Mesh mesh = unit_square(16);
  DeformationMap map = graph_map(0.1, 1.0);
  CoupledModel model = make_moving_model(mesh, map);
  SlabState s0 = initial_slab(model);
  SlabState s1 = solve_time_slab(model, s0, 0.1);
  SlabState again = solve_time_slab(model, s1, 0.1);  // dt = 0
  CHECK(again.sweep_history.size() <= 2);
  double denom = 1.0 + l2_norm(again.mesh_t(), s1.u_s);
  CHECK(l2_diff(again.mesh_t(), again.u_s, s1.u_s.on(again.mesh_t())) / denom <
        10.0 * model.sweep.rel_tol);
}

TEST_CASE("moving fixture: convergence, invariants and diagnostics") {
  Mesh mesh = unit_square(16);
  DeformationMap map = graph_map(0.1, 1.0);
  CoupledModel model = make_moving_model(mesh, map);
  SlabState s = initial_slab(model);
  for (int k = 1; k <= 2; ++k) {
    s = solve_time_slab(model, s, 0.1 * k);
    CHECK(s.sweep_history.size() <= 10);

    // phi_s + phi_f = 1 nodal, by construction.
    VecX sum = s.phi_s.coeffs + s.phi_f.coeffs;
    CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-14);

    // Clamped sides carry exact zero velocity and displacement, and the
    // pressure trace is the prescribed exterior value.
    MechState mech = mechanical_state(s);
    double p_bc = model.mp.p_ext_at(s.t);
    for (const auto& f : s.mesh_t().facets) {
      if (f.tag == BoundaryTag::GammaMinus) {
        for (int v : {f.a, f.b}) {
          CHECK(mech.u_s.coeffs[2 * v] == 0.0);
          CHECK(mech.u_s.coeffs[2 * v + 1] == 0.0);
          CHECK(mech.v_s.coeffs[2 * v] == 0.0);
          CHECK(mech.v_s.coeffs[2 * v + 1] == 0.0);
        }
      }
      for (int v : {f.a, f.b}) CHECK(mech.p.coeffs[v] == doctest::Approx(p_bc).epsilon(1e-14));
    }
    CHECK(s.div_consistency >= 0.0);
    CHECK(std::isfinite(s.height_flux_norm));
    CHECK(std::isfinite(s.div_consistency));
  }
  // Sweep residuals strictly decrease after the second sweep.
  const auto& h = s.sweep_history;
  for (size_t k = 2; k + 1 < h.size(); ++k) CHECK(h[k + 1] < h[k]);
}

TEST_CASE("converged displacement quotient tracks the solved velocity across slabs") {
  Mesh mesh = unit_square(16);
  DeformationMap map = graph_map(0.1, 1.0);
  CoupledModel model = make_moving_model(mesh, map);
  auto quotient_error = [&](double dt) {
    SlabState s0 = initial_slab(model);
    SlabState a = solve_time_slab(model, s0, 0.2);
    SlabState b = solve_time_slab(model, a, 0.2 + dt);
    // Material quotient vs v_s plus the convective part, on slab a.
    const Mesh& mt = a.mesh_t();
    double err2 = 0.0, norm2 = 0.0;
    const int nq = triangle_quadrature_points(2);
    Field quotient = a.u_s;
    quotient.coeffs = (b.u_s.coeffs - a.u_s.coeffs) / dt;
    for (int tr = 0; tr < mt.num_triangles(); ++tr) {
      double area = mt.triangle_area(tr);
      const auto& rtri = mesh.triangles[tr];
      for (int q = 0; q < nq; ++q) {
        Vec3 bary;
        double w;
        triangle_quadrature(2, q, &bary, &w);
        Vec2 x_ref = bary[0] * mesh.vertices[rtri[0]] + bary[1] * mesh.vertices[rtri[1]] +
                     bary[2] * mesh.vertices[rtri[2]];
        Vec2 V = map.velocity_current(x_ref, 0.2);
        Vec2 comparator = eval_vector(a.v_s, tr, bary) +
                          eval_vector_gradient(a.u_s, tr, bary) * V;
        Vec2 diff = eval_vector(quotient, tr, bary) - comparator;
        err2 += w * area * diff.squaredNorm();
        norm2 += w * area * comparator.squaredNorm();
      }
    }
    return std::sqrt(err2 / norm2);
  };
  double coarse = quotient_error(0.1);
  double fine = quotient_error(0.05);
  CHECK(fine < coarse);
  CHECK(fine < 0.1);
}

TEST_CASE("height flux residual: zero state, rigid motion and explicit update") {
  Mesh mesh = unit_square(12);
  DeformationMap still = DeformationMap::identity();
  MaterialParams mp;

  SlabState zero;
  zero.t = 0.0;
  zero.mesh = std::make_shared<const Mesh>(deform_mesh(mesh, still, 0.0));
  zero.v_s = make_field(*zero.mesh, FieldRank::Vector2, 2);
  zero.p = make_field(*zero.mesh, FieldRank::Scalar, 1);
  zero.phi_s = make_field(*zero.mesh, FieldRank::Scalar, 1);
  HeightFluxResidual r0 = height_flux_residual(zero, mp, still, 0.0);
  CHECK(r0.norm_max == doctest::Approx(0.0));

  const double V = 0.4;
  DeformationMap rising = graph_map(V, 1.0);
  SlabState state;
  state.t = 0.3;
  state.mesh = std::make_shared<const Mesh>(deform_mesh(mesh, rising, 0.3));
  state.v_s = interpolate(*state.mesh, 2, std::function<Vec2(const Vec2&)>(
                                              [V](const Vec2&) { return Vec2(0.0, V); }));
  state.p = make_field(*state.mesh, FieldRank::Scalar, 1);
  state.phi_s = make_field(*state.mesh, FieldRank::Scalar, 1);
  HeightFluxResidual r1 = height_flux_residual(state, mp, rising, 0.3);
  CHECK(r1.norm_max < 1e-10);

  // Explicit update: uniform upward flow raises every column by dt * V
  // (the column rate is -v2 at the bottom = -V, so h grows).
  std::vector<double> h(state.mesh_t().grid_nx + 1, 1.12);
  HeightUpdate up = height_explicit_update(h, state, mp, 0.05, 1.0, true);
  CHECK(up.dt_used == doctest::Approx(0.05));
  for (double hv : up.h_next) CHECK(hv == doctest::Approx(1.12 + 0.05 * V));

  // CFL guard limits the step so columns move at most 0.1 h_floor.
  HeightUpdate guarded = height_explicit_update(h, state, mp, 10.0, 0.01, true);
  CHECK(guarded.dt_used < 10.0);
  CHECK(guarded.dt_used * V <= 0.1 * 0.01 + 1e-15);

  CHECK_THROWS_AS(height_explicit_update(h, state, mp, 0.05, 1.0, false), InvalidInput);
}

TEST_CASE("div-consistency diagnostic converges under refinement") {
  // The dilatation rate feeds the mechanics only through the pressure rate,
  // so div(v_s) - e' tends to a finite model gap; the diagnostic must
  // stabilize rather than wander.
  double values[2];
  int meshes[2] = {12, 24};
  for (int k = 0; k < 2; ++k) {
    Mesh mesh = unit_square(meshes[k]);
    DeformationMap map = graph_map(0.1, 1.0);
    CoupledModel model = make_moving_model(mesh, map);
    SlabState s0 = initial_slab(model);
    SlabState s1 = solve_time_slab(model, s0, 0.1);
    values[k] = s1.div_consistency;
  }
  CHECK(std::isfinite(values[0]));
  CHECK(std::abs(values[1] - values[0]) < 0.05 * values[0]);
}

TEST_CASE("sweep aborts when the fluid velocity blatantly violates the regime") {
  // A fast osmotic ramp produces fluid velocities whose divergence rivals
  // the reaction threshold; the first sweep must refuse.
  Mesh mesh = unit_square(12);
  DeformationMap map = graph_map(0.1, 1.0);
  CoupledModel model = make_moving_model(mesh, map);
  model.mp.pi_ext = Expr::parse("2 + 8*t");  // violent drive
  CHECK_THROWS_AS(initial_slab(model), SlabFailure);
}
