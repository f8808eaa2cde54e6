#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "biofilm/concentration.hpp"
#include "biofilm/volume_fraction.hpp"

#include <cmath>
#include <random>

using namespace biofilm;

namespace {

Mesh unit_square(int n, BoundaryTag lateral = BoundaryTag::GammaMinus) {
  return build_strip_mesh(1.0, [](double) { return 1.0; }, n, n, lateral);
}

Field contracting_field(const Mesh& mesh, double beta) {
  return interpolate(mesh, 2, std::function<Vec2(const Vec2&)>([beta](const Vec2& x) {
                       return Vec2(-beta * x.x(), -beta * x.y());
                     }));
}

}  // namespace

TEST_CASE("admissibility: zero, contracting and outflow fields") {
  Mesh mesh = unit_square(12);
  MaterialParams mp;  // k_s g_s = 1
  Field zero = make_field(mesh, FieldRank::Vector2, 2);
  AdmissibilityReport rep = check_admissibility(mesh, zero, mp);
  CHECK(rep.admissible);
  CHECK(rep.max_div == doctest::Approx(0.0));
  CHECK(rep.max_flux_normal == doctest::Approx(0.0));

  CHECK(check_admissibility(mesh, contracting_field(mesh, 0.2), mp).admissible);
  CHECK_FALSE(check_admissibility(mesh, contracting_field(mesh, 0.6), mp).admissible);

  Field outflow = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>(
                                           [](const Vec2&) { return Vec2(1.0, 0.0); }));
  AdmissibilityReport bad = check_admissibility(mesh, outflow, mp);
  CHECK_FALSE(bad.admissible);
  CHECK(bad.max_flux_normal == doctest::Approx(1.0));
}

TEST_CASE("regularized fraction: saturated state and closed-form constant") {
  Mesh mesh = unit_square(16);
  MaterialParams mp;
  Field zero = make_field(mesh, FieldRank::Vector2, 2);
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    Field phi = solve_fraction_regularized(mesh, zero, mp, eps);
    CHECK((phi.coeffs.array() - 1.0).abs().maxCoeff() < 1e-12);
  }

  const double beta = 0.1;
  Field v = contracting_field(mesh, beta);
  Field phi = solve_fraction_regularized(mesh, v, mp, 1e-6);
  double expected = 1.0 / (1.0 + 2.0 * beta);
  CHECK((phi.coeffs.array() - expected).abs().maxCoeff() < 1e-4);
}

TEST_CASE("regularized fraction rejects inadmissible input unless forced") {
  Mesh mesh = unit_square(8);
  MaterialParams mp;
  Field outflow = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>(
                                           [](const Vec2&) { return Vec2(0.5, 0.0); }));
  CHECK_THROWS_AS(solve_fraction_regularized(mesh, outflow, mp, 1e-4), InvalidInput);
  CHECK_NOTHROW(solve_fraction_regularized(mesh, outflow, mp, 1e-4, true));
}

TEST_CASE("fraction continuation: convergence, bounds and gradient estimate") {
  Mesh mesh = unit_square(24);
  MaterialParams mp;
  Field zero = make_field(mesh, FieldRank::Vector2, 2);
  auto [phi0, d0] = solve_fraction(mesh, zero, mp, 1e-8);
  CHECK((phi0.coeffs.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(d0.cauchy_diffs.front() < 1e-8);  // converges immediately

  Field v = contracting_field(mesh, 0.15);
  auto [phi, diag] = solve_fraction(mesh, v, mp, 1e-9);
  CHECK(diag.min_phi >= -1e-8);
  CHECK(diag.max_phi <= 1.0 + 1e-8);
  for (size_t k = 1; k < diag.cauchy_diffs.size(); ++k)
    CHECK(diag.cauchy_diffs[k] <= diag.cauchy_diffs[k - 1] + 1e-15);
  CHECK(diag.grad_phi_l2 <= 2.0 * diag.grad_div_vf_l2 + 1e-6);

  // phi_f does not vanish on sets of positive measure: elemental averages.
  const Vec3 center(1.0 / 3, 1.0 / 3, 1.0 / 3);
  for (int t = 0; t < mesh.num_triangles(); ++t)
    CHECK(eval_scalar(phi, t, center) > 0.0);
}

TEST_CASE("uniqueness proxy: continuations from eps0 and eps0/2 agree") {
  Mesh mesh = unit_square(16);
  MaterialParams mp;
  Field v = contracting_field(mesh, 0.12);
  const double tol = 1e-9;
  auto [phi1, d1] = solve_fraction(mesh, v, mp, tol);
  auto [phi2, d2] = solve_fraction(mesh, v, mp, tol, false, nullptr, 0.5);
  CHECK(l2_diff(mesh, phi1, phi2) < 10.0 * tol);
}

TEST_CASE("thin-domain gradient bound in L4") {
  // Aspect ratio 4 strip with a vertically varying contraction.
  Mesh mesh = build_strip_mesh(4.0, [](double) { return 1.0; }, 64, 16);
  MaterialParams mp;
  const double beta = 0.1, gamma = 0.05;
  Field v = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>([=](const Vec2& x) {
                          return Vec2(-beta * x.x(), -beta * x.y() - gamma * x.y() * x.y());
                        }));
  auto [phi, diag] = solve_fraction(mesh, v, mp, 1e-9);
  CHECK(diag.admissibility.admissible);
  CHECK(diag.grad_phi_l4 <= 2.0 * diag.grad_div_vf_l4 + 1e-6);
}

TEST_CASE("solid fraction complements the fluid fraction") {
  Mesh mesh = unit_square(6);
  Field phi_f = interpolate(mesh, 1, std::function<double(const Vec2&)>(
                                         [](const Vec2& x) { return 0.8 - 0.1 * x.y(); }));
  Field phi_s = solid_fraction(phi_f);
  for (int n = 0; n < phi_f.num_nodes(); ++n)
    CHECK(phi_s.coeffs[n] + phi_f.coeffs[n] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("coercivity margin formula and refusal") {
  Mesh mesh = unit_square(8);
  MaterialParams mp;
  mp.d = 1.0;
  Field v = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>(
                                     [](const Vec2&) { return Vec2(0.1, 0.0); }));
  double diam = std::sqrt(2.0);
  CHECK(coercivity_margin(mesh, v, mp) == doctest::Approx(1.0 - diam * 0.1));

  MaterialParams small = mp;
  small.d = 0.1;
  Field fast = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>(
                                        [](const Vec2&) { return Vec2(0.2, 0.0); }));
  Field phi0 = make_field(mesh, FieldRank::Scalar, 1);
  CHECK(coercivity_margin(mesh, fast, small) < 0.0);
  CHECK_THROWS_AS(solve_concentration(mesh, fast, phi0, small), InvalidInput);
}

TEST_CASE("concentration: trivial state and column closed form at mid-height") {
  MaterialParams mp;
  mp.d = 1.0;
  mp.c0 = 1.0;
  {
    Mesh mesh = unit_square(10);
    Field v0 = make_field(mesh, FieldRank::Vector2, 2);
    Field phi0 = make_field(mesh, FieldRank::Scalar, 1);
    ConcentrationResult res = solve_concentration(mesh, v0, phi0, mp);
    CHECK((res.c.coeffs.array() - mp.c0).abs().maxCoeff() < 1e-12);
  }
  {
    Mesh mesh = unit_square(32, BoundaryTag::GammaPlus);
    Field v0 = make_field(mesh, FieldRank::Vector2, 2);
    Field phi1 = make_field(mesh, FieldRank::Scalar, 1);
    phi1.coeffs.array() += 1.0;
    ConcentrationResult res = solve_concentration(mesh, v0, phi1, mp);
    double kcgc = mp.k_c * mp.g_c;
    // c(x2) = c0 + (k_c g_c / d)(x2^2/2 - x2) at mid-height.
    double expected = mp.c0 + (kcgc / mp.d) * (0.125 - 0.5);
    int node = -1;
    for (int n = 0; n < res.c.num_nodes(); ++n) {
      Vec2 x = mesh.node_position(1, n);
      if (std::abs(x.x() - 0.5) < 1e-12 && std::abs(x.y() - 0.5) < 1e-12) node = n;
    }
    REQUIRE(node >= 0);
    CHECK(std::abs(res.c.coeffs[node] - expected) < 5e-4);
  }
}

TEST_CASE("concentration: determinism, superposition and boundary contracts") {
  MaterialParams mp;
  mp.d = 2.0;
  mp.c0 = 0.8;
  Mesh mesh = unit_square(12);
  Field v = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>([](const Vec2& x) {
                          return Vec2(0.05 * x.y(), -0.05 * x.x());
                        }));
  Field phi = interpolate(mesh, 1, std::function<double(const Vec2&)>(
                                       [](const Vec2& x) { return 0.3 * x.y(); }));
  ConcentrationResult a = solve_concentration(mesh, v, phi, mp);
  ConcentrationResult b = solve_concentration(mesh, v, phi, mp);
  for (Eigen::Index k = 0; k < a.c.coeffs.size(); ++k) CHECK(a.c.coeffs[k] == b.c.coeffs[k]);

  // Doubling (phi_s, c0) doubles c.
  MaterialParams mp2 = mp;
  mp2.c0 = 2.0 * mp.c0;
  Field phi2 = phi;
  phi2.coeffs *= 2.0;
  ConcentrationResult d2 = solve_concentration(mesh, v, phi2, mp2);
  CHECK((d2.c.coeffs - 2.0 * a.c.coeffs).cwiseAbs().maxCoeff() <
        1e-10 * (1.0 + linf_norm(d2.c)));

  // GammaMinus trace is exactly c0.
  for (const auto& f : mesh.facets) {
    if (f.tag != BoundaryTag::GammaMinus) continue;
    CHECK(a.c.coeffs[f.a] == doctest::Approx(mp.c0).epsilon(1e-14));
    CHECK(a.c.coeffs[f.b] == doctest::Approx(mp.c0).epsilon(1e-14));
  }
}

TEST_CASE("discrete no-flux residual vanishes on the top test functions") {
  // The natural condition is encoded weakly: the solved system's residual
  // on rows of GammaPlus nodes is at solver tolerance.
  MaterialParams mp;
  mp.d = 1.5;
  mp.c0 = 0.9;
  Mesh mesh = build_strip_mesh(1.0, [](double) { return 1.0; }, 12, 12, BoundaryTag::GammaPlus);
  Field v = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>([](const Vec2& x) {
                          return Vec2(0.02 * x.y(), -0.02 * x.x());
                        }));
  Field phi = make_field(mesh, FieldRank::Scalar, 1);
  phi.coeffs.array() += 0.4;

  ScalarFormOptions opt;
  opt.convection_form = ConvectionForm::Adjoint;
  const Field* vf = &v;
  RobinTerm robin;
  robin.where = BoundarySelector::GammaPlus;
  robin.beta = [vf](const Facet& f, int, const Vec2& x, const Vec2& n) {
    return eval_vector(*vf, f.tri, barycentric_coords(*vf->mesh, f.tri, x)).dot(n);
  };
  opt.robin = robin;
  double c0 = mp.c0;
  VectorCoeff vcoeff = field_vector_coeff(v);
  opt.grad_source = [vcoeff, c0](int tri, const Vec2& x) { return Vec2(c0 * vcoeff(tri, x)); };
  VectorCoeff minus_v = [vcoeff](int tri, const Vec2& x) { return Vec2(-vcoeff(tri, x)); };
  ScalarCoeff phis = field_coeff(phi);
  double kcgc = mp.k_c * mp.g_c;
  ScalarCoeff f = [phis, kcgc](int tri, const Vec2& x) { return -kcgc * phis(tri, x); };
  SparseSystem sys = assemble_scalar(mesh, 1, constant_coeff(Mat2(mp.d * Mat2::Identity())),
                                     minus_v, nullptr, f, opt);
  apply_dirichlet(sys, mesh, BoundarySelector::GammaMinus, 0.0);
  VecX ct = solve(sys);
  VecX residual = sys.rhs - sys.matrix * ct;
  double scale = sys.rhs.norm();
  for (const auto& fc : mesh.facets) {
    if (fc.tag != BoundaryTag::GammaPlus) continue;
    CHECK(std::abs(residual[fc.a]) < 1e-8 * scale);
    CHECK(std::abs(residual[fc.b]) < 1e-8 * scale);
  }
}

TEST_CASE("concentration superposition over random data (property)") {
  MaterialParams mp;
  mp.d = 3.0;
  Mesh mesh = unit_square(10);
  Field v = interpolate(mesh, 2, std::function<Vec2(const Vec2&)>([](const Vec2& x) {
                          return Vec2(0.03 * std::sin(x.y()), -0.03 * x.x());
                        }));
  std::mt19937 rng(4242);
  std::normal_distribution<double> dist(0.0, 0.3);
  for (int trial = 0; trial < 4; ++trial) {
    Field phi1 = make_field(mesh, FieldRank::Scalar, 1);
    Field phi2 = make_field(mesh, FieldRank::Scalar, 1);
    for (int n = 0; n < phi1.num_nodes(); ++n) {
      phi1.coeffs[n] = 0.5 + dist(rng);
      phi2.coeffs[n] = 0.5 + dist(rng);
    }
    double c1 = 1.0 + std::abs(dist(rng)), c2 = 1.0 + std::abs(dist(rng));
    MaterialParams m1 = mp, m2 = mp, m12 = mp;
    m1.c0 = c1;
    m2.c0 = c2;
    m12.c0 = c1 + c2;
    Field phi12 = phi1;
    phi12.coeffs += phi2.coeffs;
    VecX sum = solve_concentration(mesh, v, phi1, m1).c.coeffs +
               solve_concentration(mesh, v, phi2, m2).c.coeffs;
    VecX combined = solve_concentration(mesh, v, phi12, m12).c.coeffs;
    CHECK((sum - combined).cwiseAbs().maxCoeff() <
          1e-10 * (1.0 + combined.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("live Monod mode relinearizes five times with shrinking updates") {
  MaterialParams mp;
  mp.monod_mode = MonodMode::Live;
  mp.d = 2.0;
  mp.c0 = 1.0;
  mp.K_c = 0.5;
  Mesh mesh = unit_square(12, BoundaryTag::GammaPlus);
  Field v0 = make_field(mesh, FieldRank::Vector2, 2);
  Field phi1 = make_field(mesh, FieldRank::Scalar, 1);
  phi1.coeffs.array() += 1.0;
  ConcentrationResult res = solve_concentration(mesh, v0, phi1, mp);
  REQUIRE(res.live_changes.size() == 5);
  CHECK(res.live_changes.back() < res.live_changes.front());
  CHECK(res.live_changes.back() < 1e-3);
  CHECK(res.min_nodal >= -1e-8 * mp.c0);
}
