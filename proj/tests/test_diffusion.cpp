#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "biofilm/moving_diffusion.hpp"

#include <cmath>
#include <random>

using namespace biofilm;

namespace {

Mesh unit_square(int n) { return build_strip_mesh(1.0, [](double) { return 1.0; }, n, n); }

DeformationMap stretch_map(double t_max = 4.0) {
  // nu = (0, x2)
  return DeformationMap::linear_field(
      [](const Vec2& x) { return Vec2(0.0, x.y()); },
      [](const Vec2&) {
        Mat2 g;
        g << 0, 0, 0, 1;
        return g;
      },
      1.0, [](double) { return 1.0; }, [](double) { return 0.0; }, t_max);
}

DeformationMap graph_map(double rate, double t_max) {
  std::ostringstream os;
  os << "1 + " << rate << "*t";
  return DeformationMap::graph_height_expr(Expr::parse(os.str()), Expr::parse("1"), 1.0, 0.05,
                                           t_max);
}

}  // namespace

TEST_CASE("pullback coefficients: identity map and vertical stretch closed form") {
  const double kappa = 2.5;
  DeformationMap id = DeformationMap::identity();
  PullbackCoefficients c0 = pullback_coefficients(id, kappa, nullptr, 0.7);
  Vec2 x(0.3, 0.6);
  CHECK(c0.A(0, x).isApprox(Mat2(kappa * Mat2::Identity())));
  CHECK(c0.b(0, x).norm() == doctest::Approx(0.0));
  CHECK(c0.c(0, x) == doctest::Approx(1.0));

  DeformationMap st = stretch_map();
  const double t = 0.8;
  PullbackCoefficients cs = pullback_coefficients(st, kappa, nullptr, t);
  Mat2 A = cs.A(0, x);
  CHECK(A(0, 0) == doctest::Approx(kappa * (1.0 + t)));
  CHECK(A(1, 1) == doctest::Approx(kappa / (1.0 + t)));
  CHECK(A(0, 1) == doctest::Approx(0.0));
  Vec2 b = cs.b(0, x);
  CHECK(b.x() == doctest::Approx(0.0));
  CHECK(b.y() == doctest::Approx(-x.y()));  // -(J^-1 nu) detJ = -(0, x2)
  CHECK(cs.c(0, x) == doctest::Approx(1.0 + t));
}

TEST_CASE("pullback coefficients against a matrix-numeric oracle at random points") {
  const double kappa = 1.3, t = 0.41;
  DeformationMap map = graph_map(0.3, 1.0);
  PullbackCoefficients cs = pullback_coefficients(map, kappa, nullptr, t);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int k = 0; k < 5; ++k) {
    Vec2 x(unit(rng), unit(rng));
    JacobianData jd = map.jacobian_at(x, t);
    Mat2 expected_A = kappa * jd.detJ * (jd.J.transpose() * jd.J).inverse();
    CHECK(cs.A(0, x).isApprox(expected_A, 1e-12));
    Vec2 expected_b = -jd.detJ * (jd.Jinv * jd.map_velocity);
    CHECK((cs.b(0, x) - expected_b).norm() < 1e-12);
    CHECK(cs.c(0, x) == doctest::Approx(jd.detJ));
  }
}

TEST_CASE("pullback diffusion tensor stays positive definite") {
  const double kappa = 0.8;
  DeformationMap map = graph_map(0.4, 1.0);
  PullbackCoefficients cs = pullback_coefficients(map, kappa, nullptr, 0.9);
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  for (int k = 0; k < 100; ++k) {
    Vec2 x(unit(rng), unit(rng));
    JacobianData jd = map.jacobian_at(x, 0.9);
    Mat2 A = cs.A(0, x);
    Eigen::SelfAdjointEigenSolver<Mat2> eig(A);
    double bound = kappa * jd.detJ / jd.J.squaredNorm();
    CHECK(eig.eigenvalues().minCoeff() >= bound - 1e-13);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("homogenize shifts data and rejects spatial boundary values") {
  Mesh mesh = unit_square(6);
  Field e0 = interpolate(mesh, 1, std::function<double(const Vec2&)>(
                                      [](const Vec2& x) { return x.x() + 1.0; }));
  HomogenizedProblem hp = homogenize(e0, Expr::parse("2 + sin(t)"), nullptr);
  CHECK(hp.e0_shifted.coeffs[0] == doctest::Approx(e0.coeffs[0] - 2.0));
  CHECK(hp.source_shifted(Vec2(0, 0), 0.0) == doctest::Approx(-1.0));  // -g'(0) = -cos 0

  CHECK_THROWS_AS(homogenize(e0, Expr::parse("x1 + t"), nullptr), InvalidInput);
}

TEST_CASE("boundary value is reconstructed exactly for pure boundary driving") {
  // e0 = g(0), f = g'(t): the homogenized problem has zero data, so the
  // solution is identically g(t).
  Mesh mesh = unit_square(8);
  DeformationMap map = graph_map(0.2, 1.0);
  Expr g = Expr::parse("sin(t)");
  MovingDiffusionProblem prob;
  prob.mesh = &mesh;
  prob.map = &map;
  prob.kappa = 1.0;
  prob.source = [](const Vec2&, double t) { return std::cos(t); };
  prob.dirichlet = g;
  prob.e0 = make_field(mesh, FieldRank::Scalar, 1);  // g(0) = 0
  prob.T = 0.5;
  prob.dt = 0.1;
  DiffusionTrajectory traj = solve_moving_diffusion(prob);
  for (size_t i = 0; i < traj.times.size(); ++i) {
    double expected = std::sin(traj.times[i]);
    CHECK((traj.states[i].coeffs.array() - expected).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("step: zero data stays zero; fixed-domain path is bitwise identical") {
  Mesh mesh = unit_square(8);
  DeformationMap id = DeformationMap::identity();
  PullbackCoefficients pulled = pullback_coefficients(id, 1.7, nullptr, 0.0);
  Field u0 = make_field(mesh, FieldRank::Scalar, 1);
  Field u1 = step(mesh, pulled, pulled, u0, 0.05, 1.0);
  CHECK(linf_norm(u1) == doctest::Approx(0.0));

  // Hand-built identity coefficients give the same operators bitwise.
  PullbackCoefficients manual;
  manual.A = constant_coeff(Mat2(1.7 * Mat2::Identity()));
  manual.b = constant_coeff(Vec2(Vec2::Zero()));
  manual.c = constant_coeff(1.0);
  manual.f = nullptr;
  LevelOperators a = assemble_level(mesh, pulled);
  LevelOperators b = assemble_level(mesh, manual);
  REQUIRE(a.stiff.nonZeros() == b.stiff.nonZeros());
  for (Eigen::Index k = 0; k < a.stiff.nonZeros(); ++k)
    CHECK(a.stiff.valuePtr()[k] == b.stiff.valuePtr()[k]);
  for (Eigen::Index k = 0; k < a.mass.nonZeros(); ++k)
    CHECK(a.mass.valuePtr()[k] == b.mass.valuePtr()[k]);
}

TEST_CASE("constants are steady states on a moving domain") {
  Mesh mesh = unit_square(10);
  DeformationMap map = graph_map(0.25, 1.0);
  const double e_ext = 0.37;
  MovingDiffusionProblem prob;
  prob.mesh = &mesh;
  prob.map = &map;
  prob.kappa = 3.0;
  prob.dirichlet = Expr::constant(e_ext);
  prob.e0 = make_field(mesh, FieldRank::Scalar, 1);
  prob.e0.coeffs.array() += e_ext;
  prob.T = 0.8;
  prob.dt = 0.1;
  DiffusionTrajectory traj = solve_moving_diffusion(prob);
  for (const auto& state : traj.states)
    CHECK((state.coeffs.array() - e_ext).abs().maxCoeff() < 1e-12);
}

TEST_CASE("implicit Euler decays the weighted energy on an expanding domain") {
  Mesh mesh = unit_square(16);
  DeformationMap map = graph_map(0.3, 1.0);
  MovingDiffusionProblem prob;
  prob.mesh = &mesh;
  prob.map = &map;
  prob.kappa = 1.0;
  prob.dirichlet = Expr::constant(0.0);
  prob.e0 = interpolate(mesh, 1, std::function<double(const Vec2&)>([](const Vec2& x) {
                          return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
                        }));
  prob.T = 0.5;
  prob.dt = 0.05;
  prob.theta = 1.0;
  DiffusionTrajectory traj = solve_moving_diffusion(prob);
  for (size_t i = 1; i < traj.energy.size(); ++i)
    CHECK(traj.energy[i] <= traj.energy[i - 1] + 1e-10);
}

TEST_CASE("linearity: differenced data gives the differenced trajectory") {
  Mesh mesh = unit_square(10);
  DeformationMap map = graph_map(0.2, 1.0);
  auto run = [&](double amp, double src) {
    MovingDiffusionProblem prob;
    prob.mesh = &mesh;
    prob.map = &map;
    prob.kappa = 1.0;
    prob.dirichlet = Expr::constant(0.0);
    prob.source = [src](const Vec2& y, double) { return src * y.x(); };
    prob.e0 = interpolate(mesh, 1, std::function<double(const Vec2&)>([amp](const Vec2& x) {
                            return amp * std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
                          }));
    prob.T = 0.3;
    prob.dt = 0.05;
    return solve_moving_diffusion(prob);
  };
  DiffusionTrajectory a = run(1.0, 0.4);
  DiffusionTrajectory b = run(0.3, 0.1);
  DiffusionTrajectory d = run(0.7, 0.3);
  VecX diff = a.states.back().coeffs - b.states.back().coeffs - d.states.back().coeffs;
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-10 * (1.0 + linf_norm(a.states.back())));
}

TEST_CASE("nodal values stay below the data bound") {
  Mesh mesh = unit_square(12);
  DeformationMap map = graph_map(0.2, 1.0);
  MovingDiffusionProblem prob;
  prob.mesh = &mesh;
  prob.map = &map;
  prob.kappa = 1.0;
  prob.dirichlet = Expr::constant(0.0);
  prob.source = [](const Vec2&, double) { return 0.5; };
  prob.e0 = interpolate(mesh, 1, std::function<double(const Vec2&)>([](const Vec2& x) {
                          return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
                        }));
  prob.T = 0.5;
  prob.dt = 0.05;
  DiffusionTrajectory traj = solve_moving_diffusion(prob);
  const double c_min = 1.0;  // detJ >= 1 on the expanding strip
  double bound = 1.0 + prob.T * 0.5 / c_min + 1e-8;
  for (const auto& s : traj.states) CHECK(linf_norm(s) <= bound);
}

TEST_CASE("temporal orders for the pinned manufactured solution (one-sided)") {
  // Pulled back, sin(pi x1) x2 h(t) is linear in t, so theta = 1/2 is at
  // least second order here (measured above 2).
  Mesh mesh = unit_square(24);
  DeformationMap map = graph_map(0.2, 1.0);
  const double kappa = 1.0, T = 0.4;
  auto run = [&](double theta, double dt) {
    MovingDiffusionProblem prob;
    prob.mesh = &mesh;
    prob.map = &map;
    prob.kappa = kappa;
    prob.source = [kappa](const Vec2& y, double) {
      return kappa * M_PI * M_PI * std::sin(M_PI * y.x()) * y.y();
    };
    prob.dirichlet_ref = [&map](const Vec2& x_ref, double t) {
      Vec2 y = map.map(x_ref, t);
      return std::sin(M_PI * y.x()) * y.y();
    };
    prob.e0 = interpolate(mesh, 1, std::function<double(const Vec2&)>([](const Vec2& y) {
                            return std::sin(M_PI * y.x()) * y.y();
                          }));
    prob.T = T;
    prob.dt = dt;
    prob.theta = theta;
    return solve_moving_diffusion(prob);
  };
  for (double theta : {1.0, 0.5}) {
    DiffusionTrajectory ref = run(theta, 0.003125);
    double e1 = l2_diff(mesh, run(theta, 0.05).states.back(), ref.states.back());
    double e2 = l2_diff(mesh, run(theta, 0.025).states.back(), ref.states.back());
    double order = std::log2(e1 / e2);
    CHECK(order >= (theta == 1.0 ? 0.9 : 1.8));
  }
}

TEST_CASE("trajectory push-forward sampler tracks the moving mesh") {
  Mesh mesh = unit_square(6);
  DeformationMap map = graph_map(0.5, 1.0);
  MovingDiffusionProblem prob;
  prob.mesh = &mesh;
  prob.map = &map;
  prob.kappa = 1.0;
  prob.dirichlet = Expr::constant(0.0);
  prob.e0 = make_field(mesh, FieldRank::Scalar, 1);
  prob.T = 0.4;
  prob.dt = 0.2;
  DiffusionTrajectory traj = solve_moving_diffusion(prob);
  Mesh deformed = traj.deformed_at(static_cast<int>(traj.times.size()) - 1);
  double expected_height = 1.0 + 0.5 * traj.times.back();
  CHECK(deformed.bbox_max().y() == doctest::Approx(expected_height));
}
