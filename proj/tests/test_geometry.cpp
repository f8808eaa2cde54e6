#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "biofilm/deformation.hpp"
#include "biofilm/expression.hpp"
#include "biofilm/mesh.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace biofilm;

namespace {

DeformationMap vertical_stretch(double t_max = 4.0) {
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

}  // namespace

TEST_CASE("expression parse, eval and symbolic derivative") {
  Expr e = Expr::parse("sin(pi*x1) * (1 + 0.2*t) - x2/2");
  CHECK(e.eval(0.5, 1.0, 0.0) == doctest::Approx(1.0 - 0.5));
  Expr dt = e.derivative("t");
  CHECK(dt.eval(0.5, 3.0, 9.0) == doctest::Approx(0.2));
  Expr dx = e.derivative("x1");
  CHECK(dx.eval(0.25, 0.0, 0.0) ==
        doctest::Approx(M_PI * std::cos(M_PI * 0.25)));

  double v;
  CHECK(Expr::parse("2*3 + exp(0)").is_constant(&v));
  CHECK(v == doctest::Approx(7.0));

  // Canonical form re-parses to the same values.
  Expr round = Expr::parse(e.str());
  CHECK(round.eval(0.3, 0.7, 1.1) == doctest::Approx(e.eval(0.3, 0.7, 1.1)));

  CHECK_THROWS_AS(Expr::parse("sin(x1"), InvalidInput);
  CHECK_THROWS_AS(Expr::parse("bogus(x1)"), InvalidInput);
  CHECK_THROWS_AS(Expr::parse("x1 +"), InvalidInput);
}

TEST_CASE("random expression trees survive the canonical round trip") {
  // Hand-rolled generator: random nested arithmetic over x1, x2, t.
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> lit(-3.0, 3.0);
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth == 0 || pick(rng) < 2) {
      switch (pick(rng) % 4) {
        case 0: return "x1";
        case 1: return "x2";
        case 2: return "t";
        default: {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6g", lit(rng));
          return std::string(buf[0] == '-' ? "(" : "") + buf + (buf[0] == '-' ? ")" : "");
        }
      }
    }
    switch (pick(rng)) {
      case 0: return "(" + gen(depth - 1) + "+" + gen(depth - 1) + ")";
      case 1: return "(" + gen(depth - 1) + "-" + gen(depth - 1) + ")";
      case 2: case 3: return "(" + gen(depth - 1) + "*" + gen(depth - 1) + ")";
      case 4: return "sin(" + gen(depth - 1) + ")";
      case 5: return "cos(" + gen(depth - 1) + ")";
      case 6: return "(" + gen(depth - 1) + "/(2+cos(" + gen(depth - 1) + ")))";
      default: return "(-" + gen(depth - 1) + ")";
    }
  };
  std::uniform_real_distribution<double> pt(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text = gen(3);
    Expr e = Expr::parse(text);
    Expr round = Expr::parse(e.str());
    for (int s = 0; s < 4; ++s) {
      double x1 = pt(rng), x2 = pt(rng), t = pt(rng);
      double v = e.eval(x1, x2, t);
      CHECK(round.eval(x1, x2, t) == doctest::Approx(v).epsilon(1e-12));
    }
    // Symbolic derivative against a central difference.
    Expr dt = e.derivative("t");
    double x1 = pt(rng), x2 = pt(rng), t = pt(rng);
    const double h = 1e-6;
    double fd = (e.eval(x1, x2, t + h) - e.eval(x1, x2, t - h)) / (2.0 * h);
    double scale = 1.0 + std::abs(fd);
    CHECK(std::abs(dt.eval(x1, x2, t) - fd) < 1e-5 * scale);
  }
}

TEST_CASE("strip mesh: structured counts and tags") {
  Mesh mesh = build_strip_mesh(1.0, [](double) { return 1.0; }, 2, 2);
  CHECK(mesh.num_vertices() == 9);
  CHECK(mesh.num_triangles() == 8);
  int top = 0, bottom = 0;
  for (const auto& f : mesh.facets) {
    if (f.tag == BoundaryTag::GammaPlus) ++top;
    if (f.tag == BoundaryTag::GammaMinus) ++bottom;
  }
  CHECK(top == 2);
  CHECK(bottom == 6);  // bottom plus clamped laterals
  CHECK(mesh.total_area() == doctest::Approx(1.0));
}

TEST_CASE("strip mesh rejects non-positive height profiles") {
  CHECK_THROWS_AS(build_strip_mesh(1.0, [](double x) { return 0.5 - x; }, 4, 4), InvalidInput);
  CHECK_THROWS_AS(build_strip_mesh(-1.0, [](double) { return 1.0; }, 4, 4), InvalidInput);
  CHECK_THROWS_AS(build_strip_mesh(1.0, [](double) { return 1.0; }, 1, 4), InvalidInput);
}

TEST_CASE("structured 64x64 triangles keep quality above 0.4") {
  Mesh mesh = build_strip_mesh(1.0, [](double) { return 1.0; }, 64, 64);
  CHECK(min_triangle_quality(mesh) > 0.4);
}

TEST_CASE("jacobian: identity and diagonal closed forms") {
  DeformationMap id = DeformationMap::identity();
  JacobianData jd = id.jacobian_at(Vec2(0.3, 0.4), 0.7);
  CHECK(jd.J.isApprox(Mat2::Identity()));
  CHECK(jd.detJ == doctest::Approx(1.0));
  CHECK(jd.map_velocity.norm() == doctest::Approx(0.0));

  DeformationMap stretch = vertical_stretch();
  JacobianData s = stretch.jacobian_at(Vec2(0.5, 0.5), 0.5);
  CHECK(s.J(0, 0) == doctest::Approx(1.0));
  CHECK(s.J(1, 1) == doctest::Approx(1.5));
  CHECK(s.detJ == doctest::Approx(1.5));
  CHECK(s.Jinv(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK((s.J * s.Jinv).isApprox(Mat2::Identity(), 1e-12));
}

TEST_CASE("graph-height jacobian against a finite-difference oracle") {
  Expr h = Expr::parse("(1 + 0.5*x1*(1-x1)) * (1 + t)");
  Expr h0 = Expr::parse("1 + 0.5*x1*(1-x1)");
  DeformationMap map = DeformationMap::graph_height_expr(h, h0, 1.0, 0.05, 1.0);

  const double t = 0.37;
  const double delta = 1e-6;
  for (Vec2 x : {Vec2(0.21, 0.43), Vec2(0.8, 0.9), Vec2(0.5, 0.05)}) {
    JacobianData jd = map.jacobian_at(x, t);
    CHECK(jd.detJ == doctest::Approx(1.0 + t).epsilon(1e-12));
    for (int j = 0; j < 2; ++j) {
      Vec2 dx = Vec2::Zero();
      dx[j] = delta;
      Vec2 diff = (map.map(x + dx, t) - map.map(x - dx, t)) / (2.0 * delta);
      CHECK(std::abs(diff.x() - jd.J(0, j)) < 1e-8);
      CHECK(std::abs(diff.y() - jd.J(1, j)) < 1e-8);
    }
    Vec2 vel = (map.map(x, t + delta) - map.map(x, t - delta)) / (2.0 * delta);
    CHECK((vel - jd.map_velocity).norm() < 1e-8);
  }
}

TEST_CASE("surface dilation closed forms and first-order expansion") {
  DeformationMap id = DeformationMap::identity();
  CHECK(id.surface_dilation(Vec2(0.5, 1.0), Vec2(0, 1), 0.3) == doctest::Approx(1.0));

  DeformationMap stretch = vertical_stretch();
  // Vertical stretch preserves the length of horizontal edges.
  CHECK(stretch.surface_dilation(Vec2(0.5, 1.0), Vec2(0, 1), 0.5) == doctest::Approx(1.0));

  // |dilation - (1 + t div_G nu)| = O(t^2) for a generic smooth field (the
  // normal-tangential coupling d nu2/d x1 must not vanish or the expansion
  // is exact and the remainder is pure roundoff).
  auto nu = [](const Vec2& x) {
    return Vec2(0.3 * std::sin(x.y()), 0.25 * x.y() * x.y() + 0.2 * std::sin(x.x()));
  };
  auto grad_nu = [](const Vec2& x) {
    Mat2 g;
    g << 0.0, 0.3 * std::cos(x.y()), 0.2 * std::cos(x.x()), 0.5 * x.y();
    return g;
  };
  DeformationMap map = DeformationMap::linear_field(
      nu, grad_nu, 1.0, [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0);
  Vec2 x(0.4, 1.0), n(0, 1);
  Mat2 g = grad_nu(x);
  double div_gamma = g.trace() - n.dot(g * n);
  double prev_ratio = 0.0;
  for (int k = 0; k < 3; ++k) {
    double t = std::pow(10.0, -(k + 1));
    double rem = std::abs(map.surface_dilation(x, n, t) - 1.0 - t * div_gamma);
    double ratio = rem / (t * t);
    if (k > 0) CHECK(ratio == doctest::Approx(prev_ratio).epsilon(0.2));
    prev_ratio = ratio;
  }
}

TEST_CASE("deform_mesh maps vertices, preserves tags, detects inversion") {
  Mesh mesh = build_strip_mesh(1.0, [](double) { return 1.0; }, 8, 8);

  DeformationMap id = DeformationMap::identity();
  Mesh same = deform_mesh(mesh, id, 0.0);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    CHECK((same.vertices[v] - mesh.vertices[v]).norm() == doctest::Approx(0.0));

  DeformationMap stretch = vertical_stretch();
  Mesh doubled = deform_mesh(mesh, stretch, 1.0);
  for (int t = 0; t < mesh.num_triangles(); ++t)
    CHECK(doubled.triangle_area(t) == doctest::Approx(2.0 * mesh.triangle_area(t)));
  CHECK(doubled.facets.size() == mesh.facets.size());

  Expr h = Expr::parse("1 + 0.1*t*sin(pi*x1)");
  DeformationMap graph = DeformationMap::graph_height_expr(h, Expr::parse("1"), 1.0, 0.05, 2.0);
  Mesh moved = deform_mesh(mesh, graph, 1.0);
  for (const auto& f : moved.facets) {
    if (f.tag != BoundaryTag::GammaPlus) continue;
    for (int v : {f.a, f.b}) {
      double x1 = moved.vertices[v].x();
      CHECK(moved.vertices[v].y() ==
            doctest::Approx(1.0 + 0.1 * std::sin(M_PI * x1)).epsilon(1e-14));
    }
  }
}

TEST_CASE("deformed area equals the Jacobian integral for affine maps") {
  Mesh mesh = build_strip_mesh(1.0, [](double) { return 1.0; }, 16, 16);
  auto nu = [](const Vec2& x) { return Vec2(0.2 * x.x() + 0.1 * x.y(), 0.3 * x.y()); };
  auto grad_nu = [](const Vec2&) {
    Mat2 g;
    g << 0.2, 0.1, 0.0, 0.3;
    return g;
  };
  DeformationMap map = DeformationMap::linear_field(
      nu, grad_nu, 1.0, [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0);
  double t = 0.8;
  Mesh moved = deform_mesh(mesh, map, t);
  double integral = 0.0;
  for (int tr = 0; tr < mesh.num_triangles(); ++tr)
    integral += mesh.triangle_area(tr) * map.jacobian_at(Vec2(0, 0), t).detJ;
  CHECK(std::abs(moved.total_area() - integral) < 1e-10);
}

TEST_CASE("boundary normals: bottom, flat top, unit-slope top") {
  Mesh flat = build_strip_mesh(1.0, [](double) { return 1.0; }, 4, 4);
  for (const auto& f : flat.facets) {
    bool bottom = flat.vertices[f.a].y() == 0.0 && flat.vertices[f.b].y() == 0.0;
    if (bottom) CHECK((boundary_normal(flat, f) - Vec2(0, -1)).norm() < 1e-14);
    if (f.tag == BoundaryTag::GammaPlus)
      CHECK((boundary_normal(flat, f) - Vec2(0, 1)).norm() < 1e-14);
  }

  Mesh sloped = build_strip_mesh(1.0, [](double x) { return 1.0 + x; }, 4, 4);
  for (const auto& f : sloped.facets) {
    if (f.tag != BoundaryTag::GammaPlus) continue;
    Vec2 n = boundary_normal(sloped, f);
    CHECK((n - Vec2(-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))).norm() < 1e-12);
  }
}

TEST_CASE("t_max is found by bisection, never trusted from the caller") {
  // nu = (0, -x2) inverts the strip at t = 1.
  DeformationMap map = DeformationMap::linear_field(
      [](const Vec2& x) { return Vec2(0.0, -x.y()); },
      [](const Vec2&) {
        Mat2 g;
        g << 0, 0, 0, -1;
        return g;
      },
      1.0, [](double) { return 1.0; }, [](double) { return 0.0; }, 5.0);
  CHECK(map.t_max() > 0.9);
  CHECK(map.t_max() < 1.0);
  CHECK_THROWS_AS(map.map(Vec2(0.5, 0.5), 2.0), InvalidInput);
}

TEST_CASE("graph-height map keeps the precursor layer above its floor") {
  Expr h = Expr::parse("1 - 0.5*t");
  DeformationMap map = DeformationMap::graph_height_expr(h, Expr::parse("1"), 1.0, 0.6, 3.0);
  // h reaches the 0.6 floor at t = 0.8.
  CHECK(map.t_max() < 0.81);
  CHECK(map.t_max() > 0.75);
}

TEST_CASE("top frame matches the analytic graph normal") {
  Expr h = Expr::parse("1 + 0.2*t*sin(pi*x1)");
  DeformationMap map = DeformationMap::graph_height_expr(h, Expr::parse("1"), 1.0, 0.05, 2.0);
  double t = 1.0, x1 = 0.3;
  double slope = 0.2 * M_PI * std::cos(M_PI * x1);
  SurfaceFrame frame = map.top_frame(x1, t);
  double s = std::sqrt(1.0 + slope * slope);
  CHECK(frame.normal.x() == doctest::Approx(-slope / s));
  CHECK(frame.normal.y() == doctest::Approx(1.0 / s));
  // dn/dx1 against a finite difference of the analytic normal.
  double dx = 1e-6;
  SurfaceFrame fp = map.top_frame(x1 + dx, t), fm = map.top_frame(x1 - dx, t);
  Vec2 fd = (fp.normal - fm.normal) / (2.0 * dx);
  CHECK((fd - frame.dnormal_dx1).norm() < 1e-7);
}
