#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "aeroimg/rng.hpp"
#include "aeroimg/scene.hpp"

using namespace aeroimg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Primitive disk(Point c, double r, double q) {
  Primitive p;
  p.shape = Shape::disk;
  p.center = c;
  p.radius = r;
  p.power = q;
  return p;
}

Primitive box(Point c, Point half, double q) {
  Primitive p;
  p.shape = Shape::box;
  p.center = c;
  p.half = half;
  p.power = q;
  return p;
}

Primitive annulus(Point c, double inner, double outer, double q) {
  Primitive p;
  p.shape = Shape::annulus;
  p.center = c;
  p.inner = inner;
  p.radius = outer;
  p.power = q;
  return p;
}

FocusGrid square_grid(int n, double h, Point origin) {
  FocusGrid g;
  g.origin = origin;
  g.nx = n;
  g.ny = n;
  g.spacing = h;
  return g;
}

}  // namespace

TEST_CASE("source power evaluation") {
  const Point c(0.0, 0.0, 0.5);
  SECTION("outside everything") {
    const SourceScene s({disk(c, 0.1, 2.0)}, 3);
    CHECK(q_eval(s, Point(1, 1, 1)) == 0.0);
  }
  SECTION("disk centre") {
    const SourceScene s({disk(c, 0.1, 2.0)}, 3);
    CHECK(q_eval(s, c) == 2.0);
  }
  SECTION("overlaps add") {
    const SourceScene s({disk(c, 0.1, 1.0), box(c, Point(0.05, 0.05, 0.05), 3.0)}, 3);
    CHECK(q_eval(s, c) == 4.0);
    CHECK(q_eval(s, c + Point(0.08, 0, 0)) == 1.0);
  }
  SECTION("gaussian is truncated") {
    Primitive g;
    g.shape = Shape::gaussian;
    g.center = c;
    g.sigma = 0.01;
    g.power = 1.0;
    const SourceScene s({g}, 3);
    CHECK_THAT(q_eval(s, c + Point(0.01, 0, 0)), WithinRel(std::exp(-0.5), 1e-15));
    CHECK(q_eval(s, c + Point(0.041, 0, 0)) == 0.0);
  }
  SECTION("empty scene") {
    const SourceScene s({}, 3);
    CHECK(q_eval(s, c) == 0.0);
  }
}

TEST_CASE("scene validation") {
  CHECK_THROWS_AS(SourceScene({disk(Point(0, 0, 1), -0.1, 1.0)}, 3), DomainError);
  CHECK_THROWS_AS(SourceScene({disk(Point(0, 0, 1), 0.1, -1.0)}, 3), DomainError);
  CHECK_THROWS_AS(SourceScene({annulus(Point(0, 0, 1), 0.2, 0.1, 1.0)}, 3), DomainError);
  CHECK_THROWS_AS(SourceScene({}, 4), DomainError);
}

TEST_CASE("support masks for a single disk") {
  const SourceScene s({disk(Point(0, 0, 0.5), 0.1, 1.0)}, 3);
  const FocusGrid g = square_grid(41, 0.01, Point(-0.2, -0.2, 0.5));
  const Mask inner = support_mask(s, g, SupportKind::inner);
  const Mask outer = support_mask(s, g, SupportKind::outer);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const size_t idx = g.index(i, j);
      const double r = (g.node(i, j) - Point(0, 0, 0.5)).norm();
      // Inner drops a one-cell boundary layer; outer is the disk itself.
      if (r <= 0.1 - 0.01 * std::sqrt(2.0) - 1e-12) CHECK(inner[idx]);
      if (r > 0.1 - 1e-12) CHECK_FALSE(inner[idx]);
      CHECK(outer[idx] == (r <= 0.1));
      if (inner[idx]) CHECK(outer[idx]);
    }
  }
}

TEST_CASE("empty scene has empty masks") {
  const SourceScene s({}, 3);
  const FocusGrid g = square_grid(10, 0.1, Point(0, 0, 1));
  for (auto kind : {SupportKind::inner, SupportKind::outer}) {
    const Mask m = support_mask(s, g, kind);
    CHECK(std::none_of(m.begin(), m.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("annulus: outer mask fills the hole, inner does not (64 x 64 flood fill oracle)") {
  const Point c(0.0, 0.0, 0.5);
  const double h = 1.0 / 63.0;
  const FocusGrid g = square_grid(64, h, Point(-0.5, -0.5, 0.5));
  const SourceScene s({annulus(c, 0.15, 0.3, 1.0)}, 3);
  const Mask outer = support_mask(s, g, SupportKind::outer);
  const Mask inner = support_mask(s, g, SupportKind::inner);

  // Independent oracle: depth-first fill of ring-free nodes from the border.
  const int n = 64;
  auto in_ring = [&](int i, int j) {
    const double r = (g.node(i, j) - c).norm();
    return r >= 0.15 && r <= 0.3;
  };
  std::vector<int> state(n * n, 0);  // 1 = reached from outside
  std::vector<std::pair<int, int>> stack;
  for (int k = 0; k < n; ++k) {
    for (auto [i, j] : {std::pair{k, 0}, std::pair{k, n - 1}, std::pair{0, k}, std::pair{n - 1, k}}) {
      stack.emplace_back(i, j);
    }
  }
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    if (i < 0 || j < 0 || i >= n || j >= n || state[j * n + i] || in_ring(i, j)) continue;
    state[j * n + i] = 1;
    stack.emplace_back(i + 1, j);
    stack.emplace_back(i - 1, j);
    stack.emplace_back(i, j + 1);
    stack.emplace_back(i, j - 1);
  }
  int hole_nodes = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const size_t idx = g.index(i, j);
      CHECK(outer[idx] == !state[j * n + i]);
      const double r = (g.node(i, j) - c).norm();
      if (r < 0.15) {
        ++hole_nodes;
        CHECK(outer[idx]);
        CHECK_FALSE(inner[idx]);
      }
    }
  }
  CHECK(hole_nodes > 100);
}

TEST_CASE("dilation grows by one node") {
  const FocusGrid g = square_grid(5, 1.0, Point(0, 0, 1));
  Mask m(g.size(), false);
  m[g.index(2, 2)] = true;
  const Mask d = dilate(m, g);
  CHECK(std::count(d.begin(), d.end(), true) == 9);
  m.assign(g.size(), false);
  m[g.index(0, 0)] = true;
  const Mask corner = dilate(m, g);
  CHECK(std::count(corner.begin(), corner.end(), true) == 4);
}

TEST_CASE("array construction") {
  SECTION("grid 2x2") {
    const auto a = make_grid_array(2, 2, 0.1, 3);
    CHECK(a.size() == 4);
    CHECK_THAT(a.min_separation(), WithinRel(0.1, 1e-14));
  }
  SECTION("spiral with 134 microphones") {
    const auto a = make_spiral_array(134, 0.5, 3.0);
    REQUIRE(a.size() == 134);
    std::set<std::pair<double, double>> seen;
    for (const auto& p : a.positions()) {
      CHECK(p[2] == 0.0);
      CHECK(p.head<2>().norm() <= 0.5);
      seen.insert({p[0], p[1]});
    }
    CHECK(seen.size() == 134);
    CHECK(a.min_separation() > 1e-3);
  }
  SECTION("2D line array") {
    const auto a = make_grid_array(5, 1, 0.05, 2);
    CHECK(a.size() == 5);
    for (const auto& p : a.positions()) CHECK(height(p, 2) == 0.0);
    CHECK_THROWS_AS(make_grid_array(5, 2, 0.05, 2), DomainError);
  }
  SECTION("duplicates and off-plane points are rejected") {
    CHECK_THROWS_AS(ArrayGeometry({Point(0, 0, 0), Point(0, 0, 0)}, 3), DomainError);
    CHECK_THROWS_AS(ArrayGeometry({Point(0, 0, 0.1)}, 3), DomainError);
  }
}

TEST_CASE("array files") {
  SECTION("comments, two and three columns") {
    std::istringstream in("# mics\n0 0\n0.1 0 0\n\n0 0.1\n");
    const auto a = parse_array(in, 3);
    CHECK(a.size() == 3);
    CHECK(a.positions()[2] == Point(0, 0.1, 0));
  }
  SECTION("off-plane row") {
    std::istringstream in("0 0 0\n0.1 0 0.2\n");
    CHECK_THROWS_AS(parse_array(in, 3), FormatError);
  }
  SECTION("garbage") {
    std::istringstream in("0 zero 0\n");
    CHECK_THROWS_AS(parse_array(in, 3), FormatError);
  }
  SECTION("2D rows") {
    std::istringstream in("0\n0.5 0\n");
    const auto a = parse_array(in, 2);
    CHECK(a.size() == 2);
    std::istringstream bad("0 0.1\n");
    CHECK_THROWS_AS(parse_array(bad, 2), FormatError);
  }
  SECTION("missing file") { CHECK_THROWS_AS(load_array("/nonexistent/array.txt", 3), FormatError); }
}

TEST_CASE("geometry validation") {
  const auto arr = make_grid_array(2, 2, 0.1, 3);
  SECTION("scene within [0.5, 1.0] above the array") {
    const SourceScene s({box(Point(0, 0, 0.75), Point(0.1, 0.1, 0.25), 1.0)}, 3);
    const auto r = validate_geometry(arr, s);
    CHECK(r.ok());
    CHECK_THAT(r.standoff, WithinAbs(0.5, 1e-15));
  }
  SECTION("scene touching the plane") {
    const SourceScene s({disk(Point(0, 0, 0.1), 0.1, 1.0)}, 3);
    CHECK_FALSE(validate_geometry(arr, s).ok());
  }
  SECTION("empty array") {
    const auto r = validate_geometry(ArrayGeometry({}, 3), default_scene());
    REQUIRE_FALSE(r.ok());
    CHECK(r.violations.front().find("M = 0") != std::string::npos);
  }
  SECTION("default scene") {
    CHECK(validate_geometry(make_spiral_array(64, 0.2, 3), default_scene()).ok());
  }
}

TEST_CASE("scene files round trip") {
  Primitive g;
  g.shape = Shape::gaussian;
  g.center = Point(0.1, 1.0 / 3.0, 0.9);
  g.sigma = 0.02;
  g.power = 0.7;
  Primitive pc;
  pc.shape = Shape::point_cell;
  pc.center = Point(-0.2, 0.0, 0.8);
  pc.size = 0.01;
  pc.power = 5.0;
  const SourceScene s({disk(Point(0.1, 0.2, 0.7), 0.05, 1.0), annulus(Point(0, 0, 1), 0.1, 0.2, 2.0),
                       box(Point(0, 0, 0.6), Point(0.1, 0.2, 0.05), 0.25), g, pc},
                      3);
  std::istringstream in(format_scene(s));
  CHECK(parse_scene(in) == s);

  std::istringstream bad("dim 3\nblob center=0,0,1 radius=1 power=1\n");
  CHECK_THROWS_AS(parse_scene(bad), FormatError);
  std::istringstream bad_key("disk center=0,0,1 rad=1 power=1\n");
  CHECK_THROWS_AS(parse_scene(bad_key), FormatError);
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.txt"), FormatError);
}

TEST_CASE("focus grid validation") {
  FocusGrid g = default_focus_grid();
  CHECK_NOTHROW(g.validate(3));
  g.origin[2] = 0.0;
  CHECK_THROWS_AS(g.validate(3), DomainError);
  g = default_focus_grid();
  g.u = Point(1, 1, 0);
  CHECK_THROWS_AS(g.validate(3), DomainError);
  g = default_focus_grid();
  CHECK(g.node(g.index(3, 2)) == g.node(3, 2));
}
