#pragma once

// Source-power scenes, microphone arrays on the plane x_d = 0, planar focus
// grids and the inner/outer support masks used to score reconstructions.

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aeroimg/greens.hpp"
#include "aeroimg/medium.hpp"
#include "aeroimg/types.hpp"

namespace aeroimg {

/// Height coordinate x_d of a point for the given dimension.
inline double height(const Point& p, int dim) { return p[dim - 1]; }

// ---------------------------------------------------------------------------
// ArrayGeometry

class ArrayGeometry {
 public:
  ArrayGeometry() = default;

  ArrayGeometry(std::vector<Point> positions, int dim) : positions_(std::move(positions)), dim_(dim) {
    if (dim != 2 && dim != 3) throw DomainError("ArrayGeometry: dim must be 2 or 3");
    for (size_t i = 0; i < positions_.size(); ++i) {
      const Point& p = positions_[i];
      if (!p.allFinite()) throw DomainError("ArrayGeometry: non-finite position");
      if (height(p, dim) != 0.0 || (dim == 2 && p[2] != 0.0)) {
        throw DomainError("ArrayGeometry: microphone " + std::to_string(i) +
                          " is not in the measurement plane");
      }
    }
    for (size_t i = 0; i < positions_.size(); ++i) {
      for (size_t j = i + 1; j < positions_.size(); ++j) {
        if ((positions_[i] - positions_[j]).norm() <= 1e-9) {
          throw DomainError("ArrayGeometry: duplicate positions " + std::to_string(i) + " and " +
                            std::to_string(j));
        }
      }
    }
  }

  const std::vector<Point>& positions() const { return positions_; }
  size_t size() const { return positions_.size(); }
  int dim() const { return dim_; }

  double min_separation() const {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < positions_.size(); ++i) {
      for (size_t j = i + 1; j < positions_.size(); ++j) {
        best = std::min(best, (positions_[i] - positions_[j]).norm());
      }
    }
    return best;
  }

 private:
  std::vector<Point> positions_;
  int dim_ = 3;
};

/// Rectangular lattice centred on the origin. In 2D the array is a line
/// along x1 and `ny` must be 1.
inline ArrayGeometry make_grid_array(int nx, int ny, double pitch, int dim) {
  if (nx < 1 || ny < 1 || !(pitch > 0.0)) throw DomainError("make_grid_array: invalid parameters");
  if (dim == 2 && ny != 1) throw DomainError("make_grid_array: 2D arrays are lines (ny = 1)");
  std::vector<Point> pos;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      pos.emplace_back(pitch * (i - 0.5 * (nx - 1)), dim == 3 ? pitch * (j - 0.5 * (ny - 1)) : 0.0,
                       0.0);
    }
  }
  return ArrayGeometry(std::move(pos), dim);
}

/// Archimedean spiral r(t) = radius·t, θ(t) = 2π·turns·t sampled at
/// t = (i + 1/2)/count. Three-dimensional only.
inline ArrayGeometry make_spiral_array(int count, double radius, double turns) {
  if (count < 1 || !(radius > 0.0) || !(turns > 0.0)) {
    throw DomainError("make_spiral_array: invalid parameters");
  }
  std::vector<Point> pos;
  pos.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = (i + 0.5) / count;
    const double theta = 2.0 * std::numbers::pi * turns * t;
    pos.emplace_back(radius * t * std::cos(theta), radius * t * std::sin(theta), 0.0);
  }
  return ArrayGeometry(std::move(pos), 3);
}

/// Parses `x1 x2 [x3]` rows; `#` starts a comment line. In 3D a two-column
/// row gives in-plane coordinates; a third column must be zero. In 2D rows
/// are `x1 [x2]` with x2 = 0.
inline ArrayGeometry parse_array(std::istream& in, int dim) {
  std::vector<Point> pos;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::vector<double> v;
    double x = 0.0;
    while (row >> x) v.push_back(x);
    if (!row.eof()) throw FormatError("array file line " + std::to_string(lineno) + ": bad number");
    const size_t expected_max = static_cast<size_t>(dim);
    if (v.empty() || v.size() > expected_max || v.size() + 1 < expected_max) {
      throw FormatError("array file line " + std::to_string(lineno) + ": expected " +
                        std::to_string(dim - 1) + " or " + std::to_string(dim) + " columns");
    }
    Point p = Point::Zero();
    for (size_t a = 0; a < v.size(); ++a) p[static_cast<Eigen::Index>(a)] = v[a];
    if (v.size() == expected_max && v.back() != 0.0) {
      throw FormatError("array file line " + std::to_string(lineno) +
                        ": microphone off the measurement plane");
    }
    pos.push_back(p);
  }
  return ArrayGeometry(std::move(pos), dim);
}

inline ArrayGeometry load_array(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open array file: " + path);
  return parse_array(in, dim);
}

// ---------------------------------------------------------------------------
// FocusGrid

/// Planar grid of focus points: origin + i·spacing·u + j·spacing·v.
struct FocusGrid {
  Point origin = Point::Zero();
  Point u = Point::UnitX();
  Point v = Point::UnitY();
  int nx = 1;
  int ny = 1;
  double spacing = 0.01;

  size_t size() const { return static_cast<size_t>(nx) * static_cast<size_t>(ny); }
  size_t index(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
  Point node(int i, int j) const { return origin + spacing * (i * u + j * v); }
  Point node(size_t idx) const {
    return node(static_cast<int>(idx % static_cast<size_t>(nx)),
                static_cast<int>(idx / static_cast<size_t>(nx)));
  }

  /// Throws unless spacing > 0, counts >= 1, u ⟂ v are unit vectors and
  /// every node lies strictly above the measurement plane.
  void validate(int dim) const {
    if (!(spacing > 0.0) || nx < 1 || ny < 1) throw DomainError("FocusGrid: invalid size");
    if (std::abs(u.norm() - 1.0) > 1e-12 || std::abs(v.norm() - 1.0) > 1e-12 ||
        std::abs(u.dot(v)) > 1e-12) {
      throw DomainError("FocusGrid: axes must be orthonormal");
    }
    for (int j : {0, ny - 1}) {
      for (int i : {0, nx - 1}) {
        if (!(height(node(i, j), dim) > 0.0)) {
          throw DomainError("FocusGrid: nodes must satisfy x_d > 0");
        }
      }
    }
  }

  bool operator==(const FocusGrid&) const = default;
};

// ---------------------------------------------------------------------------
// SourceScene

enum class Shape { disk, box, gaussian, point_cell, annulus };

inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::disk: return "disk";
    case Shape::box: return "box";
    case Shape::gaussian: return "gaussian";
    case Shape::point_cell: return "point";
    case Shape::annulus: return "annulus";
  }
  return "?";
}

/// Gaussian blobs are truncated at this many standard deviations.
inline constexpr double kGaussianCutoff = 4.0;

/// One additive component of the source-power function.
///   disk:     |z − c| <= radius (a ball in 3D)
///   box:      |z_a − c_a| <= half[a]
///   gaussian: power·exp(−|z − c|²/(2σ²)) for |z − c| <= 4σ
///   point:    one quadrature cell of edge `size` centred at c
///   annulus:  inner <= |z − c| <= radius (a spherical shell in 3D)
struct Primitive {
  Shape shape = Shape::disk;
  Point center = Point::Zero();
  double power = 0.0;
  double radius = 0.0;  // disk, annulus outer radius
  double inner = 0.0;   // annulus inner radius
  Point half = Point::Zero();
  double sigma = 0.0;
  double size = 0.0;

  double value(const Point& z) const {
    const Point d = z - center;
    switch (shape) {
      case Shape::disk: return d.norm() <= radius ? power : 0.0;
      case Shape::annulus: {
        const double r = d.norm();
        return (r >= inner && r <= radius) ? power : 0.0;
      }
      case Shape::box:
        return (std::abs(d[0]) <= half[0] && std::abs(d[1]) <= half[1] && std::abs(d[2]) <= half[2])
                   ? power
                   : 0.0;
      case Shape::gaussian: {
        const double r2 = d.squaredNorm();
        if (r2 > kGaussianCutoff * kGaussianCutoff * sigma * sigma) return 0.0;
        return power * std::exp(-0.5 * r2 / (sigma * sigma));
      }
      case Shape::point_cell: {
        const double h = 0.5 * size;
        return (d[0] >= -h && d[0] < h && d[1] >= -h && d[1] < h && d[2] >= -h && d[2] < h)
                   ? power
                   : 0.0;
      }
    }
    return 0.0;
  }

  /// Axis-aligned half-extent of the support.
  Point extent() const {
    switch (shape) {
      case Shape::disk:
      case Shape::annulus: return Point::Constant(radius);
      case Shape::box: return half;
      case Shape::gaussian: return Point::Constant(kGaussianCutoff * sigma);
      case Shape::point_cell: return Point::Constant(0.5 * size);
    }
    return Point::Zero();
  }

  /// Smallest feature width, used for the quadrature resolution check.
  double feature_size() const {
    switch (shape) {
      case Shape::disk: return 2.0 * radius;
      case Shape::annulus: return radius - inner;
      case Shape::box: return 2.0 * half.head<2>().minCoeff();
      case Shape::gaussian: return 2.0 * sigma;
      case Shape::point_cell: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  bool operator==(const Primitive&) const = default;
};

class SourceScene {
 public:
  SourceScene() = default;
  SourceScene(std::vector<Primitive> primitives, int dim)
      : primitives_(std::move(primitives)), dim_(dim) {
    if (dim != 2 && dim != 3) throw DomainError("SourceScene: dim must be 2 or 3");
    for (auto& p : primitives_) {
      if (!(p.power >= 0.0) || !std::isfinite(p.power)) {
        throw DomainError("SourceScene: primitive power must be finite and >= 0");
      }
      if (dim == 2) p.center[2] = 0.0;
      const bool bad =
          (p.shape == Shape::disk && !(p.radius > 0.0)) ||
          (p.shape == Shape::annulus && !(p.radius > p.inner && p.inner >= 0.0)) ||
          (p.shape == Shape::box && !(p.half.head(dim).minCoeff() > 0.0)) ||
          (p.shape == Shape::gaussian && !(p.sigma > 0.0)) ||
          (p.shape == Shape::point_cell && !(p.size > 0.0));
      if (bad) throw DomainError(std::string("SourceScene: bad size for ") + shape_name(p.shape));
      if (dim == 2 && p.shape == Shape::box) p.half[2] = 0.0;
    }
  }

  const std::vector<Primitive>& primitives() const { return primitives_; }
  int dim() const { return dim_; }
  bool empty() const { return primitives_.empty(); }

  /// Bounding box of all supports (lo, hi); zero box when empty.
  std::pair<Point, Point> bounds() const {
    if (primitives_.empty()) return {Point::Zero(), Point::Zero()};
    Point lo = Point::Constant(std::numeric_limits<double>::infinity());
    Point hi = -lo;
    for (const auto& p : primitives_) {
      lo = lo.cwiseMin(p.center - p.extent());
      hi = hi.cwiseMax(p.center + p.extent());
    }
    if (dim_ == 2) lo[2] = hi[2] = 0.0;
    return {lo, hi};
  }

  bool operator==(const SourceScene&) const = default;

 private:
  std::vector<Primitive> primitives_;
  int dim_ = 3;
};

/// q(z): sum of the powers of all primitives covering z.
inline double q_eval(const SourceScene& scene, const Point& z) {
  double q = 0.0;
  for (const auto& p : scene.primitives()) q += p.value(z);
  return q;
}

/// Two balls of radius 4 cm (powers 1.0 and 0.5) 0.75 m above the array,
/// 20 cm apart along x1.
inline SourceScene default_scene() {
  Primitive a;
  a.shape = Shape::disk;
  a.center = Point(-0.1, 0.0, 0.75);
  a.radius = 0.04;
  a.power = 1.0;
  Primitive b = a;
  b.center = Point(0.1, 0.0, 0.75);
  b.power = 0.5;
  return SourceScene({a, b}, 3);
}

/// Focus plane through the default scene: 61 x 41 nodes, 1 cm spacing.
inline FocusGrid default_focus_grid() {
  FocusGrid g;
  g.origin = Point(-0.3, -0.2, 0.75);
  g.nx = 61;
  g.ny = 41;
  g.spacing = 0.01;
  return g;
}

// Scene text format, one primitive per line (`#` comments):
//   dim 3
//   disk     center=x,y,z radius=r power=q
//   annulus  center=x,y,z inner=r0 radius=r1 power=q
//   box      center=x,y,z half=hx,hy,hz power=q
//   gaussian center=x,y,z sigma=s power=q
//   point    center=x,y,z size=h power=q

namespace detail {

inline Point parse_point(const std::string& s, int lineno) {
  Point p = Point::Zero();
  std::istringstream in(s);
  std::string tok;
  int a = 0;
  while (std::getline(in, tok, ',')) {
    if (a >= 3) throw FormatError("scene line " + std::to_string(lineno) + ": too many components");
    try {
      size_t used = 0;
      p[a++] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError("scene line " + std::to_string(lineno) + ": bad number '" + tok + "'");
    }
  }
  return p;
}

inline double parse_scalar(const std::string& s, int lineno) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("scene line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_point(const Point& p) {
  return format_double(p[0]) + "," + format_double(p[1]) + "," + format_double(p[2]);
}

}  // namespace detail

inline SourceScene parse_scene(std::istream& in) {
  int dim = 3;
  std::vector<Primitive> prims;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream row(line);
    std::string kind;
    if (!(row >> kind) || kind[0] == '#') continue;
    if (kind == "dim") {
      if (!(row >> dim)) throw FormatError("scene line " + std::to_string(lineno) + ": bad dim");
      continue;
    }
    Primitive p;
    if (kind == "disk") p.shape = Shape::disk;
    else if (kind == "box") p.shape = Shape::box;
    else if (kind == "gaussian") p.shape = Shape::gaussian;
    else if (kind == "point") p.shape = Shape::point_cell;
    else if (kind == "annulus") p.shape = Shape::annulus;
    else throw FormatError("scene line " + std::to_string(lineno) + ": unknown shape '" + kind + "'");
    std::string kv;
    while (row >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw FormatError("scene line " + std::to_string(lineno) + ": expected key=value");
      }
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "center") p.center = detail::parse_point(val, lineno);
      else if (key == "half") p.half = detail::parse_point(val, lineno);
      else if (key == "radius") p.radius = detail::parse_scalar(val, lineno);
      else if (key == "inner") p.inner = detail::parse_scalar(val, lineno);
      else if (key == "sigma") p.sigma = detail::parse_scalar(val, lineno);
      else if (key == "size") p.size = detail::parse_scalar(val, lineno);
      else if (key == "power") p.power = detail::parse_scalar(val, lineno);
      else throw FormatError("scene line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    prims.push_back(p);
  }
  return SourceScene(std::move(prims), dim);
}

inline SourceScene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene file: " + path);
  return parse_scene(in);
}

inline std::string format_scene(const SourceScene& scene) {
  std::ostringstream os;
  os << "dim " << scene.dim() << "\n";
  for (const auto& p : scene.primitives()) {
    os << shape_name(p.shape) << " center=" << detail::format_point(p.center);
    switch (p.shape) {
      case Shape::disk: os << " radius=" << detail::format_double(p.radius); break;
      case Shape::annulus:
        os << " inner=" << detail::format_double(p.inner)
           << " radius=" << detail::format_double(p.radius);
        break;
      case Shape::box: os << " half=" << detail::format_point(p.half); break;
      case Shape::gaussian: os << " sigma=" << detail::format_double(p.sigma); break;
      case Shape::point_cell: os << " size=" << detail::format_double(p.size); break;
    }
    os << " power=" << detail::format_double(p.power) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Support masks

enum class SupportKind { inner, outer };

using Mask = std::vector<bool>;

/// inner: nodes whose 3x3 in-plane neighbourhood (one grid step) has
///        q >= 1e-12·max q, i.e. a discrete essinf > 0.
/// outer: complement of the zero set connected to the grid boundary
///        (4-connected flood fill). Holes narrower than one cell are lost.
inline Mask support_mask(const SourceScene& scene, const FocusGrid& grid, SupportKind kind) {
  const size_t n = grid.size();
  std::vector<double> q(n);
  double qmax = 0.0;
  for (size_t idx = 0; idx < n; ++idx) {
    q[idx] = q_eval(scene, grid.node(idx));
    qmax = std::max(qmax, q[idx]);
  }
  Mask mask(n, false);
  if (qmax <= 0.0) return mask;
  const double eps = 1e-12 * qmax;

  if (kind == SupportKind::inner) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        bool all = true;
        for (int dj = -1; dj <= 1 && all; ++dj) {
          for (int di = -1; di <= 1 && all; ++di) {
            const Point z = grid.origin + grid.spacing * ((i + di) * grid.u + (j + dj) * grid.v);
            all = q_eval(scene, z) >= eps;
          }
        }
        mask[grid.index(i, j)] = all;
      }
    }
    return mask;
  }

  std::vector<bool> reached(n, false);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int i, int j) {
    const size_t idx = grid.index(i, j);
    if (!reached[idx] && q[idx] < eps) {
      reached[idx] = true;
      queue.emplace_back(i, j);
    }
  };
  for (int i = 0; i < grid.nx; ++i) {
    seed(i, 0);
    seed(i, grid.ny - 1);
  }
  for (int j = 0; j < grid.ny; ++j) {
    seed(0, j);
    seed(grid.nx - 1, j);
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (i > 0) seed(i - 1, j);
    if (i + 1 < grid.nx) seed(i + 1, j);
    if (j > 0) seed(i, j - 1);
    if (j + 1 < grid.ny) seed(i, j + 1);
  }
  for (size_t idx = 0; idx < n; ++idx) mask[idx] = !reached[idx];
  return mask;
}

/// Grows a mask by one node in the 8-neighbourhood.
inline Mask dilate(const Mask& mask, const FocusGrid& grid) {
  Mask out = mask;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (!mask[grid.index(i, j)]) continue;
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di;
          const int jj = j + dj;
          if (ii >= 0 && ii < grid.nx && jj >= 0 && jj < grid.ny) out[grid.index(ii, jj)] = true;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry validation

struct GeometryReport {
  std::vector<std::string> violations;
  double standoff = 0.0;  // min height of the scene region above x_d = 0
  bool ok() const { return violations.empty(); }
};

inline GeometryReport validate_geometry(const ArrayGeometry& array, const SourceScene& scene) {
  GeometryReport report;
  if (array.size() == 0) report.violations.emplace_back("M = 0: array has no microphones");
  if (array.size() > 0 && array.dim() != scene.dim()) {
    report.violations.emplace_back("array and scene dimensions differ");
  }
  const int dim = scene.dim();
  for (size_t i = 0; i < array.size(); ++i) {
    if (height(array.positions()[i], dim) != 0.0) {
      report.violations.push_back("microphone " + std::to_string(i) + " is off the plane x_d = 0");
    }
  }
  if (!scene.empty()) {
    const auto [lo, hi] = scene.bounds();
    report.standoff = height(lo, dim);
    if (!(report.standoff > 0.0)) {
      report.violations.push_back("scene region reaches x_d <= 0 (standoff " +
                                  detail::format_double(report.standoff) + " m)");
    }
  }
  return report;
}

}  // namespace aeroimg
