#pragma once

// Fundamental solution of the convected Helmholtz equation
//
//   Δp + (k + i m·∇)² p = −Q,   m = (m1, 0, 0),
//
// together with steering vectors, the midpoint-rule volume potential and a
// finite-difference residual of the differential operator.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "aeroimg/medium.hpp"
#include "aeroimg/specialfn.hpp"
#include "aeroimg/types.hpp"

namespace aeroimg {

/// Points closer than this are treated as coincident.
inline constexpr double kCoincidenceTolerance = 1e-12;

/// sup_{t>0} sqrt(t)·|H0^(1)(t)|, calibrated by a sweep over t ∈ [1e-2, 1e4]
/// (the supremum is the large-t limit sqrt(2/π)); rounded up.
inline constexpr double kHankelEnvelope = 0.797885;

inline Complex greens(const Point& x, const Point& y, const Frequency& freq,
                      const MediumParams& medium) {
  const Point r = x - y;
  if (r.norm() < kCoincidenceTolerance) {
    throw CoincidenceError("greens: evaluation point coincides with source point");
  }
  const double beta2 = medium.beta() * medium.beta();
  const double kappa = freq.k / beta2;
  const double rm = mach_norm(r, medium);
  const Complex convective = std::polar(1.0, -kappa * medium.mach() * r[0]);
  if (medium.dim() == 3) {
    return convective * std::polar(1.0 / (4.0 * std::numbers::pi * rm), kappa * rm);
  }
  const Complex h0 = specialfn::hankel1_0(kappa * rm);
  return convective * Complex(0.0, 0.25 / medium.beta()) * h0;
}

/// Constant C(d) of the decay bound |g(x,y)| <= C(d)·|x−y|^((1−d)/2).
/// For d = 3 it is 1/(4πβ²); for d = 2 it follows from the Hankel envelope
/// and |x−y|_m >= β|x−y|, and therefore scales with (βk)^(-1/2).
inline double greens_bound_constant(const Frequency& freq, const MediumParams& medium) {
  const double b = medium.beta();
  if (medium.dim() == 3) return 1.0 / (4.0 * std::numbers::pi * b * b);
  return kHankelEnvelope / (4.0 * std::sqrt(b * freq.k));
}

inline bool greens_bound_check(const Point& x, const Point& y, const Frequency& freq,
                               const MediumParams& medium) {
  const double dist = (x - y).norm();
  const double bound =
      greens_bound_constant(freq, medium) * std::pow(dist, 0.5 * (1.0 - medium.dim()));
  // The d = 3 bound is attained on the flow axis; allow for rounding.
  return std::abs(greens(x, y, freq, medium)) <= bound * (1.0 + 1e-12);
}

struct SteeringVector {
  CVector values;
  Point focus;
  Frequency frequency;
};

inline SteeringVector steering_vector(const Point& z, std::span<const Point> mics,
                                      const Frequency& freq, const MediumParams& medium) {
  SteeringVector sv{CVector(static_cast<Eigen::Index>(mics.size())), z, freq};
  for (size_t i = 0; i < mics.size(); ++i) {
    sv.values[static_cast<Eigen::Index>(i)] = greens(mics[i], z, freq, medium);
  }
  return sv;
}

/// Cell-centred samples of a source density on a uniform Cartesian grid.
struct CellSamples {
  std::vector<Point> centers;
  std::vector<Complex> values;
  double spacing = 0.0;  // cell edge length
};

inline double cell_volume(double spacing, int dim) {
  return dim == 3 ? spacing * spacing * spacing : spacing * spacing;
}

/// Midpoint rule for ∫ Q(y) g(x, y) dy. `x` must lie farther than one cell
/// diameter from every cell centre.
inline Complex volume_potential(const CellSamples& src, const Point& x, const Frequency& freq,
                                const MediumParams& medium) {
  const double diameter = src.spacing * std::sqrt(static_cast<double>(medium.dim()));
  const double dv = cell_volume(src.spacing, medium.dim());
  Complex acc = 0.0;
  for (size_t j = 0; j < src.centers.size(); ++j) {
    if ((x - src.centers[j]).norm() <= diameter) {
      throw DomainError("volume_potential: evaluation point inside the source region");
    }
    if (src.values[j] == Complex{}) continue;
    acc += src.values[j] * greens(x, src.centers[j], freq, medium);
  }
  return acc * dv;
}

using ScalarField = std::function<Complex(const Point&)>;

/// |Δp + k²p + 2ik m1 ∂1p − m1² ∂11p| at x by second-order central differences.
inline double pde_residual(const ScalarField& field, const Point& x, const Frequency& freq,
                           const MediumParams& medium, double h) {
  if (!(h > 0.0)) throw DomainError("pde_residual: step must be positive");
  const double k = freq.k;
  const double m1 = medium.mach();
  const Complex p0 = field(x);
  Complex laplacian = 0.0;
  Complex d1 = 0.0;
  Complex d11 = 0.0;
  for (int a = 0; a < medium.dim(); ++a) {
    Point e = Point::Zero();
    e[a] = h;
    const Complex plus = field(x + e);
    const Complex minus = field(x - e);
    const Complex second = (plus - 2.0 * p0 + minus) / (h * h);
    laplacian += second;
    if (a == 0) {
      d1 = (plus - minus) / (2.0 * h);
      d11 = second;
    }
  }
  const Complex residual =
      laplacian + k * k * p0 + Complex(0.0, 2.0 * k * m1) * d1 - m1 * m1 * d11;
  return std::abs(residual);
}

}  // namespace aeroimg
