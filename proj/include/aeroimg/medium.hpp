#pragma once

// Uniform subsonic flow along +x1: Mach number, beta, the Mach norm and the
// Lorentz stretch that maps convected solutions to standard Helmholtz ones.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "aeroimg/types.hpp"

namespace aeroimg {

inline double beta_of(double mach) {
  if (!(mach >= 0.0) || !(mach < 1.0)) {
    throw DomainError("beta_of: Mach number must satisfy 0 <= m1 < 1, got " +
                      std::to_string(mach));
  }
  return std::sqrt((1.0 - mach) * (1.0 + mach));
}

class MediumParams {
 public:
  MediumParams(double speed_of_sound, double mach, int dim)
      : c_(speed_of_sound), mach_(mach), beta_(beta_of(mach)), dim_(dim) {
    if (!(speed_of_sound > 0.0) || !std::isfinite(speed_of_sound)) {
      throw DomainError("MediumParams: speed of sound must be positive");
    }
    if (dim != 2 && dim != 3) throw DomainError("MediumParams: dim must be 2 or 3");
  }

  /// Rejects Mach vectors with components off the x1 axis.
  static MediumParams from_mach_vector(double speed_of_sound, const Point& mach_vec, int dim) {
    if (mach_vec[1] != 0.0 || mach_vec[2] != 0.0 || mach_vec[0] < 0.0) {
      throw DomainError("MediumParams: flow must be aligned with +x1");
    }
    return MediumParams(speed_of_sound, mach_vec[0], dim);
  }

  double speed_of_sound() const { return c_; }
  double mach() const { return mach_; }
  double beta() const { return beta_; }
  int dim() const { return dim_; }

  bool operator==(const MediumParams&) const = default;

 private:
  double c_;
  double mach_;
  double beta_;
  int dim_;
};

struct Frequency {
  double hz;
  double k;  // rad/m
  double omega() const { return 2.0 * std::numbers::pi * hz; }
};

inline Frequency wavenumber(double f, const MediumParams& medium) {
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw DomainError("wavenumber: frequency must be positive");
  }
  return {f, 2.0 * std::numbers::pi * f / medium.speed_of_sound()};
}

/// |x|_m = sqrt((x.m)^2 + beta^2 |x|^2)
inline double mach_norm(const Point& x, const MediumParams& medium) {
  const double xm = medium.mach() * x[0];
  const double b = medium.beta();
  return std::sqrt(xm * xm + b * b * x.squaredNorm());
}

enum class LorentzDirection { forward, inverse };

/// forward: T x = (x1/beta, x2, ...); inverse: T^-1 x = (beta x1, x2, ...).
inline Point lorentz_map(const Point& x, const MediumParams& medium, LorentzDirection dir) {
  Point y = x;
  y[0] = dir == LorentzDirection::forward ? x[0] / medium.beta() : x[0] * medium.beta();
  return y;
}

/// Complex samples on a uniform Cartesian grid (x1 fastest, then x2, x3).
struct SampledField {
  Point origin = Point::Zero();
  Point spacing = Point::Ones();  // per axis
  int nx = 1;
  int ny = 1;
  int nz = 1;
  std::vector<Complex> values;

  Point node(int i, int j, int l) const {
    return origin + spacing.cwiseProduct(Point(i, j, l));
  }
  Complex& at(int i, int j, int l) { return values[(static_cast<size_t>(l) * ny + j) * nx + i]; }
  Complex at(int i, int j, int l) const {
    return values[(static_cast<size_t>(l) * ny + j) * nx + i];
  }

  /// Trilinear interpolation (first order; exact for affine fields). Axes
  /// with a single node are treated as constant along that axis.
  Complex interpolate(const Point& p) const {
    const int n[3] = {nx, ny, nz};
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double s = (p[a] - origin[a]) / spacing[a];
      if (n[a] == 1) {
        if (std::abs(s) > 1e-9) throw DomainError("SampledField: point outside grid");
        base[a] = 0;
        frac[a] = 0.0;
        continue;
      }
      if (s < -1e-9 || s > (n[a] - 1) + 1e-9) {
        throw DomainError("SampledField: point outside grid");
      }
      int b = static_cast<int>(std::floor(s));
      b = std::clamp(b, 0, n[a] - 2);
      base[a] = b;
      frac[a] = std::clamp(s - b, 0.0, 1.0);
    }
    Complex acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      int idx[3];
      bool skip = false;
      for (int a = 0; a < 3; ++a) {
        const int bit = (corner >> a) & 1;
        if (n[a] == 1 && bit) {
          skip = true;
          break;
        }
        idx[a] = base[a] + bit;
        w *= bit ? frac[a] : (n[a] == 1 ? 1.0 : 1.0 - frac[a]);
      }
      if (skip || w == 0.0) continue;
      acc += w * at(idx[0], idx[1], idx[2]);
    }
    return acc;
  }
};

/// Lorentz-transformed field w0(x) = exp(i m1 k x1 / beta) w_m(T^-1 x),
/// sampled on `target`'s grid (values of `target` are ignored). The source
/// field must cover T^-1 of every target node; values are resampled with
/// trilinear interpolation.
inline SampledField lorentz_transform_field(const SampledField& w_m, const SampledField& target,
                                            const MediumParams& medium, double k) {
  SampledField out = target;
  out.values.assign(static_cast<size_t>(target.nx) * target.ny * target.nz, Complex{});
  const double phase_rate = medium.mach() * k / medium.beta();
  for (int l = 0; l < target.nz; ++l) {
    for (int j = 0; j < target.ny; ++j) {
      for (int i = 0; i < target.nx; ++i) {
        const Point x = target.node(i, j, l);
        const Point pre = lorentz_map(x, medium, LorentzDirection::inverse);
        out.at(i, j, l) = std::polar(1.0, phase_rate * x[0]) * w_m.interpolate(pre);
      }
    }
  }
  return out;
}

}  // namespace aeroimg
