#pragma once

// Imaging functionals over a cross-spectral matrix C with orthonormal
// eigensystem (λ_j, ψ_j), λ descending, and M0 retained eigenpairs:
//
//   fac / Capon   (Σ_{j<=M0} |<g, ψ_j>|² / λ_j)^-1 = (g* C† g)^-1
//   cbf           g* C g / |g|⁴
//   cbf + DR      (g* C g − Σ C_jj |g_j|²) / (|g|⁴ − Σ |g_j|⁴)
//
// plus Picard partial sums, the inf-criterion, third-octave band handling
// and map assembly.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "aeroimg/estimation.hpp"
#include "aeroimg/greens.hpp"
#include "aeroimg/parallel.hpp"
#include "aeroimg/scene.hpp"
#include "aeroimg/types.hpp"

namespace aeroimg {

/// Default relative positivity threshold: λ_j > τ·λ_1 counts as positive.
inline constexpr double kDefaultTau = 1e-12;
/// Guard for vanishing or exploding denominators.
inline constexpr double kDenominatorFloor = 1e-300;

struct EigenSystem {
  RVector eigenvalues;   // descending
  CMatrix eigenvectors;  // columns ψ_j
  Eigen::Index retained = 0;  // M0

  Eigen::Index size() const { return eigenvalues.size(); }
};

struct EigenOptions {
  double tau = kDefaultTau;
  int rank_cap = 0;  // 0: no cap
};

/// Hermitian eigendecomposition (eigenvalues sorted descending). Negative
/// round-off eigenvalues are kept as computed and simply fall outside M0.
inline EigenSystem eig_hermitian(const CMatrix& c, const EigenOptions& opt = {}) {
  if (!c.allFinite()) throw DomainError("eig_hermitian: non-finite entries");
  if (c.rows() != c.cols()) throw DomainError("eig_hermitian: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  if (es.info() != Eigen::Success) throw DomainError("eig_hermitian: no convergence");
  const Eigen::Index m = c.rows();
  EigenSystem sys;
  sys.eigenvalues = es.eigenvalues().reverse();
  sys.eigenvectors = es.eigenvectors().rowwise().reverse();
  if (m == 0) return sys;
  const double lead = sys.eigenvalues[0];
  if (lead > 0.0) {
    const double cut = opt.tau * lead;
    while (sys.retained < m && sys.eigenvalues[sys.retained] > cut) ++sys.retained;
  }
  if (opt.rank_cap > 0) sys.retained = std::min<Eigen::Index>(sys.retained, opt.rank_cap);
  return sys;
}

inline EigenSystem eig_hermitian(const CrossSpectralMatrix& c, const EigenOptions& opt = {}) {
  return eig_hermitian(c.entries, opt);
}

/// |<v, ψ_j>|² for the retained eigenvectors.
inline RVector projection_energies(const EigenSystem& eig, const CVector& v) {
  const CVector coeff = eig.eigenvectors.leftCols(eig.retained).adjoint() * v;
  return coeff.cwiseAbs2();
}

/// v* C† v = Σ_{j<=M0} |<v, ψ_j>|² / λ_j.
inline double pinv_quadratic(const EigenSystem& eig, const CVector& v) {
  if (v.size() != eig.size()) throw DomainError("pinv_quadratic: length mismatch");
  const RVector e = projection_energies(eig, v);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < eig.retained; ++j) sum += e[j] / eig.eigenvalues[j];
  return sum;
}

enum class Sentinel {
  none,
  kernel_direction,  // g* C† g exceeded 1/floor: value reported as 0
  degenerate,        // g* C† g (or a denominator) vanished: value reported as 0
};

struct NodeValue {
  double value = 0.0;
  Sentinel sentinel = Sentinel::none;
};

inline NodeValue fac_evaluate(const EigenSystem& eig, const CVector& g) {
  const double sum = pinv_quadratic(eig, g);
  if (!(sum < 1.0 / kDenominatorFloor)) return {0.0, Sentinel::kernel_direction};
  if (!(sum > kDenominatorFloor)) return {0.0, Sentinel::degenerate};
  return {1.0 / sum, Sentinel::none};
}

inline double fac_value(const EigenSystem& eig, const CVector& g) {
  return fac_evaluate(eig, g).value;
}
inline double fac_value(const EigenSystem& eig, const SteeringVector& g) {
  return fac_value(eig, g.values);
}

/// C† g computed from the retained eigenpairs.
inline CVector pinv_apply(const EigenSystem& eig, const CVector& v) {
  const auto psi = eig.eigenvectors.leftCols(eig.retained);
  CVector coeff = psi.adjoint() * v;
  for (Eigen::Index j = 0; j < eig.retained; ++j) coeff[j] /= eig.eigenvalues[j];
  return psi * coeff;
}

/// w = C† g / (g* C† g); satisfies w* g = 1.
inline CVector capon_steering(const EigenSystem& eig, const CVector& g) {
  const double den = pinv_quadratic(eig, g);
  if (!(den > kDenominatorFloor)) {
    throw DomainError("capon_steering: steering vector orthogonal to range(C)");
  }
  return pinv_apply(eig, g) / den;
}

/// (g* C† g)^-1, evaluated through the Capon weights as w* C w.
inline NodeValue capon_evaluate(const EigenSystem& eig, const CVector& g) {
  const double den = pinv_quadratic(eig, g);
  if (!(den < 1.0 / kDenominatorFloor)) return {0.0, Sentinel::kernel_direction};
  if (!(den > kDenominatorFloor)) return {0.0, Sentinel::degenerate};
  const CVector w = pinv_apply(eig, g) / den;
  // w* C w with C = Ψ Λ Ψ* restricted to the retained pairs.
  const CVector coeff = eig.eigenvectors.leftCols(eig.retained).adjoint() * w;
  double value = 0.0;
  for (Eigen::Index j = 0; j < eig.retained; ++j) value += eig.eigenvalues[j] * std::norm(coeff[j]);
  return {value, Sentinel::none};
}

inline double capon_value(const EigenSystem& eig, const CVector& g) {
  return capon_evaluate(eig, g).value;
}

inline double cbf_value(const CMatrix& c, const CVector& g) {
  const double g2 = g.squaredNorm();
  if (!(g2 > 0.0)) throw DomainError("cbf_value: zero steering vector");
  return (g.adjoint() * c * g)(0, 0).real() / (g2 * g2);
}

/// Conventional beamformer through the eigen-expansion
/// (1/|g|⁴) Σ_j λ_j |<g, ψ_j>|² over the retained pairs.
inline double cbf_value_eigen(const EigenSystem& eig, const CVector& g) {
  const double g2 = g.squaredNorm();
  if (!(g2 > 0.0)) throw DomainError("cbf_value_eigen: zero steering vector");
  const RVector e = projection_energies(eig, g);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < eig.retained; ++j) sum += eig.eigenvalues[j] * e[j];
  return sum / (g2 * g2);
}

inline NodeValue cbf_dr_evaluate(const CMatrix& c, const CVector& g) {
  if (g.size() < 2) throw DomainError("cbf_dr_value: needs at least two microphones");
  const double g2 = g.squaredNorm();
  double diag_num = 0.0;
  double diag_den = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double a = std::norm(g[j]);
    diag_num += c(j, j).real() * a;
    diag_den += a * a;
  }
  const double num = (g.adjoint() * c * g)(0, 0).real() - diag_num;
  const double den = g2 * g2 - diag_den;
  if (!(den > 1e-14 * g2 * g2)) {
    return {0.0, Sentinel::degenerate};
  }
  return {num / den, Sentinel::none};
}

/// Diagonal-removed beamformer; may be negative.
inline double cbf_dr_value(const CMatrix& c, const CVector& g) {
  const NodeValue v = cbf_dr_evaluate(c, g);
  if (v.sentinel != Sentinel::none) {
    throw DomainError("cbf_dr_value: degenerate denominator (steering mass on one microphone)");
  }
  return v.value;
}

enum class LeastSquaresVariant { full, offdiag };

/// argmin_μ Σ_{(j,l) in S} |C_jl − μ g_j conj(g_l)|², S all pairs (full) or
/// j != l (offdiag): μ* = Re Σ_S conj(G_jl) C_jl / Σ_S |G_jl|².
inline double least_squares_form(const CMatrix& c, const CVector& g, LeastSquaresVariant variant) {
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    for (Eigen::Index l = 0; l < g.size(); ++l) {
      if (variant == LeastSquaresVariant::offdiag && j == l) continue;
      const Complex gjl = g[j] * std::conj(g[l]);
      num += (std::conj(gjl) * c(j, l)).real();
      den += std::norm(gjl);
    }
  }
  if (!(den > 0.0)) throw DomainError("least_squares_form: degenerate steering vector");
  return num / den;
}

/// Partial sums of the Picard series Σ_j |<g, ψ_j>|² / λ_j, j = 1..M0.
inline std::vector<double> picard_partial_sums(const EigenSystem& eig, const CVector& g) {
  const RVector e = projection_energies(eig, g);
  std::vector<double> sums(static_cast<size_t>(eig.retained));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < eig.retained; ++j) {
    acc += e[j] / eig.eigenvalues[j];
    sums[static_cast<size_t>(j)] = acc;
  }
  return sums;
}

struct InfCriterion {
  double value = 0.0;
  std::optional<CVector> minimizer;  // empty when the infimum is not attained
};

/// Relative size of the kernel component above which g counts as having
/// one (infimum 0, not attained).
inline constexpr double kKernelComponentTolerance = 1e-8;

/// inf { w* C w : w* g = 1 }.
inline InfCriterion inf_criterion(const EigenSystem& eig, const CVector& g) {
  const double gn = g.norm();
  if (!(gn > 0.0)) return {};
  const auto psi = eig.eigenvectors.leftCols(eig.retained);
  const CVector projected = psi * (psi.adjoint() * g);
  if ((g - projected).norm() > kKernelComponentTolerance * gn) return {};
  const NodeValue v = capon_evaluate(eig, g);
  if (v.sentinel != Sentinel::none) return {};
  return {v.value, capon_steering(eig, g)};
}

// ---------------------------------------------------------------------------
// Bands

struct BandSpec {
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline BandSpec third_octave_band(double fc) {
  if (!(fc > 0.0)) throw DomainError("third_octave_band: centre frequency must be positive");
  return {fc, fc * std::exp2(-1.0 / 6.0), fc * std::exp2(1.0 / 6.0)};
}

/// floor(f2/Δf) − ceil(f1/Δf) + 1, clamped at zero.
inline int band_bin_count(const BandSpec& band, double df) {
  if (!(df > 0.0)) throw DomainError("band_bin_count: resolution must be positive");
  const auto n = static_cast<long long>(std::floor(band.upper / df)) -
                 static_cast<long long>(std::ceil(band.lower / df)) + 1;
  return static_cast<int>(std::max(0LL, n));
}

/// Bin indices n with f1 <= n·Δf <= f2.
inline std::vector<int> band_bins(const BandSpec& band, double df) {
  if (!(df > 0.0)) throw DomainError("band_bins: resolution must be positive");
  std::vector<int> bins;
  const auto lo = static_cast<long long>(std::ceil(band.lower / df));
  const auto hi = static_cast<long long>(std::floor(band.upper / df));
  for (long long n = lo; n <= hi; ++n) bins.push_back(static_cast<int>(n));
  return bins;
}

// ---------------------------------------------------------------------------
// Maps

enum class Method { fac, capon, cbf, cbfdr };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::fac: return "fac";
    case Method::capon: return "capon";
    case Method::cbf: return "cbf";
    case Method::cbfdr: return "cbfdr";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "fac") return Method::fac;
  if (s == "capon") return Method::capon;
  if (s == "cbf") return Method::cbf;
  if (s == "cbfdr") return Method::cbfdr;
  throw DomainError("unknown imaging method '" + s + "'");
}

struct SourceMap {
  FocusGrid grid;
  std::vector<double> values;
  std::string method;
  std::string tag;  // frequency in Hz, or "band<fc>"
  size_t kernel_sentinels = 0;
  size_t degenerate_sentinels = 0;
};

struct MapOptions {
  EigenOptions eigen;
  int threads = 1;
};

inline std::string frequency_tag(double hz) {
  std::ostringstream os;
  os.precision(17);
  os << hz;
  return os.str();
}

inline SourceMap compute_map(Method method, const CrossSpectralMatrix& c,
                             const ArrayGeometry& array, const FocusGrid& grid,
                             const Frequency& freq, const MediumParams& medium,
                             const MapOptions& opt = {}) {
  if (static_cast<size_t>(c.size()) != array.size()) {
    throw DomainError("compute_map: CSM size does not match the array");
  }
  grid.validate(medium.dim());
  SourceMap map;
  map.grid = grid;
  map.method = method_name(method);
  map.tag = frequency_tag(freq.hz);
  map.values.assign(grid.size(), 0.0);
  std::vector<Sentinel> flags(grid.size(), Sentinel::none);

  std::optional<EigenSystem> eig;
  if (method == Method::fac || method == Method::capon) eig = eig_hermitian(c.entries, opt.eigen);

  parallel_for(grid.size(), opt.threads, [&](size_t begin, size_t end) {
    for (size_t idx = begin; idx < end; ++idx) {
      const CVector g = steering_vector(grid.node(idx), array.positions(), freq, medium).values;
      NodeValue v;
      switch (method) {
        case Method::fac: v = fac_evaluate(*eig, g); break;
        case Method::capon: v = capon_evaluate(*eig, g); break;
        case Method::cbf: v = {cbf_value(c.entries, g), Sentinel::none}; break;
        case Method::cbfdr: v = cbf_dr_evaluate(c.entries, g); break;
      }
      map.values[idx] = v.value;
      flags[idx] = v.sentinel;
    }
  });
  for (Sentinel s : flags) {
    if (s == Sentinel::kernel_direction) ++map.kernel_sentinels;
    if (s == Sentinel::degenerate) ++map.degenerate_sentinels;
  }
  return map;
}

/// Nodewise sum over the band's maps (nodewise mean when `mean` is set).
inline SourceMap band_average(const std::vector<SourceMap>& maps, const std::string& tag = "",
                              bool mean = false) {
  if (maps.empty()) throw DomainError("band_average: empty band");
  SourceMap out = maps.front();
  for (size_t i = 1; i < maps.size(); ++i) {
    const auto& m = maps[i];
    if (!(m.grid == out.grid) || m.values.size() != out.values.size()) {
      throw DomainError("band_average: grid mismatch");
    }
    if (m.method != out.method) throw DomainError("band_average: method mismatch");
    for (size_t k = 0; k < out.values.size(); ++k) out.values[k] += m.values[k];
    out.kernel_sentinels += m.kernel_sentinels;
    out.degenerate_sentinels += m.degenerate_sentinels;
  }
  if (mean) {
    for (double& v : out.values) v /= static_cast<double>(maps.size());
  }
  if (!tag.empty()) out.tag = tag;
  return out;
}

/// Min–max normalization to [0, 1]. A constant map becomes all zeros and
/// `constant` (when given) is set.
inline SourceMap normalize_map(const SourceMap& map, bool* constant = nullptr) {
  SourceMap out = map;
  if (constant) *constant = false;
  if (map.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double span = *hi - *lo;
  const double base = *lo;
  if (!(span > 0.0)) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    if (constant) *constant = true;
    return out;
  }
  for (double& v : out.values) v = (v - base) / span;
  return out;
}

struct ContrastMetric {
  double inside_mean = 0.0;
  double outside_mean = 0.0;
  double ratio = 0.0;  // +inf when the outside mean is zero
  double jaccard_at_half = 0.0;
};

/// Inside: the inner mask. Outside: nodes not in the one-node dilation of
/// the outer mask. Jaccard compares {v >= max/2} with the inner mask.
inline ContrastMetric contrast_metric(const SourceMap& map, const Mask& inner, const Mask& outer) {
  const size_t n = map.values.size();
  if (inner.size() != n || outer.size() != n) throw DomainError("contrast_metric: mask size mismatch");
  const Mask excluded = dilate(outer, map.grid);
  double in_sum = 0.0;
  double out_sum = 0.0;
  size_t in_count = 0;
  size_t out_count = 0;
  for (size_t k = 0; k < n; ++k) {
    if (inner[k]) {
      in_sum += map.values[k];
      ++in_count;
    }
    if (!excluded[k]) {
      out_sum += map.values[k];
      ++out_count;
    }
  }
  if (in_count == 0) throw DomainError("contrast_metric: empty inner mask");
  if (out_count == 0) throw DomainError("contrast_metric: empty outside region");
  ContrastMetric m;
  m.inside_mean = in_sum / static_cast<double>(in_count);
  m.outside_mean = out_sum / static_cast<double>(out_count);
  m.ratio = m.outside_mean == 0.0 ? std::numeric_limits<double>::infinity()
                                  : m.inside_mean / m.outside_mean;
  const double vmax = *std::max_element(map.values.begin(), map.values.end());
  size_t inter = 0;
  size_t uni = 0;
  for (size_t k = 0; k < n; ++k) {
    const bool hot = map.values[k] >= 0.5 * vmax;
    inter += (hot && inner[k]) ? 1 : 0;
    uni += (hot || inner[k]) ? 1 : 0;
  }
  m.jaccard_at_half = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return m;
}

}  // namespace aeroimg
