#pragma once

// Forward data synthesis and spectral estimation.
//
// A scene is discretized into cells with weights q(z_c)·Δv. The exact
// cross-spectral matrix is C = Σ_c w_c g(z_c) g(z_c)*, random snapshots are
// p = Σ_c sqrt(w_c) ξ_c g(z_c) with ξ circular complex normal, and time
// series are assembled from per-block random spectra so that Welch's
// estimate converges to the exact matrix bin by bin.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "aeroimg/greens.hpp"
#include "aeroimg/medium.hpp"
#include "aeroimg/parallel.hpp"
#include "aeroimg/rng.hpp"
#include "aeroimg/scene.hpp"
#include "aeroimg/types.hpp"

namespace aeroimg {

struct CrossSpectralMatrix {
  Frequency frequency{};
  CMatrix entries;
  std::string provenance = "exact";  // single token, e.g. snapshot:S=64:seed=1

  Eigen::Index size() const { return entries.rows(); }
};

struct CsmDiagnostics {
  double hermitian_error = 0.0;  // max |C − C*| / max |C|
  double min_eigen_ratio = 0.0;  // λ_min / λ_max
  bool diagonal_ok = true;       // real, nonnegative diagonal

  bool ok() const {
    return hermitian_error <= 1e-12 && min_eigen_ratio >= -1e-10 && diagonal_ok;
  }
};

inline CsmDiagnostics csm_diagnostics(const CMatrix& c) {
  CsmDiagnostics d;
  if (c.size() == 0) return d;
  if (!c.allFinite()) {
    d.hermitian_error = std::numeric_limits<double>::infinity();
    d.diagonal_ok = false;
    return d;
  }
  const double scale = c.cwiseAbs().maxCoeff();
  if (scale == 0.0) return d;
  d.hermitian_error = (c - c.adjoint()).cwiseAbs().maxCoeff() / scale;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const Complex v = c(i, i);
    if (std::abs(v.imag()) > 1e-12 * scale || v.real() < 0.0) d.diagonal_ok = false;
  }
  const CMatrix herm = 0.5 * (c + c.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  d.min_eigen_ratio = lmax > 0.0 ? es.eigenvalues().minCoeff() / lmax : 0.0;
  return d;
}

// ---------------------------------------------------------------------------
// Scene discretization

struct SourceCells {
  std::vector<Point> centers;
  std::vector<double> weights;  // q(z_c)·Δv
  double spacing = 0.0;
  std::vector<std::string> warnings;

  size_t size() const { return centers.size(); }
};

/// Midpoint-rule cells with positive power on a grid of edge `spacing`
/// centred on the scene's bounding box. Point cells contribute one cell of
/// their own size at their centre.
inline SourceCells discretize_scene(const SourceScene& scene, double spacing) {
  if (!(spacing > 0.0)) throw DomainError("discretize_scene: spacing must be positive");
  SourceCells cells;
  cells.spacing = spacing;
  const int dim = scene.dim();
  std::vector<Primitive> continuous;
  for (const auto& p : scene.primitives()) {
    if (p.shape == Shape::point_cell) {
      if (p.power > 0.0) {
        cells.centers.push_back(p.center);
        cells.weights.push_back(p.power * cell_volume(p.size, dim));
      }
      continue;
    }
    if (p.feature_size() < 4.0 * spacing) {
      cells.warnings.push_back(std::string("under-resolved ") + shape_name(p.shape) +
                               ": fewer than 4 cells across");
    }
    continuous.push_back(p);
  }
  if (continuous.empty()) return cells;
  const SourceScene cont(continuous, dim);
  const auto [lo, hi] = cont.bounds();
  const Point mid = 0.5 * (lo + hi);
  int n[3] = {1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    n[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing - 1e-9)));
  }
  const double dv = cell_volume(spacing, dim);
  for (int l = 0; l < n[2]; ++l) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        Point z = mid;
        z[0] += (i - 0.5 * (n[0] - 1)) * spacing;
        z[1] += (j - 0.5 * (n[1] - 1)) * spacing;
        if (dim == 3) z[2] += (l - 0.5 * (n[2] - 1)) * spacing;
        const double q = q_eval(cont, z);
        if (q > 0.0) {
          cells.centers.push_back(z);
          cells.weights.push_back(q * dv);
        }
      }
    }
  }
  return cells;
}

/// M x ncells matrix with columns sqrt(w_c)·g(z_c).
inline CMatrix weighted_steering_matrix(const SourceCells& cells, const ArrayGeometry& array,
                                        const Frequency& freq, const MediumParams& medium,
                                        int threads = 1) {
  const auto m = static_cast<Eigen::Index>(array.size());
  CMatrix g(m, static_cast<Eigen::Index>(cells.size()));
  parallel_for(cells.size(), threads, [&](size_t begin, size_t end) {
    for (size_t c = begin; c < end; ++c) {
      const double s = std::sqrt(cells.weights[c]);
      for (Eigen::Index i = 0; i < m; ++i) {
        g(i, static_cast<Eigen::Index>(c)) =
            s * greens(array.positions()[static_cast<size_t>(i)], cells.centers[c], freq, medium);
      }
    }
  });
  return g;
}

inline void require_valid_geometry(const ArrayGeometry& array, const SourceScene& scene) {
  const auto report = validate_geometry(array, scene);
  if (!report.ok()) throw DomainError("invalid geometry: " + report.violations.front());
}

inline CrossSpectralMatrix exact_csm_from_cells(const SourceCells& cells,
                                                const ArrayGeometry& array,
                                                const Frequency& freq, const MediumParams& medium,
                                                int threads = 1) {
  const CMatrix g = weighted_steering_matrix(cells, array, freq, medium, threads);
  CrossSpectralMatrix c;
  c.frequency = freq;
  c.entries = g * g.adjoint();
  // Exact symmetry: the product is Hermitian only up to round-off.
  c.entries = (0.5 * (c.entries + c.entries.adjoint())).eval();
  for (Eigen::Index i = 0; i < c.entries.rows(); ++i) c.entries(i, i).imag(0.0);
  c.provenance = "exact";
  return c;
}

/// C_ij = Σ_c q(z_c) g(x_i, z_c) conj(g(x_j, z_c)) Δv.
inline CrossSpectralMatrix exact_csm(const SourceScene& scene, const ArrayGeometry& array,
                                     const Frequency& freq, const MediumParams& medium,
                                     double src_spacing, int threads = 1,
                                     std::vector<std::string>* warnings = nullptr) {
  require_valid_geometry(array, scene);
  const SourceCells cells = discretize_scene(scene, src_spacing);
  if (warnings) warnings->insert(warnings->end(), cells.warnings.begin(), cells.warnings.end());
  return exact_csm_from_cells(cells, array, freq, medium, threads);
}

// ---------------------------------------------------------------------------
// Snapshots

struct SnapshotSet {
  CMatrix data;  // M x S, one snapshot per column
  Frequency frequency{};
  std::uint64_t seed = 0;

  Eigen::Index count() const { return data.cols(); }
};

/// Snapshot s draws its cell amplitudes from substream ("snapshot", s) of
/// `stream` (e.g. the frequency bin), so the result is independent of the
/// worker count.
inline SnapshotSet synthesize_snapshots(const SourceScene& scene, const ArrayGeometry& array,
                                        const Frequency& freq, const MediumParams& medium,
                                        double src_spacing, int count, std::uint64_t seed,
                                        int threads = 1, std::uint64_t stream = 0) {
  if (count < 1) throw DomainError("synthesize_snapshots: need at least one snapshot");
  require_valid_geometry(array, scene);
  const SourceCells cells = discretize_scene(scene, src_spacing);
  const CMatrix g = weighted_steering_matrix(cells, array, freq, medium, threads);
  SnapshotSet set;
  set.frequency = freq;
  set.seed = seed;
  set.data = CMatrix::Zero(g.rows(), count);
  if (cells.size() == 0) return set;
  parallel_for(static_cast<size_t>(count), threads, [&](size_t begin, size_t end) {
    CVector xi(g.cols());
    for (size_t s = begin; s < end; ++s) {
      RandomStream rng(seed, "snapshot", (stream << 32) | s);
      for (Eigen::Index c = 0; c < xi.size(); ++c) xi[c] = rng.complex_normal();
      set.data.col(static_cast<Eigen::Index>(s)).noalias() = g * xi;
    }
  });
  return set;
}

/// (1/S) Σ_s p_s p_s*.
inline CrossSpectralMatrix sample_csm(const SnapshotSet& snaps) {
  CrossSpectralMatrix c;
  c.frequency = snaps.frequency;
  const Eigen::Index s = snaps.count();
  const Eigen::Index m = snaps.data.rows();
  c.entries = CMatrix::Zero(m, m);
  if (s > 0) {
    c.entries = snaps.data * snaps.data.adjoint() / static_cast<double>(s);
    c.entries = (0.5 * (c.entries + c.entries.adjoint())).eval();
    for (Eigen::Index i = 0; i < m; ++i) c.entries(i, i).imag(0.0);
  }
  c.provenance = "snapshot:S=" + std::to_string(s) + ":seed=" + std::to_string(snaps.seed);
  return c;
}

// ---------------------------------------------------------------------------
// Time series and Welch estimation

struct TimeSeries {
  int channels = 0;
  size_t samples = 0;
  double fs = 0.0;
  std::vector<double> data;  // channel-major: data[ch * samples + t]

  double* channel(int ch) { return data.data() + static_cast<size_t>(ch) * samples; }
  const double* channel(int ch) const { return data.data() + static_cast<size_t>(ch) * samples; }
};

/// Periodic Hann window w(t) = sin²(πt/N).
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t) {
    const double s = std::sin(std::numbers::pi * t / n);
    w[static_cast<size_t>(t)] = s * s;
  }
  return w;
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct TimeSeriesOptions {
  double fs = 48000.0;
  double duration = 1.0;  // seconds
  int block = 1024;
  double src_spacing = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Per-block frequency-domain synthesis. For every block of length N (hop
/// N/2) and every bin 0 < n < N/2 an independent vector a_n with covariance
/// (Δf/2)·C(f_n) is drawn, the Hermitian spectrum is inverse transformed to a
/// real block, tapered by sqrt(Hann) and overlap-added. Since sqrt(Hann)²
/// sums to one at hop N/2, Welch's one-sided estimate converges to C(f_n).
inline TimeSeries synthesize_timeseries(const SourceScene& scene, const ArrayGeometry& array,
                                        const MediumParams& medium,
                                        const TimeSeriesOptions& opt) {
  if (!(opt.fs > 0.0)) throw DomainError("synthesize_timeseries: fs must be positive");
  if (opt.block < 4 || opt.block % 2 != 0) {
    throw DomainError("synthesize_timeseries: block must be even and >= 4");
  }
  const auto total = static_cast<size_t>(std::llround(opt.duration * opt.fs));
  if (!(opt.duration > 0.0) || total < 2 * static_cast<size_t>(opt.block)) {
    throw DomainError("synthesize_timeseries: duration shorter than two blocks");
  }
  require_valid_geometry(array, scene);
  const int n_fft = opt.block;
  const int hop = n_fft / 2;
  const double df = opt.fs / n_fft;
  const auto m = static_cast<Eigen::Index>(array.size());

  TimeSeries ts;
  ts.channels = static_cast<int>(m);
  ts.samples = total;
  ts.fs = opt.fs;
  ts.data.assign(static_cast<size_t>(m) * total, 0.0);

  const SourceCells cells = discretize_scene(scene, opt.src_spacing);
  if (cells.size() == 0) return ts;

  // Square-root factors F_n with F_n F_n* = (Δf/2)·C(f_n).
  std::vector<CMatrix> factors(static_cast<size_t>(hop));
  parallel_for(static_cast<size_t>(hop - 1), opt.threads, [&](size_t begin, size_t end) {
    for (size_t b = begin; b < end; ++b) {
      const int n = static_cast<int>(b) + 1;
      const Frequency f = wavenumber(n * df, medium);
      const CMatrix c = exact_csm_from_cells(cells, array, f, medium).entries;
      Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
      const RVector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      factors[static_cast<size_t>(n)] =
          std::sqrt(0.5 * df) * es.eigenvectors() * lam.asDiagonal();
    }
  });

  std::vector<double> taper(static_cast<size_t>(n_fft));
  for (int t = 0; t < n_fft; ++t) taper[static_cast<size_t>(t)] = std::sin(std::numbers::pi * t / n_fft);

  // Block b covers samples [(b-1)·hop, (b+1)·hop) and draws from substream
  // ("timeseries-block", b). Blocks are rendered in parallel batches and
  // overlap-added sequentially.
  const size_t n_blocks = (total + hop - 1) / hop + 1;
  const size_t batch = 64;
  std::vector<std::vector<double>> rendered(batch);
  for (size_t first = 0; first < n_blocks; first += batch) {
    const size_t count = std::min(batch, n_blocks - first);
    parallel_for(count, opt.threads, [&](size_t begin, size_t end) {
      Eigen::FFT<double> fft;
      std::vector<Complex> spectrum(static_cast<size_t>(n_fft));
      std::vector<Complex> block(static_cast<size_t>(n_fft));
      CMatrix amps(m, hop);
      CVector xi(m);
      for (size_t slot = begin; slot < end; ++slot) {
        RandomStream rng(opt.seed, "timeseries-block", first + slot);
        amps.setZero();
        for (int n = 1; n < hop; ++n) {
          for (Eigen::Index i = 0; i < m; ++i) xi[i] = rng.complex_normal();
          amps.col(n).noalias() = factors[static_cast<size_t>(n)] * xi;
        }
        auto& out = rendered[slot];
        out.assign(static_cast<size_t>(m) * n_fft, 0.0);
        for (Eigen::Index ch = 0; ch < m; ++ch) {
          std::fill(spectrum.begin(), spectrum.end(), Complex{});
          for (int n = 1; n < hop; ++n) {
            const Complex a = static_cast<double>(n_fft) * amps(ch, n);
            spectrum[static_cast<size_t>(n)] = a;
            spectrum[static_cast<size_t>(n_fft - n)] = std::conj(a);
          }
          fft.inv(block, spectrum);
          for (int t = 0; t < n_fft; ++t) {
            out[static_cast<size_t>(ch) * n_fft + t] =
                taper[static_cast<size_t>(t)] * block[static_cast<size_t>(t)].real();
          }
        }
      }
    });
    for (size_t slot = 0; slot < count; ++slot) {
      const long long start = (static_cast<long long>(first + slot) - 1) * hop;
      for (Eigen::Index ch = 0; ch < m; ++ch) {
        double* dst = ts.channel(static_cast<int>(ch));
        const double* src = rendered[slot].data() + static_cast<size_t>(ch) * n_fft;
        for (int t = 0; t < n_fft; ++t) {
          const long long pos = start + t;
          if (pos >= 0 && pos < static_cast<long long>(total)) dst[pos] += src[t];
        }
      }
    }
  }
  return ts;
}

struct WelchOptions {
  int block = 1024;
  double overlap = 0.5;
  std::vector<int> bins;  // empty: all bins 0 <= n < block/2
  double speed_of_sound = 345.0;  // only used to attach wavenumbers
  std::vector<std::string>* warnings = nullptr;
};

inline double welch_resolution(double fs, int block) { return fs / block; }

/// Welch cross-spectral matrices with a periodic Hann window. Each bin is
/// (s/K) Σ_blocks X_n X_n* with s = 2/(fs·Σw²) (1/(fs·Σw²) at DC), so white
/// noise of unit one-sided spectral density gives a unit diagonal.
inline std::vector<CrossSpectralMatrix> welch_csm(const TimeSeries& series,
                                                  const WelchOptions& opt = {}) {
  const int n_fft = opt.block;
  if (n_fft < 2) throw DomainError("welch_csm: block must be >= 2");
  if (!(opt.overlap >= 0.0 && opt.overlap < 1.0)) {
    throw DomainError("welch_csm: overlap must lie in [0, 1)");
  }
  if (series.samples < static_cast<size_t>(n_fft)) {
    throw DomainError("welch_csm: series shorter than one block");
  }
  if (!is_power_of_two(n_fft) && opt.warnings) {
    opt.warnings->push_back("welch_csm: block length is not a power of two");
  }
  std::vector<int> bins = opt.bins;
  if (bins.empty()) {
    for (int n = 0; n < n_fft / 2; ++n) bins.push_back(n);
  }
  for (int n : bins) {
    if (n < 0 || n >= n_fft / 2) throw DomainError("welch_csm: bin outside [0, block/2)");
  }
  const auto hop = static_cast<size_t>(
      std::max(1L, std::lround(static_cast<double>(n_fft) * (1.0 - opt.overlap))));
  const std::vector<double> w = hann_window(n_fft);
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  const Eigen::Index m = series.channels;

  std::vector<CMatrix> acc(bins.size(), CMatrix::Zero(m, m));
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<size_t>(n_fft));
  std::vector<Complex> spec;
  CMatrix coeffs(m, static_cast<Eigen::Index>(bins.size()));
  size_t blocks = 0;
  for (size_t start = 0; start + static_cast<size_t>(n_fft) <= series.samples; start += hop) {
    for (Eigen::Index ch = 0; ch < m; ++ch) {
      const double* x = series.channel(static_cast<int>(ch)) + start;
      for (int t = 0; t < n_fft; ++t) frame[static_cast<size_t>(t)] = w[static_cast<size_t>(t)] * x[t];
      fft.fwd(spec, frame);
      for (size_t b = 0; b < bins.size(); ++b) {
        coeffs(ch, static_cast<Eigen::Index>(b)) = spec[static_cast<size_t>(bins[b])];
      }
    }
    for (size_t b = 0; b < bins.size(); ++b) {
      const auto col = coeffs.col(static_cast<Eigen::Index>(b));
      acc[b].noalias() += col * col.adjoint();
    }
    ++blocks;
  }

  const double df = welch_resolution(series.fs, n_fft);
  std::ostringstream tag;
  tag.precision(17);
  tag << "welch:fs=" << series.fs << ":block=" << n_fft << ":overlap=" << opt.overlap
      << ":window=hann";
  std::vector<CrossSpectralMatrix> out;
  out.reserve(bins.size());
  for (size_t b = 0; b < bins.size(); ++b) {
    const int n = bins[b];
    const double scale = (n == 0 ? 1.0 : 2.0) / (series.fs * w2 * static_cast<double>(blocks));
    CrossSpectralMatrix c;
    c.frequency = Frequency{n * df, 2.0 * std::numbers::pi * n * df / opt.speed_of_sound};
    c.entries = scale * acc[b];
    c.entries = (0.5 * (c.entries + c.entries.adjoint())).eval();
    for (Eigen::Index i = 0; i < m; ++i) c.entries(i, i).imag(0.0);
    c.provenance = tag.str();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace aeroimg
