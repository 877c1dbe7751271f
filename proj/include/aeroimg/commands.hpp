#pragma once

// Subcommand drivers shared by the CLI and the tests. Each returns a process
// exit code and writes human-readable output to `out` / `err`.

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "aeroimg/config.hpp"
#include "aeroimg/estimation.hpp"
#include "aeroimg/formats.hpp"
#include "aeroimg/greens.hpp"
#include "aeroimg/imaging.hpp"
#include "aeroimg/rng.hpp"
#include "aeroimg/specialfn.hpp"

namespace aeroimg {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2, kExitNumerical = 3 };

/// One frequency at which a CSM is produced or consumed.
struct Target {
  double hz = 0.0;
  int bin = -1;                 // index on the Δf grid, -1 for listed frequencies
  std::uint64_t stream = 0;     // random substream
};

inline std::vector<Target> collect_targets(const RunConfig& cfg) {
  std::vector<Target> out;
  const double df = cfg.resolution();
  for (size_t i = 0; i < cfg.frequencies.size(); ++i) {
    out.push_back({cfg.frequencies[i], -1, (std::uint64_t{1} << 31) + i});
  }
  for (double fc : cfg.bands) {
    for (int n : band_bins(third_octave_band(fc), df)) {
      bool seen = false;
      for (const auto& t : out) seen = seen || t.bin == n;
      if (!seen) out.push_back({n * df, n, static_cast<std::uint64_t>(n)});
    }
  }
  return out;
}

inline std::filesystem::path csm_path(const RunConfig& cfg, double hz) {
  return std::filesystem::path(cfg.output_dir) / ("csm_" + frequency_tag(hz) + ".aerocsm");
}

inline std::string band_tag(double fc) { return "band" + frequency_tag(fc); }

inline MediumParams build_medium(const RunConfig& cfg) {
  return MediumParams(cfg.speed_of_sound, cfg.mach, cfg.dim);
}

namespace detail {

/// Maps exceptions to exit codes: format/file problems are I/O errors,
/// domain violations are validation failures.
inline int run_guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

inline bool report_violations(const std::vector<std::string>& v, std::ostream& err) {
  for (const auto& s : v) err << "violation: " << s << "\n";
  return !v.empty();
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Collects config, medium, scene and array violations.
inline std::vector<std::string> validation_report(const RunConfig& cfg) {
  std::vector<std::string> v = config_violations(cfg);
  if (!v.empty()) return v;
  try {
    (void)build_medium(cfg);
    const SourceScene scene = build_scene(cfg);
    const ArrayGeometry array = build_array(cfg);
    const GeometryReport rep = validate_geometry(array, scene);
    v.insert(v.end(), rep.violations.begin(), rep.violations.end());
    cfg.grid.validate(cfg.dim);
  } catch (const std::exception& e) {
    v.emplace_back(e.what());
  }
  return v;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const auto v = validation_report(cfg);
  for (const auto& s : v) out << "violation: " << s << "\n";
  if (v.empty()) out << "ok\n";
  return v.empty() ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------

inline int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return detail::run_guarded(err, [&]() -> int {
    if (detail::report_violations(validation_report(cfg), err)) return kExitValidation;
    const MediumParams medium = build_medium(cfg);
    const SourceScene scene = build_scene(cfg);
    const ArrayGeometry array = build_array(cfg);
    const std::vector<Target> targets = collect_targets(cfg);
    const double df = cfg.resolution();
    std::vector<std::string> warnings;

    out << "mode " << cfg.mode << "\n";
    out << "microphones " << array.size() << "\n";
    out << "seed " << cfg.seed << "\n";
    size_t written = 0;
    auto emit = [&](const CrossSpectralMatrix& c) {
      if (!c.entries.allFinite()) throw std::runtime_error("non-finite CSM entry");
      const auto path = csm_path(cfg, c.frequency.hz);
      write_csm(path, c);
      ++written;
      out << "wrote " << path.filename().string() << " provenance " << c.provenance << "\n";
    };

    if (cfg.mode == "exact" || cfg.mode == "snapshots") {
      if (targets.empty()) throw DomainError("no frequencies or bands requested");
      for (const Target& t : targets) {
        const Frequency f = wavenumber(t.hz, medium);
        if (cfg.mode == "exact") {
          emit(exact_csm(scene, array, f, medium, cfg.source_spacing, cfg.threads, &warnings));
        } else {
          emit(sample_csm(synthesize_snapshots(scene, array, f, medium, cfg.source_spacing,
                                               cfg.snapshots, cfg.seed, cfg.threads, t.stream)));
        }
      }
    } else {
      TimeSeriesOptions ts_opt;
      ts_opt.fs = cfg.fs;
      ts_opt.duration = cfg.duration;
      ts_opt.block = cfg.block;
      ts_opt.src_spacing = cfg.source_spacing;
      ts_opt.seed = cfg.seed;
      ts_opt.threads = cfg.threads;
      const TimeSeries ts = synthesize_timeseries(scene, array, medium, ts_opt);
      if (cfg.write_timeseries) {
        const auto path = std::filesystem::path(cfg.output_dir) / "timeseries.aerots";
        write_timeseries(path, ts);
        out << "wrote " << path.filename().string() << "\n";
      }
      WelchOptions w_opt;
      w_opt.block = cfg.block;
      w_opt.overlap = cfg.overlap;
      w_opt.speed_of_sound = cfg.speed_of_sound;
      w_opt.warnings = &warnings;
      for (const Target& t : targets) {
        int n = t.bin;
        if (n < 0) {
          n = static_cast<int>(std::lround(t.hz / df));
          if (std::abs(n * df - t.hz) > 1e-9 * t.hz) {
            warnings.push_back("frequency " + frequency_tag(t.hz) + " Hz snapped to bin " +
                               std::to_string(n));
          }
        }
        w_opt.bins.push_back(n);
      }
      out << "retained bins " << cfg.block / 2 << " below Nyquist, resolution "
          << frequency_tag(df) << " Hz\n";
      for (const auto& c : welch_csm(ts, w_opt)) emit(c);
    }
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    io::atomic_write(std::filesystem::path(cfg.output_dir) / "run.cfg", format_config(cfg));
    out << "files " << written << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct ImageSummary {
  std::string method;
  std::string tag;
  ContrastMetric contrast;
  bool has_contrast = false;
  size_t sentinels = 0;
};

inline int cmd_image(const RunConfig& cfg, std::ostream& out, std::ostream& err,
                     std::vector<ImageSummary>* summary = nullptr) {
  return detail::run_guarded(err, [&]() -> int {
    if (detail::report_violations(validation_report(cfg), err)) return kExitValidation;
    const MediumParams medium = build_medium(cfg);
    const SourceScene scene = build_scene(cfg);
    const ArrayGeometry array = build_array(cfg);
    const double df = cfg.resolution();

    // Groups of CSMs: one per band plus one per listed frequency.
    struct Group {
      std::string tag;
      std::vector<double> hz;
    };
    std::vector<Group> groups;
    bool missing_any = false;
    for (double fc : cfg.bands) {
      const BandSpec band = third_octave_band(fc);
      const std::vector<int> bins = band_bins(band, df);
      Group g{band_tag(fc), {}};
      std::vector<std::string> missing;
      for (int n : bins) {
        g.hz.push_back(n * df);
        if (!std::filesystem::exists(csm_path(cfg, n * df))) {
          missing.push_back(csm_path(cfg, n * df).filename().string());
        }
      }
      if (!missing.empty()) {
        missing_any = true;
        err << "error: band " << frequency_tag(fc) << " Hz expects " << band_bin_count(band, df)
            << " CSM files (bins " << (bins.empty() ? 0 : bins.front()) << ".."
            << (bins.empty() ? -1 : bins.back()) << ", resolution " << frequency_tag(df)
            << " Hz); missing " << missing.size() << ":";
        for (const auto& m : missing) err << " " << m;
        err << "\n";
      }
      groups.push_back(std::move(g));
    }
    for (double f : cfg.frequencies) {
      if (!std::filesystem::exists(csm_path(cfg, f))) {
        missing_any = true;
        err << "error: missing " << csm_path(cfg, f).filename().string() << "\n";
      }
      groups.push_back({frequency_tag(f), {f}});
    }
    if (missing_any) return kExitIo;

    const Mask inner = support_mask(scene, cfg.grid, SupportKind::inner);
    const Mask outer = support_mask(scene, cfg.grid, SupportKind::outer);
    const bool masks_ok = std::count(inner.begin(), inner.end(), true) > 0;

    MapOptions opt;
    opt.threads = cfg.threads;
    opt.eigen.tau = cfg.tau;
    opt.eigen.rank_cap = cfg.rank_cap;

    for (const Group& g : groups) {
      std::vector<CrossSpectralMatrix> csms;
      for (double hz : g.hz) {
        csms.push_back(read_csm(csm_path(cfg, hz), cfg.speed_of_sound));
        if (static_cast<size_t>(csms.back().size()) != array.size()) {
          throw FormatError(csm_path(cfg, hz).string() + ": CSM size does not match the array");
        }
      }
      for (const std::string& name : cfg.methods) {
        const Method method = parse_method(name);
        std::vector<SourceMap> maps;
        for (const auto& c : csms) {
          const Frequency f = wavenumber(c.frequency.hz, medium);
          maps.push_back(compute_map(method, c, array, cfg.grid, f, medium, opt));
        }
        const SourceMap raw = band_average(maps, g.tag, cfg.band_mean);
        for (double v : raw.values) {
          if (!std::isfinite(v)) {
            err << "error: non-finite value in " << name << " map " << g.tag << "\n";
            return kExitNumerical;
          }
        }
        ImageSummary s{name, g.tag, {}, false, raw.kernel_sentinels + raw.degenerate_sentinels};
        out << name << " " << g.tag << " frequencies " << maps.size();
        if (masks_ok) {
          s.contrast = contrast_metric(raw, inner, outer);
          s.has_contrast = true;
          out << " contrast " << io::fmt17(s.contrast.ratio) << " jaccard "
              << io::fmt17(s.contrast.jaccard_at_half);
        }
        out << " sentinels " << s.sentinels << "\n";
        bool constant = false;
        const SourceMap norm = normalize_map(raw, &constant);
        if (constant) err << "warning: " << name << " map " << g.tag << " is constant\n";
        const auto stem = std::filesystem::path(cfg.output_dir) / ("map_" + name + "_" + g.tag);
        write_map(stem.string() + ".aeromap", norm);
        if (cfg.pgm) write_pgm(stem.string() + ".pgm", norm);
        if (summary) summary->push_back(s);
      }
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline SuiteResult suite_specialfn(const std::filesystem::path& fixtures) {
  SuiteResult r{"specialfn", false, ""};
  std::ifstream in(fixtures);
  if (!in) {
    r.detail = "cannot open " + fixtures.string();
    return r;
  }
  std::string line;
  int rows = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x = 0, j0 = 0, y0 = 0;
    if (!(ls >> x >> j0 >> y0)) {
      r.detail = "malformed fixture row: " + line;
      return r;
    }
    // Absolute error up to x = 8, relative beyond.
    auto err = [x](double got, double want) {
      const double scale = x > 8.0 ? std::max(std::abs(want), 1e-2) : 1.0;
      return std::abs(got - want) / scale;
    };
    worst = std::max({worst, err(specialfn::bessel_j0(x), j0), err(specialfn::bessel_y0(x), y0)});
    ++rows;
  }
  r.passed = rows > 0 && worst <= 1e-9;
  r.detail = std::to_string(rows) + " rows, worst error " + io::fmt17(worst);
  return r;
}

inline SuiteResult suite_greens() {
  SuiteResult r{"greens", false, ""};
  RandomStream rng(2024, "selftest-greens");
  double worst3 = 0.0, worst2 = 0.0;
  const MediumParams m3(343.0, 0.0, 3), m2(343.0, 0.0, 2);
  for (int i = 0; i < 200; ++i) {
    const Point x(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
    const Point y(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
    const double k = 0.5 + 20.0 * rng.uniform();
    const Frequency f{k * 343.0 / (2 * std::numbers::pi), k};
    const double rr = (x - y).norm();
    const Complex ref3 = std::exp(Complex(0, k * rr)) / (4 * std::numbers::pi * rr);
    worst3 = std::max(worst3, std::abs(greens(x, y, f, m3) - ref3) / std::abs(ref3));
    const Point x2(x[0], x[1], 0), y2(y[0], y[1], 0);
    const double r2 = (x2 - y2).norm();
    const Complex ref2 = Complex(0, 0.25) * Complex(std::cyl_bessel_j(0.0, k * r2),
                                                    std::cyl_neumann(0.0, k * r2));
    worst2 = std::max(worst2, std::abs(greens(x2, y2, f, m2) - ref2) / std::abs(ref2));
  }
  r.passed = worst3 <= 1e-12 && worst2 <= 1e-9;
  r.detail = "d=3 worst " + io::fmt17(worst3) + ", d=2 worst " + io::fmt17(worst2);
  return r;
}

inline SuiteResult suite_capon_fac() {
  SuiteResult r{"capon-fac", false, ""};
  RandomStream rng(2024, "selftest-capon");
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int m = 2 + t % 15;
    CMatrix a(m, m);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.complex_normal();
    const CMatrix c = a * a.adjoint();
    CVector g(m);
    for (Eigen::Index i = 0; i < m; ++i) g[i] = rng.complex_normal();
    const EigenSystem eig = eig_hermitian(c);
    const double cap = capon_value(eig, g);
    worst = std::max(worst, std::abs(fac_value(eig, g) - cap) / cap);
  }
  r.passed = worst <= 1e-10;
  r.detail = "worst relative difference " + io::fmt17(worst);
  return r;
}

inline SuiteResult suite_band_counts() {
  SuiteResult r{"band-counts", false, ""};
  const double df = 120000.0 / 1024.0;
  const int a = band_bin_count(third_octave_band(8000.0), df);
  const int b = band_bin_count(third_octave_band(12000.0), df);
  const int c = band_bin_count(third_octave_band(16000.0), df);
  r.passed = a == 16 && b == 23 && c == 32;
  r.detail = "(" + std::to_string(a) + ", " + std::to_string(b) + ", " + std::to_string(c) + ")";
  return r;
}

}  // namespace detail

inline std::vector<SuiteResult> run_selftest(const std::filesystem::path& fixtures) {
  std::vector<std::function<SuiteResult()>> suites{
      [&] { return detail::suite_specialfn(fixtures); },
      detail::suite_greens,
      detail::suite_capon_fac,
      detail::suite_band_counts,
  };
  const char* names[] = {"specialfn", "greens", "capon-fac", "band-counts"};
  std::vector<SuiteResult> results;
  for (size_t i = 0; i < suites.size(); ++i) {
    try {
      results.push_back(suites[i]());
    } catch (const std::exception& e) {
      results.push_back({names[i], false, std::string("exception: ") + e.what()});
    }
  }
  return results;
}

inline int cmd_selftest(const std::filesystem::path& fixtures, std::ostream& out) {
  bool all = true;
  for (const auto& r : run_selftest(fixtures)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  return all ? kExitOk : kExitValidation;
}

}  // namespace aeroimg
