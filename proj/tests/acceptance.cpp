// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "aeroimg/commands.hpp"

using namespace aeroimg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CVector random_vector(RandomStream& rng, Eigen::Index m) {
  CVector v(m);
  for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.complex_normal();
  return v;
}

CMatrix random_psd(RandomStream& rng, Eigen::Index m, Eigen::Index rank) {
  CMatrix a(m, rank);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.complex_normal();
  return a * a.adjoint();
}

double rel_frob(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

const MediumParams kFlow(345.0, 0.125, 3);
const double kDf = 120000.0 / 1024.0;

ArrayGeometry spiral64() { return make_spiral_array(64, 0.2, 3.0); }

// ---------------------------------------------------------------------------

Outcome band_counts() {
  const int a = band_bin_count(third_octave_band(8000.0), kDf);
  const int b = band_bin_count(third_octave_band(12000.0), kDf);
  const int c = band_bin_count(third_octave_band(16000.0), kDf);
  return {a == 16 && b == 23 && c == 32,
          "counts (" + std::to_string(a) + ", " + std::to_string(b) + ", " + std::to_string(c) + ")"};
}

Outcome greens_reduction() {
  RandomStream rng(101, "acceptance-greens");
  const MediumParams m3(343.0, 0.0, 3), m2(343.0, 0.0, 2);
  double worst3 = 0, worst2 = 0;
  for (int t = 0; t < 1000; ++t) {
    Point x(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2);
    Point y(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2);
    const double k = 0.1 + 40 * rng.uniform();
    const Frequency f{k * 343.0 / (2 * std::numbers::pi), k};
    const double r = (x - y).norm();
    const Complex ref3 = std::exp(Complex(0, k * r)) / (4 * std::numbers::pi * r);
    worst3 = std::max(worst3, std::abs(greens(x, y, f, m3) - ref3) / std::abs(ref3));
    x[2] = y[2] = 0.0;
    const double r2 = (x - y).norm();
    const Complex ref2 = Complex(0, 0.25) * Complex(std::cyl_bessel_j(0.0, k * r2),
                                                    std::cyl_neumann(0.0, k * r2));
    worst2 = std::max(worst2, std::abs(greens(x, y, f, m2) - ref2) / std::abs(ref2));
  }
  // Tabulated high-precision values.
  std::ifstream in(AEROIMG_FIXTURE_FILE);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, j0, y0;
    ls >> t >> j0 >> y0;
    const double k = 2.0;
    const Frequency f{k * 343.0 / (2 * std::numbers::pi), k};
    const Point x(0.3, 0.1, 0.0);
    const Point y = x + Point(0.8, -0.6, 0.0) * (t / k);
    const Complex ref = Complex(0, 0.25) * Complex(j0, y0);
    worst2 = std::max(worst2, std::abs(greens(x, y, f, m2) - ref) / std::abs(ref));
    ++rows;
  }
  return {rows > 60 && worst3 <= 1e-12 && worst2 <= 1e-9,
          "d=3 max rel err " + num(worst3) + ", d=2 max rel err " + num(worst2) + " (" +
              std::to_string(rows) + " tabulated points)"};
}

Outcome pde_residual_order() {
  RandomStream rng(102, "acceptance-pde");
  double worst = 1e9;
  for (int dim : {3, 2}) {
    const MediumParams m(345.0, 0.125, dim);
    const Frequency f{5.0 * 345.0 / (2 * std::numbers::pi), 5.0};
    for (int p = 0; p < 10; ++p) {
      const Point y(rng.uniform() - 0.5, rng.uniform() - 0.5, dim == 3 ? rng.uniform() - 0.5 : 0.0);
      Point dir(rng.normal(), rng.normal(), dim == 3 ? rng.normal() : 0.0);
      dir.normalize();
      const Point x = y + (0.5 + 1.5 * rng.uniform()) * dir;
      const ScalarField field = [&](const Point& z) { return greens(z, y, f, m); };
      const double r1 = pde_residual(field, x, f, m, 1e-2);
      const double r2 = pde_residual(field, x, f, m, 5e-3);
      const double r3 = pde_residual(field, x, f, m, 2.5e-3);
      worst = std::min({worst, std::log2(r1 / r2), std::log2(r2 / r3)});
    }
  }
  return {worst >= 1.9, "minimum observed order " + num(worst) + " over 10 points in d=3 and d=2"};
}

Outcome capon_fac_identity() {
  RandomStream rng(103, "acceptance-capon-fac");
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.uniform() * 31);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng.uniform() * m);
    const CMatrix c = random_psd(rng, m, rank);
    const CVector g = random_vector(rng, m);
    const EigenSystem e = eig_hermitian(c);
    const double cap = capon_value(e, g);
    worst = std::max(worst, std::abs(fac_value(e, g) - cap) / cap);
  }
  return {worst <= 1e-10, "max relative difference " + num(worst)};
}

Outcome capon_optimality() {
  RandomStream rng(104, "acceptance-capon-opt");
  double worst_gap = 0;  // max of (cap − w*Cw)/|cap|
  double worst_gain = 0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index m = 4 + t % 13;
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng.uniform() * m);
    const CMatrix c = random_psd(rng, m, rank);
    const CVector g = c * random_vector(rng, m);  // in range(C)
    const EigenSystem e = eig_hermitian(c);
    const double cap = capon_value(e, g);
    const CVector w = capon_steering(e, g);
    worst_gain = std::max(worst_gain, std::abs((w.adjoint() * g)(0, 0) - 1.0));
    const double g2 = g.squaredNorm();
    for (int s = 0; s < 200; ++s) {
      const CVector r = random_vector(rng, m) * std::exp(rng.normal());
      const CVector v = g / g2 + (r - g * (g.adjoint() * r)(0, 0) / g2);
      const double q = (v.adjoint() * c * v)(0, 0).real();
      worst_gap = std::max(worst_gap, (cap - q) / std::abs(cap));
    }
  }
  return {worst_gap <= 1e-10 && worst_gain <= 1e-10,
          "max (capon − w*Cw)/capon " + num(worst_gap) + ", max |w*g − 1| " + num(worst_gain)};
}

Outcome rank_one() {
  const auto arr = spiral64();
  const Frequency f = wavenumber(8000.0, kFlow);
  const Point z(0.05, -0.03, 0.75);
  const CVector g = steering_vector(z, arr.positions(), f, kFlow).values;
  const CMatrix c = 2.0 * g * g.adjoint();
  const EigenSystem e = eig_hermitian(c);
  const double v[4] = {fac_value(e, g), capon_value(e, g), cbf_value(c, g), cbf_dr_value(c, g)};
  double worst = 0;
  for (double x : v) worst = std::max(worst, std::abs(x - 2.0) / 2.0);
  return {worst <= 1e-10, "fac " + num(v[0]) + ", capon " + num(v[1]) + ", cbf " + num(v[2]) +
                              ", cbf_dr " + num(v[3]) + "; max rel err " + num(worst)};
}

Outcome snapshot_consistency() {
  const auto arr = spiral64();
  const auto scene = default_scene();
  const Frequency f = wavenumber(69 * kDf, kFlow);
  const CMatrix exact = exact_csm(scene, arr, f, kFlow, 0.01).entries;
  const int sizes[4] = {64, 256, 1024, 4096};
  const std::uint64_t seed = 2024;
  const int replicas = 8;
  double primary[4], sigma[4];
  for (int i = 0; i < 4; ++i) {
    primary[i] =
        rel_frob(sample_csm(synthesize_snapshots(scene, arr, f, kFlow, 0.01, sizes[i], seed)).entries,
                 exact);
    double s1 = 0, s2 = 0;
    for (int r = 0; r < replicas; ++r) {
      const double e = rel_frob(
          sample_csm(synthesize_snapshots(scene, arr, f, kFlow, 0.01, sizes[i], seed, 1, 100 + r))
              .entries,
          exact);
      s1 += e;
      s2 += e * e;
    }
    const double mean = s1 / replicas;
    sigma[i] = std::sqrt(std::max(0.0, s2 / replicas - mean * mean) * replicas / (replicas - 1));
  }
  bool monotone = true;
  for (int i = 0; i + 1 < 4; ++i) {
    const double band = 3 * std::sqrt(sigma[i] * sigma[i] + sigma[i + 1] * sigma[i + 1]);
    monotone = monotone && primary[i + 1] <= primary[i] + band;
  }
  std::string detail = "errors";
  for (int i = 0; i < 4; ++i) detail += " S=" + std::to_string(sizes[i]) + ":" + num(primary[i]);
  detail += monotone ? ", decreasing within 3 sigma" : ", NOT decreasing";
  return {primary[3] <= 0.05 && monotone, detail};
}

Outcome welch_consistency() {
  const auto arr = make_grid_array(4, 4, 0.05, 3);
  const auto scene = default_scene();
  TimeSeriesOptions opt;
  opt.fs = 48000.0;
  opt.duration = 60.0;
  opt.block = 1024;
  opt.seed = 2025;
  const TimeSeries ts = synthesize_timeseries(scene, arr, kFlow, opt);
  WelchOptions w;
  w.block = 1024;
  w.overlap = 0.5;
  const auto all = welch_csm(ts, w);
  const double df = opt.fs / opt.block;
  double worst_bin = 0;
  std::string detail = "bins";
  for (int n : {43, 85, 128}) {
    const auto& c = all[static_cast<size_t>(n)];
    const double e = rel_frob(c.entries, exact_csm(scene, arr, wavenumber(n * df, kFlow), kFlow, 0.01).entries);
    worst_bin = std::max(worst_bin, e);
    detail += " " + num(n * df) + "Hz:" + num(e);
  }
  double worst_parseval = 0;
  for (int ch = 0; ch < ts.channels; ++ch) {
    double s = 0;
    for (const auto& c : all) s += c.entries(ch, ch).real() * df;
    double var = 0;
    const double* x = ts.channel(ch);
    for (size_t t = 0; t < ts.samples; ++t) var += x[t] * x[t];
    var /= static_cast<double>(ts.samples);
    worst_parseval = std::max(worst_parseval, std::abs(s / var - 1.0));
  }
  detail += ", Parseval max rel dev " + num(worst_parseval);
  return {worst_bin <= 0.1 && worst_parseval <= 0.05, detail};
}

Outcome support_recovery() {
  const auto arr = spiral64();
  const auto scene = default_scene();
  const FocusGrid grid = default_focus_grid();
  std::vector<SourceMap> maps;
  for (int n : band_bins(third_octave_band(8000.0), kDf)) {
    const Frequency f = wavenumber(n * kDf, kFlow);
    const auto c = sample_csm(synthesize_snapshots(scene, arr, f, kFlow, 0.01, 4096, 2026, 1,
                                                   static_cast<std::uint64_t>(n)));
    maps.push_back(compute_map(Method::fac, c, arr, grid, f, kFlow));
  }
  const SourceMap band = band_average(maps, band_tag(8000.0));
  const auto m = contrast_metric(band, support_mask(scene, grid, SupportKind::inner),
                                 support_mask(scene, grid, SupportKind::outer));
  return {m.ratio >= 10.0 && m.jaccard_at_half >= 0.5,
          "16 bins, S=4096: contrast ratio " + num(m.ratio) + ", jaccard " + num(m.jaccard_at_half)};
}

Outcome picard_contrast() {
  const auto arr = spiral64();
  const auto scene = default_scene();
  const FocusGrid grid = default_focus_grid();
  const Frequency f = wavenumber(8000.0, kFlow);
  const EigenSystem e = eig_hermitian(exact_csm(scene, arr, f, kFlow, 0.01));
  auto final_sum = [&](const Point& z) {
    return picard_partial_sums(e, steering_vector(z, arr.positions(), f, kFlow).values).back();
  };
  // Distance from z to the union of the disks.
  auto gap = [&](const Point& z) {
    double d = 1e9;
    for (const auto& p : scene.primitives()) d = std::min(d, (z - p.center).norm() - p.radius);
    return d;
  };
  std::vector<double> outside;
  for (const auto& p : scene.primitives()) {
    for (int a = 0; a < 16; ++a) {
      const double th = 2 * std::numbers::pi * a / 16;
      const Point z = p.center + (p.radius + 0.1) * Point(std::cos(th), std::sin(th), 0.0);
      if (gap(z) >= 0.1 - 1e-12) outside.push_back(final_sum(z));
    }
  }
  const Mask inner = support_mask(scene, grid, SupportKind::inner);
  std::vector<double> inside;
  for (size_t k = 0; k < grid.size(); ++k) {
    if (inner[k]) inside.push_back(final_sum(grid.node(k)));
  }
  std::nth_element(inside.begin(), inside.begin() + inside.size() / 2, inside.end());
  const double median = inside[inside.size() / 2];
  const double low = *std::min_element(outside.begin(), outside.end());
  return {low >= 100.0 * median, std::to_string(outside.size()) + " outside points, min ratio to inside median " +
                                     num(low / median)};
}

Outcome equivalences() {
  RandomStream rng(105, "acceptance-equiv");
  double worst_eig = 0, worst_full = 0, worst_off = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.uniform() * 31);
    const CMatrix c = random_psd(rng, m, m);
    const CVector g = random_vector(rng, m);
    const double cbf = cbf_value(c, g);
    const double dr = cbf_dr_value(c, g);
    worst_eig = std::max(worst_eig, std::abs(cbf_value_eigen(eig_hermitian(c, {0.0, 0}), g) - cbf) / cbf);
    worst_full = std::max(worst_full,
                          std::abs(least_squares_form(c, g, LeastSquaresVariant::full) - cbf) / cbf);
    worst_off = std::max(
        worst_off, std::abs(least_squares_form(c, g, LeastSquaresVariant::offdiag) - dr) / std::abs(dr));
  }
  return {worst_eig <= 1e-12 && worst_full <= 1e-12 && worst_off <= 1e-12,
          "max rel diff: cbf eigen-form " + num(worst_eig) + ", least-squares full " +
              num(worst_full) + ", off-diagonal " + num(worst_off)};
}

Outcome determinism_roundtrip() {
  const fs::path root = fs::temp_directory_path() / "aeroimg_acceptance";
  fs::remove_all(root);
  RunConfig cfg;
  cfg.array.kind = "grid";
  cfg.array.nx = 4;
  cfg.array.ny = 4;
  cfg.mode = "snapshots";
  cfg.snapshots = 256;
  cfg.seed = 77;
  cfg.methods = {"fac", "cbfdr"};
  cfg.grid.nx = 31;
  cfg.grid.ny = 21;
  cfg.grid.spacing = 0.02;
  std::ostringstream sink;
  std::vector<fs::path> dirs{root / "a", root / "b", root / "c"};
  const int threads[3] = {1, 1, 3};
  for (int i = 0; i < 3; ++i) {
    cfg.output_dir = dirs[i].string();
    cfg.threads = threads[i];
    if (cmd_synth(cfg, sink, sink) != 0 || cmd_image(cfg, sink, sink) != 0) {
      return {false, "pipeline failed: " + sink.str()};
    }
  }
  int compared = 0;
  bool identical = true;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto name = entry.path().filename();
    if (name == "run.cfg") continue;  // records output_dir and threads
    for (int i = 1; i < 3; ++i) identical = identical && io::read_file(dirs[0] / name) == io::read_file(dirs[i] / name);
    ++compared;
  }

  // Writer/reader pairs.
  bool roundtrip = true;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto& p = entry.path();
    if (p.extension() == ".aerocsm") {
      const auto c = read_csm(p, cfg.speed_of_sound);
      roundtrip = roundtrip && format_csm(c) == io::read_file(p);
      write_csm(root / "x.aerocsm", c);
      roundtrip = roundtrip && read_csm(root / "x.aerocsm", cfg.speed_of_sound).entries == c.entries;
    } else if (p.extension() == ".aeromap") {
      const auto m = read_map(p);
      roundtrip = roundtrip && format_map(m) == io::read_file(p);
      write_map(root / "x.aeromap", m);
      roundtrip = roundtrip && read_map(root / "x.aeromap").values == m.values;
    }
  }
  TimeSeriesOptions to;
  to.fs = 8000;
  to.duration = 0.5;
  to.block = 256;
  const TimeSeries ts = synthesize_timeseries(default_scene(), make_grid_array(2, 2, 0.05, 3), kFlow, to);
  write_timeseries(root / "x.aerots", ts);
  const TimeSeries back = read_timeseries(root / "x.aerots");
  roundtrip = roundtrip && back.samples == ts.samples && back.channels == ts.channels &&
              std::memcmp(back.data.data(), ts.data.data(), ts.data.size() * 8) == 0;
  std::istringstream cin_cfg(format_config(cfg));
  roundtrip = roundtrip && parse_config(cin_cfg) == cfg;
  fs::remove_all(root);
  return {identical && roundtrip && compared > 0,
          std::to_string(compared) + " files compared across 3 runs (1 and 3 threads): " +
              (identical ? "bit-identical" : "DIFFERENT") + "; round trips " +
              (roundtrip ? "exact" : "FAILED")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "band-count reproduction", 1, band_counts},
      {2, "Green's function reduction", 5, greens_reduction},
      {3, "PDE residual order", 10, pde_residual_order},
      {4, "Capon = factorization identity", 10, capon_fac_identity},
      {5, "Capon optimality", 30, capon_optimality},
      {6, "rank-1 identities", 1, rank_one},
      {7, "snapshot consistency", 120, snapshot_consistency},
      {8, "Welch consistency", 180, welch_consistency},
      {9, "support recovery", 300, support_recovery},
      {10, "Picard dichotomy contrast", 60, picard_contrast},
      {11, "equivalence suite", 10, equivalences},
      {12, "determinism and round trip", 60, determinism_roundtrip},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
              << " (" << num(secs) << " s, budget " << c.budget_s << " s"
              << (in_time ? "" : ", OVER BUDGET") << ")" << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : "acceptance failures: " + std::to_string(failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
