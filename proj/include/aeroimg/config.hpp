#pragma once

// Run configuration: a line-oriented `key = value` text with `[section]`
// headers and `#` comments. Every field is serialized, so
// parse_config(format_config(c)) == c.
//
//   [scene]       file (empty: built-in two-disk scene)
//   [array]       kind (grid|spiral|file), count, radius, turns, nx, ny, pitch, file
//   [medium]      c, mach, dim
//   [frequencies] list (Hz, space separated), bands (third-octave centres)
//   [estimation]  mode (exact|snapshots|welch), source_spacing, snapshots,
//                 seed, fs, duration, block, overlap, write_timeseries
//   [imaging]     methods, tau, rank_cap, band_mean, pgm
//   [grid]        origin, u, v (3 numbers each), nx, ny, spacing
//   [output]      dir, threads

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aeroimg/formats.hpp"
#include "aeroimg/imaging.hpp"
#include "aeroimg/scene.hpp"

namespace aeroimg {

struct ArraySpec {
  std::string kind = "spiral";
  int count = 64;
  double radius = 0.2;
  double turns = 3.0;
  int nx = 8;
  int ny = 8;
  double pitch = 0.05;
  std::string file;

  bool operator==(const ArraySpec&) const = default;
};

struct RunConfig {
  std::string scene_file;
  ArraySpec array;
  double speed_of_sound = 345.0;
  double mach = 0.125;
  int dim = 3;
  std::vector<double> frequencies;
  std::vector<double> bands{8000.0};
  std::string mode = "exact";
  double source_spacing = 0.01;
  int snapshots = 4096;
  std::uint64_t seed = 1;
  double fs = 120000.0;
  double duration = 30.0;
  int block = 1024;
  double overlap = 0.5;
  bool write_timeseries = false;
  std::vector<std::string> methods{"fac", "cbf", "cbfdr"};
  double tau = kDefaultTau;
  int rank_cap = 0;
  bool band_mean = false;
  bool pgm = true;
  FocusGrid grid = default_focus_grid();
  std::string output_dir = "out";
  int threads = 1;

  double resolution() const { return fs / block; }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ' ';
    s += io::fmt17(v[i]);
  }
  return s;
}

inline std::string point_text(const Point& p) {
  return io::fmt17(p[0]) + " " + io::fmt17(p[1]) + " " + io::fmt17(p[2]);
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw FormatError("config: '" + key + "' expects true/false, got '" + s + "'");
}

inline Point parse_point3(const std::string& s, const std::string& key) {
  const auto w = split_words(s);
  if (w.size() != 3) throw FormatError("config: '" + key + "' expects three numbers");
  return Point(io::parse_double(w[0], "config"), io::parse_double(w[1], "config"),
               io::parse_double(w[2], "config"));
}

}  // namespace detail

inline std::string format_config(const RunConfig& c) {
  using detail::join_doubles;
  using io::fmt17;
  std::ostringstream os;
  os << "[scene]\nfile = " << c.scene_file << "\n\n";
  os << "[array]\nkind = " << c.array.kind << "\ncount = " << c.array.count
     << "\nradius = " << fmt17(c.array.radius) << "\nturns = " << fmt17(c.array.turns)
     << "\nnx = " << c.array.nx << "\nny = " << c.array.ny << "\npitch = " << fmt17(c.array.pitch)
     << "\nfile = " << c.array.file << "\n\n";
  os << "[medium]\nc = " << fmt17(c.speed_of_sound) << "\nmach = " << fmt17(c.mach)
     << "\ndim = " << c.dim << "\n\n";
  os << "[frequencies]\nlist = " << join_doubles(c.frequencies)
     << "\nbands = " << join_doubles(c.bands) << "\n\n";
  os << "[estimation]\nmode = " << c.mode << "\nsource_spacing = " << fmt17(c.source_spacing)
     << "\nsnapshots = " << c.snapshots << "\nseed = " << c.seed << "\nfs = " << fmt17(c.fs)
     << "\nduration = " << fmt17(c.duration) << "\nblock = " << c.block
     << "\noverlap = " << fmt17(c.overlap)
     << "\nwrite_timeseries = " << (c.write_timeseries ? "true" : "false") << "\n\n";
  os << "[imaging]\nmethods =";
  for (const auto& m : c.methods) os << ' ' << m;
  os << "\ntau = " << fmt17(c.tau) << "\nrank_cap = " << c.rank_cap
     << "\nband_mean = " << (c.band_mean ? "true" : "false")
     << "\npgm = " << (c.pgm ? "true" : "false") << "\n\n";
  os << "[grid]\norigin = " << detail::point_text(c.grid.origin)
     << "\nu = " << detail::point_text(c.grid.u) << "\nv = " << detail::point_text(c.grid.v)
     << "\nnx = " << c.grid.nx << "\nny = " << c.grid.ny << "\nspacing = " << fmt17(c.grid.spacing)
     << "\n\n";
  os << "[output]\ndir = " << c.output_dir << "\nthreads = " << c.threads << "\n";
  return os.str();
}

/// Unknown sections or keys are errors; missing keys keep their defaults.
inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string section;
  std::string line;
  int lineno = 0;
  auto num = [](const std::string& v) { return io::parse_double(v, "config"); };
  auto integer = [](const std::string& v) { return static_cast<int>(io::parse_int(v, "config")); };
  auto doubles = [&](const std::string& v) {
    std::vector<double> out;
    for (const auto& w : detail::split_words(v)) out.push_back(num(w));
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(first, last - first + 1);
    if (body.front() == '[') {
      if (body.back() != ']') throw FormatError("config line " + std::to_string(lineno) + ": bad section");
      section = body.substr(1, body.size() - 2);
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string{};
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(body.substr(0, eq));
    const std::string val = trim(body.substr(eq + 1));
    const std::string full = section + "." + key;

    if (full == "scene.file") c.scene_file = val;
    else if (full == "array.kind") c.array.kind = val;
    else if (full == "array.count") c.array.count = integer(val);
    else if (full == "array.radius") c.array.radius = num(val);
    else if (full == "array.turns") c.array.turns = num(val);
    else if (full == "array.nx") c.array.nx = integer(val);
    else if (full == "array.ny") c.array.ny = integer(val);
    else if (full == "array.pitch") c.array.pitch = num(val);
    else if (full == "array.file") c.array.file = val;
    else if (full == "medium.c") c.speed_of_sound = num(val);
    else if (full == "medium.mach") c.mach = num(val);
    else if (full == "medium.dim") c.dim = integer(val);
    else if (full == "frequencies.list") c.frequencies = doubles(val);
    else if (full == "frequencies.bands") c.bands = doubles(val);
    else if (full == "estimation.mode") c.mode = val;
    else if (full == "estimation.source_spacing") c.source_spacing = num(val);
    else if (full == "estimation.snapshots") c.snapshots = integer(val);
    else if (full == "estimation.seed") c.seed = static_cast<std::uint64_t>(io::parse_int(val, "config"));
    else if (full == "estimation.fs") c.fs = num(val);
    else if (full == "estimation.duration") c.duration = num(val);
    else if (full == "estimation.block") c.block = integer(val);
    else if (full == "estimation.overlap") c.overlap = num(val);
    else if (full == "estimation.write_timeseries") c.write_timeseries = detail::parse_bool(val, full);
    else if (full == "imaging.methods") c.methods = detail::split_words(val);
    else if (full == "imaging.tau") c.tau = num(val);
    else if (full == "imaging.rank_cap") c.rank_cap = integer(val);
    else if (full == "imaging.band_mean") c.band_mean = detail::parse_bool(val, full);
    else if (full == "imaging.pgm") c.pgm = detail::parse_bool(val, full);
    else if (full == "grid.origin") c.grid.origin = detail::parse_point3(val, full);
    else if (full == "grid.u") c.grid.u = detail::parse_point3(val, full);
    else if (full == "grid.v") c.grid.v = detail::parse_point3(val, full);
    else if (full == "grid.nx") c.grid.nx = integer(val);
    else if (full == "grid.ny") c.grid.ny = integer(val);
    else if (full == "grid.spacing") c.grid.spacing = num(val);
    else if (full == "output.dir") c.output_dir = val;
    else if (full == "output.threads") c.threads = integer(val);
    else throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + full + "'");
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path.string());
  return parse_config(in);
}

/// Domain and file-existence checks; returns human-readable violations.
inline std::vector<std::string> config_violations(const RunConfig& c) {
  std::vector<std::string> v;
  if (!(c.speed_of_sound > 0.0)) v.emplace_back("speed of sound must be positive");
  if (c.mach >= 1.0) v.emplace_back("supersonic: Mach number " + io::fmt17(c.mach) + " >= 1");
  if (!(c.mach >= 0.0)) v.emplace_back("Mach number must be >= 0");
  if (c.dim != 2 && c.dim != 3) v.emplace_back("dim must be 2 or 3");
  for (double f : c.frequencies) {
    if (!(f > 0.0)) v.emplace_back("frequencies must be positive");
  }
  for (double f : c.bands) {
    if (!(f > 0.0)) v.emplace_back("band centres must be positive");
  }
  if (c.mode != "exact" && c.mode != "snapshots" && c.mode != "welch") {
    v.push_back("unknown estimation mode '" + c.mode + "'");
  }
  if (!(c.source_spacing > 0.0)) v.emplace_back("source_spacing must be positive");
  if (c.snapshots < 1) v.emplace_back("snapshots must be >= 1");
  if (!(c.fs > 0.0)) v.emplace_back("fs must be positive");
  if (c.block < 4 || c.block % 2 != 0) v.emplace_back("block must be even and >= 4");
  if (!(c.overlap >= 0.0 && c.overlap < 1.0)) v.emplace_back("overlap must lie in [0, 1)");
  if (c.mode == "welch" && !(c.duration * c.fs >= 2.0 * c.block)) {
    v.emplace_back("duration shorter than two blocks");
  }
  for (const auto& m : c.methods) {
    if (m != "fac" && m != "capon" && m != "cbf" && m != "cbfdr") {
      v.push_back("unknown imaging method '" + m + "'");
    }
  }
  if (!(c.tau >= 0.0)) v.emplace_back("tau must be >= 0");
  if (c.rank_cap < 0) v.emplace_back("rank_cap must be >= 0");
  if (c.threads < 1) v.emplace_back("threads must be >= 1");
  if (!c.scene_file.empty() && !std::filesystem::exists(c.scene_file)) {
    v.push_back("scene file not found: " + c.scene_file);
  }
  if (c.array.kind == "file") {
    if (!std::filesystem::exists(c.array.file)) v.push_back("array file not found: " + c.array.file);
  } else if (c.array.kind != "grid" && c.array.kind != "spiral") {
    v.push_back("unknown array kind '" + c.array.kind + "'");
  }
  return v;
}

inline SourceScene build_scene(const RunConfig& c) {
  if (c.scene_file.empty()) {
    if (c.dim != 3) throw DomainError("the built-in scene is three-dimensional");
    return default_scene();
  }
  SourceScene s = load_scene(c.scene_file);
  if (s.dim() != c.dim) throw DomainError("scene dimension differs from medium dim");
  return s;
}

inline ArrayGeometry build_array(const RunConfig& c) {
  if (c.array.kind == "spiral") {
    if (c.dim != 3) throw DomainError("spiral arrays need dim = 3");
    return make_spiral_array(c.array.count, c.array.radius, c.array.turns);
  }
  if (c.array.kind == "grid") return make_grid_array(c.array.nx, c.array.ny, c.array.pitch, c.dim);
  if (c.array.kind == "file") return load_array(c.array.file, c.dim);
  throw DomainError("unknown array kind '" + c.array.kind + "'");
}

}  // namespace aeroimg
