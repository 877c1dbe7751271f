#pragma once

// File formats:
//
//   AEROCSM  text   header `AEROCSM v1 M <M> f <Hz> provenance <tag>`, then M
//                   rows of M `re im` pairs, 17 significant digits.
//   AEROTS   binary header line `AEROTS v1 M <M> fs <Hz> N <samples>`, then
//                   channel-major little-endian IEEE-754 doubles.
//   AEROMAP  text   header `AEROMAP v1 method <tag> f <Hz|band<fc>> nx <nx>
//                   ny <ny> spacing <m>`, a `# origin ... u ... v ...` line,
//                   then ny rows of nx values, 17 significant digits.
//   PGM      binary P5 graymap, maxval 65535, big-endian samples; the first
//                   image row is the grid row with the largest j.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <system_error>

#include "aeroimg/estimation.hpp"
#include "aeroimg/imaging.hpp"
#include "aeroimg/types.hpp"

namespace aeroimg {

namespace io {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok, const char* what) {
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string(what) + ": bad number '" + tok + "'");
  }
}

inline long long parse_int(const std::string& tok, const char* what) {
  try {
    size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string(what) + ": bad integer '" + tok + "'");
  }
}

inline void expect(std::istream& in, const std::string& word, const char* what) {
  std::string tok;
  if (!(in >> tok) || tok != word) {
    throw FormatError(std::string(what) + ": expected '" + word + "', got '" + tok + "'");
  }
}

inline std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw FormatError(std::string(what) + ": unexpected end of input");
  return tok;
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("rename failed: " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace io

// ---------------------------------------------------------------------------
// Cross-spectral matrices

inline std::string format_csm(const CrossSpectralMatrix& c) {
  std::string out = "AEROCSM v1 M " + std::to_string(c.size()) + " f " +
                    io::fmt17(c.frequency.hz) + " provenance " + c.provenance + "\n";
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      if (j > 0) out += ' ';
      out += io::fmt17(c.entries(i, j).real());
      out += ' ';
      out += io::fmt17(c.entries(i, j).imag());
    }
    out += '\n';
  }
  return out;
}

/// The wavenumber is reattached from the stored frequency and `speed_of_sound`.
inline CrossSpectralMatrix parse_csm(std::istream& in, double speed_of_sound) {
  constexpr const char* what = "AEROCSM";
  io::expect(in, "AEROCSM", what);
  io::expect(in, "v1", what);
  io::expect(in, "M", what);
  const long long m = io::parse_int(io::next_token(in, what), what);
  if (m < 0) throw FormatError("AEROCSM: negative size");
  io::expect(in, "f", what);
  const double f = io::parse_double(io::next_token(in, what), what);
  io::expect(in, "provenance", what);
  CrossSpectralMatrix c;
  c.provenance = io::next_token(in, what);
  c.frequency = Frequency{f, 2.0 * std::numbers::pi * f / speed_of_sound};
  c.entries.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double re = io::parse_double(io::next_token(in, what), what);
      const double im = io::parse_double(io::next_token(in, what), what);
      c.entries(i, j) = Complex(re, im);
    }
  }
  std::string extra;
  if (in >> extra) throw FormatError("AEROCSM: trailing data");
  return c;
}

inline void write_csm(const std::filesystem::path& path, const CrossSpectralMatrix& c) {
  io::atomic_write(path, format_csm(c));
}

inline CrossSpectralMatrix read_csm(const std::filesystem::path& path, double speed_of_sound) {
  std::istringstream in(io::read_file(path));
  return parse_csm(in, speed_of_sound);
}

// ---------------------------------------------------------------------------
// Time series

inline std::string format_timeseries(const TimeSeries& ts) {
  std::string out = "AEROTS v1 M " + std::to_string(ts.channels) + " fs " + io::fmt17(ts.fs) +
                    " N " + std::to_string(ts.samples) + "\n";
  const size_t header = out.size();
  out.resize(header + ts.data.size() * 8);
  char* dst = out.data() + header;
  for (double v : ts.data) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

inline TimeSeries parse_timeseries(const std::string& bytes) {
  constexpr const char* what = "AEROTS";
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("AEROTS: missing header");
  std::istringstream head(bytes.substr(0, nl));
  io::expect(head, "AEROTS", what);
  io::expect(head, "v1", what);
  io::expect(head, "M", what);
  const long long m = io::parse_int(io::next_token(head, what), what);
  io::expect(head, "fs", what);
  const double fs = io::parse_double(io::next_token(head, what), what);
  io::expect(head, "N", what);
  const long long n = io::parse_int(io::next_token(head, what), what);
  if (m < 0 || n < 0) throw FormatError("AEROTS: negative size");
  TimeSeries ts;
  ts.channels = static_cast<int>(m);
  ts.samples = static_cast<size_t>(n);
  ts.fs = fs;
  const size_t count = static_cast<size_t>(m) * static_cast<size_t>(n);
  if (bytes.size() - nl - 1 != count * 8) throw FormatError("AEROTS: payload size mismatch");
  ts.data.resize(count);
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(src[8 * k + b]) << (8 * b);
    ts.data[k] = std::bit_cast<double>(bits);
  }
  return ts;
}

inline void write_timeseries(const std::filesystem::path& path, const TimeSeries& ts) {
  io::atomic_write(path, format_timeseries(ts));
}

inline TimeSeries read_timeseries(const std::filesystem::path& path) {
  return parse_timeseries(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Source maps

inline std::string format_map(const SourceMap& map) {
  const FocusGrid& g = map.grid;
  std::string out = "AEROMAP v1 method " + map.method + " f " + map.tag + " nx " +
                    std::to_string(g.nx) + " ny " + std::to_string(g.ny) + " spacing " +
                    io::fmt17(g.spacing) + "\n";
  out += "# origin";
  for (int a = 0; a < 3; ++a) out += " " + io::fmt17(g.origin[a]);
  out += " u";
  for (int a = 0; a < 3; ++a) out += " " + io::fmt17(g.u[a]);
  out += " v";
  for (int a = 0; a < 3; ++a) out += " " + io::fmt17(g.v[a]);
  out += "\n";
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i > 0) out += ' ';
      out += io::fmt17(map.values[g.index(i, j)]);
    }
    out += '\n';
  }
  return out;
}

inline SourceMap parse_map(std::istream& in) {
  constexpr const char* what = "AEROMAP";
  std::string header;
  if (!std::getline(in, header)) throw FormatError("AEROMAP: missing header");
  std::istringstream head(header);
  io::expect(head, "AEROMAP", what);
  io::expect(head, "v1", what);
  io::expect(head, "method", what);
  SourceMap map;
  map.method = io::next_token(head, what);
  io::expect(head, "f", what);
  map.tag = io::next_token(head, what);
  io::expect(head, "nx", what);
  map.grid.nx = static_cast<int>(io::parse_int(io::next_token(head, what), what));
  io::expect(head, "ny", what);
  map.grid.ny = static_cast<int>(io::parse_int(io::next_token(head, what), what));
  io::expect(head, "spacing", what);
  map.grid.spacing = io::parse_double(io::next_token(head, what), what);
  if (map.grid.nx < 1 || map.grid.ny < 1) throw FormatError("AEROMAP: bad grid size");

  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    std::istringstream meta(line.substr(1));
    std::string key;
    while (meta >> key) {
      Point* target = key == "origin" ? &map.grid.origin
                      : key == "u"    ? &map.grid.u
                      : key == "v"    ? &map.grid.v
                                      : nullptr;
      if (!target) throw FormatError("AEROMAP: unknown metadata key '" + key + "'");
      for (int a = 0; a < 3; ++a) (*target)[a] = io::parse_double(io::next_token(meta, what), what);
    }
  }
  map.values.resize(map.grid.size());
  for (double& v : map.values) v = io::parse_double(io::next_token(in, what), what);
  std::string extra;
  if (in >> extra) throw FormatError("AEROMAP: trailing data");
  return map;
}

inline void write_map(const std::filesystem::path& path, const SourceMap& map) {
  io::atomic_write(path, format_map(map));
}

inline SourceMap read_map(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  return parse_map(in);
}

/// 16-bit binary graymap of a map already normalized to [0, 1].
inline std::string format_pgm(const SourceMap& map) {
  const FocusGrid& g = map.grid;
  std::string out = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n65535\n";
  for (int j = g.ny - 1; j >= 0; --j) {
    for (int i = 0; i < g.nx; ++i) {
      const double v = std::clamp(map.values[g.index(i, j)], 0.0, 1.0);
      const auto level = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      out += static_cast<char>(level >> 8);
      out += static_cast<char>(level & 0xff);
    }
  }
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const SourceMap& map) {
  io::atomic_write(path, format_pgm(map));
}

}  // namespace aeroimg
