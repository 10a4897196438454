#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rcflow/latent.hpp"

namespace rcflow {

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file contents.
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Text frame stack:
//   FPSTACK 1 <frames> <channels> <height> <width>
//   <width values per line, rows in (frame, channel, row) order, 9 significant digits>

inline std::string format_stack(const LatentField& x) {
  const Shape& s = x.shape();
  std::string out = "FPSTACK 1 " + std::to_string(s.frames) + " " + std::to_string(s.channels) + " " +
                    std::to_string(s.height) + " " + std::to_string(s.width) + "\n";
  char buf[32];
  const auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", v[i]);
    out += buf;
    out += (i + 1) % s.width == 0 ? '\n' : ' ';
  }
  return out;
}

inline LatentField parse_stack(std::string_view text) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string_view {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return text.substr(start, pos - start);
  };
  auto extent = [&](const char* name) {
    const auto tok = next_token();
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v == 0)
      throw FormatError(std::string("FPSTACK header: invalid ") + name + " '" + std::string(tok) + "'");
    return v;
  };

  if (next_token() != "FPSTACK") throw FormatError("not an FPSTACK file (missing magic)");
  if (next_token() != "1") throw FormatError("unsupported FPSTACK version");
  Shape shape;
  shape.frames = extent("frames");
  shape.channels = extent("channels");
  shape.height = extent("height");
  shape.width = extent("width");

  const std::size_t n = shape.count();
  std::vector<double> data;
  data.reserve(n);
  for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
      throw FormatError("FPSTACK payload: invalid value '" + std::string(tok) + "' at index " +
                        std::to_string(data.size()));
    if (data.size() == n) throw FormatError("FPSTACK payload longer than header extents");
    data.push_back(v);
  }
  if (data.size() != n)
    throw FormatError("FPSTACK payload has " + std::to_string(data.size()) + " values, header declares " +
                      std::to_string(n));
  return LatentField(shape, std::move(data));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline LatentField read_stack(const std::filesystem::path& path) {
  try {
    return parse_stack(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_stack(const std::filesystem::path& path, const LatentField& x) { write_file(path, format_stack(x)); }

struct ExportRange {
  std::size_t channel = 0;
  double min = 0.0;
  double max = 0.0;
};

/// Writes one binary graymap (P5, maxval 255) per frame of `channel`, min-max normalized over
/// all frames together. Files are named frame_000.pgm, frame_001.pgm, ...
inline ExportRange export_frames(const std::filesystem::path& dir, const LatentField& x, std::size_t channel = 0) {
  const Shape& s = x.shape();
  if (channel >= s.channels) throw StructuralError("export channel out of range");
  ExportRange range{channel, x.at(0, channel, 0, 0), x.at(0, channel, 0, 0)};
  for (std::size_t f = 0; f < s.frames; ++f)
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t px = 0; px < s.width; ++px) {
        range.min = std::min(range.min, x.at(f, channel, y, px));
        range.max = std::max(range.max, x.at(f, channel, y, px));
      }
  const double span = range.max - range.min;
  for (std::size_t f = 0; f < s.frames; ++f) {
    std::string bytes = "P5\n" + std::to_string(s.width) + " " + std::to_string(s.height) + "\n255\n";
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t px = 0; px < s.width; ++px) {
        const double v = span > 0.0 ? (x.at(f, channel, y, px) - range.min) / span : 0.0;
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
      }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.pgm", f);
    write_file(dir / name, bytes);
  }
  return range;
}

} // namespace rcflow
