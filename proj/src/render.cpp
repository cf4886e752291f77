#include "geoecon/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "geoecon/error.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

namespace {

struct Rgb {
  uint8_t r, g, b;
};

// three shades per tercile, cold to warm
constexpr std::array<Rgb, 9> kPalette{{
    {8, 48, 107},     // bottom tercile, deep
    {33, 102, 172},   //
    {146, 197, 222},  //
    {254, 224, 144},  // middle tercile
    {253, 174, 97},   //
    {244, 109, 67},   //
    {252, 146, 114},  // top tercile
    {203, 24, 29},    //
    {103, 0, 13},     //
}};
constexpr Rgb kBackground{255, 255, 255};

std::string coord_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

int pixel_index(double lat, double lon) {
  const double row_f = 89.5 - lat;
  const double col_f = lon + 179.5;
  const auto row = static_cast<int>(std::lround(row_f));
  const auto col = static_cast<int>(std::lround(col_f));
  if (std::abs(row_f - row) > 1e-9 || std::abs(col_f - col) > 1e-9 ||
      row < 0 || row >= kMapHeight || col < 0 || col >= kMapWidth)
    throw ValidationError("cell (" + coord_str(lat) + ", " + coord_str(lon) +
                          ") is off the lattice");
  return row * kMapWidth + col;
}

// bin edges: tercile boundaries plus within-tercile terciles -> 8 edges
std::array<double, 8> nine_level_edges(const std::vector<double>& sorted,
                                       const MapOptions& options) {
  double t1, t2;
  if (std::isnan(options.thresholds[0]) || std::isnan(options.thresholds[1])) {
    t1 = quantile_sorted(sorted, 1.0 / 3.0);
    t2 = quantile_sorted(sorted, 2.0 / 3.0);
  } else {
    t1 = options.thresholds[0];
    t2 = options.thresholds[1];
  }
  auto sub_edges = [&](double lo_v, double hi_v, double* out) {
    std::vector<double> part;
    for (double v : sorted)
      if (v >= lo_v && v <= hi_v) part.push_back(v);
    if (part.size() < 2) {
      out[0] = lo_v;
      out[1] = hi_v;
      return;
    }
    out[0] = quantile_sorted(part, 1.0 / 3.0);
    out[1] = quantile_sorted(part, 2.0 / 3.0);
  };
  const double lo = sorted.front(), hi = sorted.back();
  double b[2], m[2], t[2];
  sub_edges(lo, t1, b);
  sub_edges(t1, t2, m);
  sub_edges(t2, hi, t);
  return {b[0], b[1], t1, m[0], m[1], t2, t[0], t[1]};
}

int bin_of(double v, const std::array<double, 8>& edges) {
  int b = 0;
  while (b < 8 && v > edges[b]) ++b;
  return b;
}

void write_ppm(const std::string& path, const std::vector<Rgb>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  char header[64];
  const int len = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n",
                                kMapWidth, kMapHeight);
  out.write(header, len);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size() * 3));
  if (!out) throw IoError("write failed on '" + path + "'");
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  char header[64];
  const int len = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n",
                                kMapWidth, kMapHeight);
  out.write(header, len);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace

void render_map(const std::string& path, std::span<const double> lat,
                std::span<const double> lon, std::span<const double> value,
                const MapOptions& options) {
  if (lat.size() != lon.size() || lat.size() != value.size())
    throw ValidationError("render: lat/lon/value lengths differ");
  if (value.empty()) throw ValidationError("render: empty field");

  std::vector<double> present;
  present.reserve(value.size());
  for (double v : value)
    if (!std::isnan(v)) present.push_back(v);
  if (present.empty()) throw ValidationError("render: all values missing");
  std::sort(present.begin(), present.end());

  if (options.mode == MapMode::tercile9) {
    const auto edges = nine_level_edges(present, options);
    std::vector<Rgb> pixels(static_cast<size_t>(kMapWidth) * kMapHeight,
                            kBackground);
    for (size_t i = 0; i < value.size(); ++i) {
      if (std::isnan(value[i])) continue;
      pixels[pixel_index(lat[i], lon[i])] = kPalette[bin_of(value[i], edges)];
    }
    write_ppm(path, pixels);
    return;
  }

  if (options.mode == MapMode::grayscale) {
    const double lo = present.front(), hi = present.back();
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<uint8_t> pixels(static_cast<size_t>(kMapWidth) * kMapHeight, 0);
    for (size_t i = 0; i < value.size(); ++i) {
      if (std::isnan(value[i])) continue;
      // 0 is reserved for background
      const double frac = (value[i] - lo) / span;
      pixels[pixel_index(lat[i], lon[i])] =
          static_cast<uint8_t>(1 + std::lround(frac * 254.0));
    }
    write_pgm(path, pixels);
    return;
  }

  // ascii: 3x3-degree blocks, 120 x 60 characters
  static constexpr char kRamp[] = " .:-=+*#%@";
  constexpr int bw = 120, bh = 60;
  std::vector<double> sum(bw * bh, 0.0);
  std::vector<int> cnt(bw * bh, 0);
  const double lo = present.front(), hi = present.back();
  const double span = hi > lo ? hi - lo : 1.0;
  for (size_t i = 0; i < value.size(); ++i) {
    if (std::isnan(value[i])) continue;
    const int px = pixel_index(lat[i], lon[i]);
    const int block = (px / kMapWidth / 3) * bw + (px % kMapWidth) / 3;
    sum[block] += value[i];
    ++cnt[block];
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (int r = 0; r < bh; ++r) {
    std::string line(bw, ' ');
    for (int c = 0; c < bw; ++c) {
      if (cnt[r * bw + c] == 0) continue;
      const double v = sum[r * bw + c] / cnt[r * bw + c];
      const int level =
          std::min(9, static_cast<int>(((v - lo) / span) * 9.999));
      line[c] = kRamp[level];
    }
    out << line << '\n';
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace geoecon
