#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

namespace geoecon {

enum class MapMode : int { tercile9 = 0, grayscale, ascii };

struct MapOptions {
  MapMode mode = MapMode::tercile9;
  // explicit tercile boundaries; NaN = empirical terciles of the field
  std::array<double, 2> thresholds{std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN()};
};

// Equirectangular raster of a per-cell field, one pixel per 1-degree cell:
// row = 89.5 - lat, col = lon + 179.5 on a 360 x 180 canvas. tercile9 writes
// a binary PPM with three shades per tercile, grayscale a binary PGM, ascii a
// character grid. Cells off the lattice raise a validation error.
void render_map(const std::string& path, std::span<const double> lat,
                std::span<const double> lon, std::span<const double> value,
                const MapOptions& options);

inline constexpr int kMapWidth = 360;
inline constexpr int kMapHeight = 180;

}  // namespace geoecon
