#include "rainfuse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rainfuse {

namespace {

constexpr double kEarthRadiusKm = 6371.0;

double km_per_degree() { return kEarthRadiusKm * std::numbers::pi / 180.0; }

}  // namespace

void validate(const Grid& grid) {
  if (grid.nx < 2) throw std::invalid_argument("grid.nx must be >= 2, got " + std::to_string(grid.nx));
  if (grid.ny < 2) throw std::invalid_argument("grid.ny must be >= 2, got " + std::to_string(grid.ny));
  if (!(grid.cell_size_km > 0.0) || !std::isfinite(grid.cell_size_km))
    throw std::invalid_argument("grid.cell_size_km must be positive");
  if (!(grid.dt_minutes > 0.0) || !std::isfinite(grid.dt_minutes))
    throw std::invalid_argument("grid.dt_minutes must be positive");
  if (!std::isfinite(grid.origin_lon) || !std::isfinite(grid.origin_lat))
    throw std::invalid_argument("grid.origin must be finite");
}

Grid make_grid(int nx, int ny, double cell_size_km, double origin_lon,
               double origin_lat, double dt_minutes) {
  Grid g{nx, ny, cell_size_km, origin_lon, origin_lat, dt_minutes};
  validate(g);
  return g;
}

std::vector<int> neighbors(const Grid& grid, int i) {
  if (i < 0 || i >= grid.n())
    throw std::out_of_range("cell index " + std::to_string(i) + " outside [0, " +
                            std::to_string(grid.n()) + ")");
  const int x = grid.x_of(i);
  const int y = grid.y_of(i);
  std::vector<int> out;
  out.reserve(4);
  if (x > 0) out.push_back(i - 1);
  if (x + 1 < grid.nx) out.push_back(i + 1);
  if (y > 0) out.push_back(i - grid.nx);
  if (y + 1 < grid.ny) out.push_back(i + grid.nx);
  return out;
}

int neighbor_count(const Grid& grid, int i) {
  const int x = grid.x_of(i);
  const int y = grid.y_of(i);
  return (x > 0) + (x + 1 < grid.nx) + (y > 0) + (y + 1 < grid.ny);
}

int shifted_index(const Grid& grid, int i, Displacement d) {
  const int x = std::clamp(grid.x_of(i) + d.dx, 0, grid.nx - 1);
  const int y = std::clamp(grid.y_of(i) + d.dy, 0, grid.ny - 1);
  return grid.index(x, y);
}

double cells_per_ms(const Grid& grid) {
  return grid.dt_minutes * 60.0 / (grid.cell_size_km * 1000.0);
}

Adjacency::Adjacency(const Grid& grid) {
  offsets.reserve(grid.n() + 1);
  offsets.push_back(0);
  for (int i = 0; i < grid.n(); ++i) {
    for (int k : neighbors(grid, i)) cells.push_back(k);
    offsets.push_back(static_cast<int>(cells.size()));
  }
}

std::pair<double, double> lonlat_to_km(const Grid& grid, double lon, double lat) {
  const double kpd = km_per_degree();
  const double coslat = std::cos(grid.origin_lat * std::numbers::pi / 180.0);
  return {(lon - grid.origin_lon) * kpd * coslat, (lat - grid.origin_lat) * kpd};
}

std::pair<double, double> km_to_lonlat(const Grid& grid, double east_km,
                                       double north_km) {
  const double kpd = km_per_degree();
  const double coslat = std::cos(grid.origin_lat * std::numbers::pi / 180.0);
  return {grid.origin_lon + east_km / (kpd * coslat), grid.origin_lat + north_km / kpd};
}

std::pair<double, double> cell_center_km(const Grid& grid, int i) {
  return {(grid.x_of(i) + 0.5) * grid.cell_size_km,
          (grid.y_of(i) + 0.5) * grid.cell_size_km};
}

std::pair<double, double> cell_center_lonlat(const Grid& grid, int i) {
  const auto [e, n] = cell_center_km(grid, i);
  return km_to_lonlat(grid, e, n);
}

int cell_of_lonlat(const Grid& grid, double lon, double lat) {
  const auto [e, n] = lonlat_to_km(grid, lon, lat);
  const double fx = e / grid.cell_size_km;
  const double fy = n / grid.cell_size_km;
  // Points on the far boundary belong to the last cell.
  constexpr double kEdgeTol = 1e-9;
  if (!(fx >= -kEdgeTol && fx <= grid.nx + kEdgeTol)) return -1;
  if (!(fy >= -kEdgeTol && fy <= grid.ny + kEdgeTol)) return -1;
  const int x = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.nx - 1);
  const int y = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.ny - 1);
  return grid.index(x, y);
}

}  // namespace rainfuse
