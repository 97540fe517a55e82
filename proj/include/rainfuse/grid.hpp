#pragma once

#include <utility>
#include <vector>

namespace rainfuse {

/// Regular lattice. Cells are indexed row-major with (x=0, y=0) at the
/// south-west corner: i = y * nx + x.
struct Grid {
  int nx = 0;
  int ny = 0;
  double cell_size_km = 1.0;
  double origin_lon = 0.0;  // south-west corner of cell (0,0)
  double origin_lat = 0.0;
  double dt_minutes = 10.0;

  int n() const { return nx * ny; }
  int index(int x, int y) const { return y * nx + x; }
  int x_of(int i) const { return i % nx; }
  int y_of(int i) const { return i / nx; }

  double extent_x_km() const { return nx * cell_size_km; }
  double extent_y_km() const { return ny * cell_size_km; }
};

/// Throws std::invalid_argument naming the offending field.
void validate(const Grid& grid);
Grid make_grid(int nx, int ny, double cell_size_km, double origin_lon = 0.0,
               double origin_lat = 0.0, double dt_minutes = 10.0);

/// Integer cell offset (east, north).
struct Displacement {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Displacement&, const Displacement&) = default;
};

/// Rook (edge-sharing) neighbours of cell i. Throws std::out_of_range.
std::vector<int> neighbors(const Grid& grid, int i);

/// Neighbour count w_i+ without allocating.
int neighbor_count(const Grid& grid, int i);

/// Cell at i + d with each coordinate clamped into the grid.
int shifted_index(const Grid& grid, int i, Displacement d);

/// Cells of displacement per step for one m/s of motion.
double cells_per_ms(const Grid& grid);

/// Compressed rook adjacency, built once per grid and shared read-only.
struct Adjacency {
  std::vector<int> offsets;  // size n + 1
  std::vector<int> cells;

  explicit Adjacency(const Grid& grid);
  int degree(int i) const { return offsets[i + 1] - offsets[i]; }
  const int* begin(int i) const { return cells.data() + offsets[i]; }
  const int* end(int i) const { return cells.data() + offsets[i + 1]; }
  int size() const { return static_cast<int>(offsets.size()) - 1; }
};

// Local equirectangular mapping between degrees and kilometres from the
// grid origin.
std::pair<double, double> lonlat_to_km(const Grid& grid, double lon, double lat);
std::pair<double, double> km_to_lonlat(const Grid& grid, double east_km,
                                       double north_km);
std::pair<double, double> cell_center_km(const Grid& grid, int i);
std::pair<double, double> cell_center_lonlat(const Grid& grid, int i);

/// Containing cell, or -1 when the point is outside the grid.
int cell_of_lonlat(const Grid& grid, double lon, double lat);

}  // namespace rainfuse
