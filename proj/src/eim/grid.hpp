#pragma once

#include "eim/targets.hpp"
#include "eim/tensor.hpp"

#include <string>

namespace eim {

inline constexpr std::size_t kMaxGridResolution = 2048;

/// Square cell grid over [xmin,xmax] x [ymin,ymax]. Row 0 of every grid
/// matrix is the top edge (largest y), matching image orientation.
struct GridSpec {
  double xmin = -2.0;
  double xmax = 2.0;
  double ymin = -2.0;
  double ymax = 2.0;
  std::size_t resolution = 256;

  void validate() const;
  double cell_area() const;
  /// Center of the cell at (row, col).
  Point2 center(std::size_t row, std::size_t col) const;
};

/// Exact target density at cell centers.
Matrix target_density_grid(const TargetDensity& target, const GridSpec& grid);
/// Histogram of the rows of `samples`, scaled to a density. Points outside
/// the box are dropped but still count toward the normalization.
Matrix sample_histogram(const Matrix& samples, const GridSpec& grid);

void write_grid_csv(const std::string& path, const Matrix& grid);
/// Binary 8-bit graymap, values scaled so the maximum maps to 255.
void write_pgm(const std::string& path, const Matrix& grid);

}  // namespace eim
