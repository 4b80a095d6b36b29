#include "eim/grid.hpp"

#include "eim/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace eim {

void GridSpec::validate() const {
  if (!(xmax > xmin) || !(ymax > ymin) || !std::isfinite(xmin) || !std::isfinite(xmax) ||
      !std::isfinite(ymin) || !std::isfinite(ymax)) {
    throw InvalidArgument("grid bounds must be finite with min < max");
  }
  if (resolution == 0 || resolution > kMaxGridResolution) {
    throw InvalidArgument("grid resolution must be in [1, " + std::to_string(kMaxGridResolution) + "]");
  }
}

double GridSpec::cell_area() const {
  const double r = double(resolution);
  return (xmax - xmin) / r * (ymax - ymin) / r;
}

Point2 GridSpec::center(std::size_t row, std::size_t col) const {
  const double r = double(resolution);
  return {xmin + (double(col) + 0.5) * (xmax - xmin) / r,
          ymax - (double(row) + 0.5) * (ymax - ymin) / r};
}

Matrix target_density_grid(const TargetDensity& target, const GridSpec& grid) {
  grid.validate();
  const auto n = Eigen::Index(grid.resolution);
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) = std::exp(target.log_density(grid.center(std::size_t(i), std::size_t(j))));
    }
  }
  return out;
}

Matrix sample_histogram(const Matrix& samples, const GridSpec& grid) {
  grid.validate();
  if (samples.cols() != 2) throw InvalidArgument("histogram needs 2-D samples");
  const auto n = Eigen::Index(grid.resolution);
  Matrix out = Matrix::Zero(n, n);
  const double r = double(grid.resolution);
  for (Eigen::Index s = 0; s < samples.rows(); ++s) {
    const double col = std::floor((samples(s, 0) - grid.xmin) / (grid.xmax - grid.xmin) * r);
    const double row = std::floor((grid.ymax - samples(s, 1)) / (grid.ymax - grid.ymin) * r);
    if (col < 0.0 || row < 0.0 || col >= r || row >= r) continue;
    out(Eigen::Index(row), Eigen::Index(col)) += 1.0;
  }
  if (samples.rows() > 0) out /= double(samples.rows()) * grid.cell_area();
  return out;
}

void write_grid_csv(const std::string& path, const Matrix& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (j) out << ',';
      out << grid(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_pgm(const std::string& path, const Matrix& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  const double mx = grid.size() > 0 ? grid.maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const double v = mx > 0.0 ? grid(i, j) / mx : 0.0;
      out.put(char(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace eim
