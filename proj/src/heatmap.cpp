#include "tshint/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tshint/util.hpp"

namespace tshint {

namespace {

struct Rgb {
  unsigned char r, g, b;
};

// Five-stop viridis approximation, linearly interpolated.
Rgb colormap(double x) {
  static const double stops[5][3] = {{0.267, 0.005, 0.329},
                                     {0.229, 0.322, 0.546},
                                     {0.128, 0.567, 0.551},
                                     {0.369, 0.789, 0.383},
                                     {0.993, 0.906, 0.144}};
  x = std::clamp(x, 0.0, 1.0) * 4.0;
  auto lo = static_cast<std::size_t>(x);
  lo = std::min<std::size_t>(lo, 3);
  double f = x - static_cast<double>(lo);
  auto chan = [&](int c) {
    double v = stops[lo][c] + f * (stops[lo + 1][c] - stops[lo][c]);
    return static_cast<unsigned char>(std::lround(v * 255.0));
  };
  return {chan(0), chan(1), chan(2)};
}

}  // namespace

void write_heatmap_ppm(const Tensor& matrix, const std::filesystem::path& path) {
  if (matrix.rank() != 2) throw Error("heatmap: expected matrix, got " + matrix.shape_str());
  std::size_t rows = matrix.rows(), cols = matrix.cols();
  std::size_t cell = std::clamp<std::size_t>(512 / std::max(rows, cols), 1, 32);

  double lo = matrix[0], hi = matrix[0];
  for (double v : matrix.vec()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi - lo;

  std::string body;
  body.reserve(rows * cols * cell * cell * 3);
  for (std::size_t r = 0; r < rows; ++r) {
    std::string line;
    line.reserve(cols * cell * 3);
    for (std::size_t c = 0; c < cols; ++c) {
      double x = span > 0 ? (matrix.at(r, c) - lo) / span : 0.5;
      Rgb px = colormap(x);
      for (std::size_t i = 0; i < cell; ++i) {
        line.push_back(static_cast<char>(px.r));
        line.push_back(static_cast<char>(px.g));
        line.push_back(static_cast<char>(px.b));
      }
    }
    for (std::size_t i = 0; i < cell; ++i) body += line;
  }
  std::ostringstream out;
  out << "P6\n" << cols * cell << " " << rows * cell << "\n255\n" << body;
  write_file_atomic(path, out.str());
}

void write_matrix_csv(const Tensor& matrix, const std::filesystem::path& path) {
  if (matrix.rank() != 2) throw Error("matrix csv: expected matrix, got " + matrix.shape_str());
  std::ostringstream out;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (c) out << ",";
      out << format_double(matrix.at(r, c));
    }
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> data;
  std::string line;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cols == 0) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      throw Error("matrix csv: ragged rows in " + path.string());
    }
    for (const auto& cell : cells) data.push_back(parse_double(cell, path.string()));
    ++rows;
  }
  if (rows == 0) throw Error("matrix csv: empty file " + path.string());
  return Tensor({rows, cols}, std::move(data));
}

}  // namespace tshint
