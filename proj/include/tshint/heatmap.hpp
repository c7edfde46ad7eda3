#pragma once

#include <filesystem>

#include "tshint/tensor.hpp"

namespace tshint {

// Render a matrix as a binary PPM heatmap, min-max scaled, cells upscaled
// so small maps stay legible.
void write_heatmap_ppm(const Tensor& matrix, const std::filesystem::path& path);

// CSV matrix with lossless doubles, one row per line.
void write_matrix_csv(const Tensor& matrix, const std::filesystem::path& path);
Tensor read_matrix_csv(const std::filesystem::path& path);

}  // namespace tshint
