#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "prectune/kernels.hpp"

namespace prectune::mm {

/// Dense "array real general" (column-major, as the exchange format requires).
void write_array(const std::filesystem::path& path, const DenseMatrix& a);
/// Vector as an n x 1 array.
void write_vector(const std::filesystem::path& path, std::span<const double> v);
/// Nonzeros as "coordinate real general", 1-based indices.
void write_coordinate(const std::filesystem::path& path, const DenseMatrix& a);

/// Reads array or coordinate (general or symmetric) into a dense matrix.
DenseMatrix read_matrix(const std::filesystem::path& path);
Vector read_vector(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace prectune::mm
