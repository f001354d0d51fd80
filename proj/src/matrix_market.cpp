#include "prectune/matrix_market.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prectune::mm {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("malformed Matrix Market file " + path.string() + ": " + why);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

void write_array(const std::filesystem::path& path, const DenseMatrix& a) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n" << a.rows() << ' ' << a.cols() << '\n';
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) out << format_double(a(i, j)) << '\n';
  finish(out, path);
}

void write_vector(const std::filesystem::path& path, std::span<const double> v) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n" << v.size() << " 1\n";
  for (double x : v) out << format_double(x) << '\n';
  finish(out, path);
}

void write_coordinate(const std::filesystem::path& path, const DenseMatrix& a) {
  std::size_t nnz = 0;
  for (double v : a.data()) nnz += v != 0.0 ? 1 : 0;
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n" << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i)
      if (a(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << format_double(a(i, j)) << '\n';
  finish(out, path);
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) malformed(path, "empty file");
  std::istringstream banner(lower(line));
  std::string tag, object, layout, field, symmetry;
  banner >> tag >> object >> layout >> field >> symmetry;
  if (tag != "%%matrixmarket" || object != "matrix") malformed(path, "missing banner");
  if (field != "real" && field != "integer") malformed(path, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric") malformed(path, "unsupported symmetry '" + symmetry + "'");

  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
  }
  std::istringstream size_line(line);
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (!(size_line >> rows >> cols)) malformed(path, "bad size line");

  DenseMatrix a(rows, cols);
  if (layout == "array") {
    if (symmetry != "general") malformed(path, "symmetric array layout not supported");
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t i = 0; i < rows; ++i)
        if (!(in >> a(i, j))) malformed(path, "truncated entries");
  } else if (layout == "coordinate") {
    if (!(size_line >> nnz)) malformed(path, "missing nonzero count");
    for (std::size_t k = 0; k < nnz; ++k) {
      std::size_t i = 0, j = 0;
      double v = 0.0;
      if (!(in >> i >> j >> v)) malformed(path, "truncated entries");
      if (i == 0 || j == 0 || i > rows || j > cols) malformed(path, "index out of range");
      a(i - 1, j - 1) = v;
      if (symmetry == "symmetric") a(j - 1, i - 1) = v;
    }
  } else {
    malformed(path, "unknown layout '" + layout + "'");
  }
  return a;
}

Vector read_vector(const std::filesystem::path& path) {
  const DenseMatrix m = read_matrix(path);
  if (m.cols() != 1) throw std::runtime_error("expected a column vector in " + path.string());
  return {m.data().begin(), m.data().end()};
}

}  // namespace prectune::mm
