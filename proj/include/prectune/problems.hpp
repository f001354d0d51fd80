#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prectune/kernels.hpp"

namespace prectune {

enum class Family { dense_randsvd, sparse_spd };
std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);

struct ProblemMeta {
  std::size_t n = 0;
  double kappa_target = 0.0;  // 0 for families where the condition number is emergent
  double kappa_est = 0.0;     // 1-norm estimate measured after generation
  Family family = Family::dense_randsvd;
  double sparsity = 1.0;  // nnz(A) / n^2
  std::uint64_t seed = 0;
};

struct ProblemInstance {
  std::string id;
  DenseMatrix a;
  Vector x_true;
  Vector b;
  ProblemMeta meta;
};

/// A = U diag(s_max, ..., s_max, s_max / kappa) V^T, U and V from QR of
/// standard-normal matrices; x_true standard normal; b = A x_true.
ProblemInstance gen_dense_randsvd(std::size_t n, double kappa, double sigma_max, std::uint64_t seed);

/// A0 with floor(lambda_s n^2) distinct standard-normal entries,
/// A = A0 A0^T + beta I; x_true standard normal; b = A x_true.
ProblemInstance gen_sparse_spd(std::size_t n, double lambda_s, double beta, std::uint64_t seed);

struct DatasetConfig {
  std::string name = "dataset";
  Family family = Family::dense_randsvd;
  std::size_t n_train = 100;
  std::size_t n_test = 100;
  std::size_t n_min = 100;
  std::size_t n_max = 500;
  double kappa_min = 1e1;
  double kappa_max = 1e9;
  double sigma_max = 1.0;
  double lambda_s = 0.01;
  double beta = 1e-7;
  std::uint64_t seed = 42;

  void validate() const;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ManifestEntry {
  std::string id;
  std::string matrix_file;  // relative to the manifest directory
  std::string rhs_file;
  std::string truth_file;
  std::string matrix_checksum;
  std::string rhs_checksum;
  std::string truth_checksum;
  ProblemMeta meta;
};

struct DatasetManifest {
  std::string name;
  std::string split;  // "train" or "test"
  DatasetConfig config;
  std::vector<ManifestEntry> instances;
  std::filesystem::path directory;  // where the manifest lives; not serialized
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Derives the per-instance seed from the global seed, split and index.
std::uint64_t instance_seed(std::uint64_t global_seed, std::string_view split, std::size_t index);

/// Builds one instance of the configured family with its own seed.
ProblemInstance generate_instance(const DatasetConfig& cfg, std::string_view split, std::size_t index);

struct GeneratedDataset {
  DatasetManifest train;
  DatasetManifest test;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
};

/// Writes matrices under out_dir/matrices and manifests out_dir/{train,test}.json.
GeneratedDataset gen_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, unsigned workers = 1);

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
ProblemInstance load_instance(const DatasetManifest& m, const ManifestEntry& entry);

/// 64-bit FNV-1a over the file contents, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

struct DatasetStats {
  std::string split;
  std::size_t count = 0;
  double kappa_min = 0.0, kappa_max = 0.0;
  double sparsity_min = 0.0, sparsity_max = 0.0;
  std::size_t n_min = 0, n_max = 0;
};

DatasetStats dataset_stats(const DatasetManifest& m);

}  // namespace prectune
