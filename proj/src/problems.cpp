#include "prectune/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "prectune/config_io.hpp"
#include "prectune/matrix_market.hpp"

namespace prectune {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = normal(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

DenseMatrix to_dense(const Eigen::MatrixXd& m) {
  DenseMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return out;
}

Vector gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

Vector multiply(const DenseMatrix& a, const Vector& x) {
  Vector b(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * x[j];
    b[i] = s;
  }
  return b;
}

double measured_sparsity(const DenseMatrix& a) {
  const auto nnz = std::count_if(a.data().begin(), a.data().end(), [](double v) { return v != 0.0; });
  return static_cast<double>(nnz) / static_cast<double>(a.rows() * a.cols());
}

std::string zero_pad(std::size_t i, int width) {
  std::string s = std::to_string(i);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

json meta_to_json(const ProblemMeta& m) {
  return {{"n", m.n},
          {"kappa_target", m.kappa_target},
          {"kappa_est", m.kappa_est},
          {"family", std::string(to_string(m.family))},
          {"sparsity", m.sparsity},
          {"seed", m.seed}};
}

ProblemMeta meta_from_json(const json& j) {
  ProblemMeta m;
  m.n = j.at("n").get<std::size_t>();
  m.kappa_target = j.at("kappa_target").get<double>();
  m.kappa_est = j.at("kappa_est").get<double>();
  const auto fam = parse_family(j.at("family").get<std::string>());
  if (!fam) throw DatasetError("unknown family in manifest entry");
  m.family = *fam;
  m.sparsity = j.at("sparsity").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::dense_randsvd ? "dense" : "sparse"; }

std::optional<Family> parse_family(std::string_view s) {
  if (s == "dense" || s == "dense_randsvd") return Family::dense_randsvd;
  if (s == "sparse" || s == "sparse_spd") return Family::sparse_spd;
  return std::nullopt;
}

ProblemInstance gen_dense_randsvd(std::size_t n, double kappa, double sigma_max, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_dense_randsvd: n must be >= 2");
  if (!(kappa >= 1.0)) throw std::invalid_argument("gen_dense_randsvd: kappa must be >= 1");
  if (!(sigma_max > 0.0)) throw std::invalid_argument("gen_dense_randsvd: sigma_max must be positive");

  std::mt19937_64 rng(seed);
  const auto en = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd u = random_orthogonal(en, rng);
  const Eigen::MatrixXd v = random_orthogonal(en, rng);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(en, sigma_max);
  sigma(en - 1) = sigma_max / kappa;
  const Eigen::MatrixXd a = u * sigma.asDiagonal() * v.transpose();

  ProblemInstance p;
  p.a = to_dense(a);
  p.x_true = gaussian_vector(n, rng);
  p.b = multiply(p.a, p.x_true);
  p.meta.n = n;
  p.meta.kappa_target = kappa;
  p.meta.family = Family::dense_randsvd;
  p.meta.sparsity = measured_sparsity(p.a);
  p.meta.seed = seed;
  p.meta.kappa_est = condest_1(p.a);
  return p;
}

ProblemInstance gen_sparse_spd(std::size_t n, double lambda_s, double beta, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_sparse_spd: n must be >= 1");
  if (!(lambda_s > 0.0 && lambda_s <= 1.0)) throw std::invalid_argument("gen_sparse_spd: lambda_s must lie in (0,1]");
  if (!(beta > 0.0)) throw std::invalid_argument("gen_sparse_spd: beta must be positive");

  std::mt19937_64 rng(seed);
  const std::size_t cells = n * n;
  const auto nnz = static_cast<std::size_t>(std::floor(lambda_s * static_cast<double>(cells)));
  std::uniform_int_distribution<std::size_t> pick(0, cells - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::unordered_set<std::size_t> used;
  std::vector<std::size_t> positions;
  positions.reserve(nnz);
  while (positions.size() < nnz) {
    const std::size_t pos = pick(rng);
    if (used.insert(pos).second) positions.push_back(pos);
  }
  const auto en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(en, en);
  for (std::size_t pos : positions)
    a0(static_cast<Eigen::Index>(pos / n), static_cast<Eigen::Index>(pos % n)) = normal(rng);

  Eigen::MatrixXd a = a0 * a0.transpose();
  // Mirror the upper triangle so the stored matrix is exactly symmetric.
  for (Eigen::Index i = 0; i < en; ++i) {
    for (Eigen::Index j = i + 1; j < en; ++j) a(j, i) = a(i, j);
    a(i, i) += beta;
  }

  ProblemInstance p;
  p.a = to_dense(a);
  p.x_true = gaussian_vector(n, rng);
  p.b = multiply(p.a, p.x_true);
  p.meta.n = n;
  p.meta.kappa_target = 0.0;
  p.meta.family = Family::sparse_spd;
  p.meta.sparsity = measured_sparsity(p.a);
  p.meta.seed = seed;
  p.meta.kappa_est = condest_1(p.a);
  return p;
}

void DatasetConfig::validate() const {
  if (n_train + n_test == 0) throw std::invalid_argument("dataset needs at least one instance");
  if (n_train == 0) throw std::invalid_argument("n_train must be positive");
  if (n_min < 2 || n_max < n_min) throw std::invalid_argument("size range must satisfy 2 <= n_min <= n_max");
  if (family == Family::dense_randsvd && !(kappa_min >= 1.0 && kappa_max >= kappa_min))
    throw std::invalid_argument("condition range must satisfy 1 <= kappa_min <= kappa_max");
  if (!(sigma_max > 0.0)) throw std::invalid_argument("sigma_max must be positive");
  if (family == Family::sparse_spd && !(lambda_s > 0.0 && lambda_s <= 1.0))
    throw std::invalid_argument("lambda_s must lie in (0,1]");
  if (family == Family::sparse_spd && !(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

std::uint64_t instance_seed(std::uint64_t global_seed, std::string_view split, std::size_t index) {
  std::uint64_t h = splitmix64(global_seed);
  for (char c : split) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return splitmix64(h ^ static_cast<std::uint64_t>(index));
}

ProblemInstance generate_instance(const DatasetConfig& cfg, std::string_view split, std::size_t index) {
  std::mt19937_64 rng(instance_seed(cfg.seed, split, index));
  std::uniform_int_distribution<std::size_t> size(cfg.n_min, cfg.n_max);
  const std::size_t n = size(rng);
  ProblemInstance p;
  if (cfg.family == Family::dense_randsvd) {
    std::uniform_real_distribution<double> log_kappa(std::log10(cfg.kappa_min), std::log10(cfg.kappa_max));
    const double kappa = std::pow(10.0, log_kappa(rng));
    p = gen_dense_randsvd(n, kappa, cfg.sigma_max, rng());
  } else {
    p = gen_sparse_spd(n, cfg.lambda_s, cfg.beta, rng());
  }
  p.id = std::string(split) + "_" + zero_pad(index, 4);
  return p;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

GeneratedDataset gen_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, unsigned workers) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "matrices", ec);
  if (ec) throw DatasetError("cannot create " + (out_dir / "matrices").string() + ": " + ec.message());

  struct Job {
    std::string split;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.n_train; ++i) jobs.push_back({"train", i});
  for (std::size_t i = 0; i < cfg.n_test; ++i) jobs.push_back({"test", i});
  std::vector<ManifestEntry> entries(jobs.size());

  auto run = [&](std::size_t k) {
    const ProblemInstance p = generate_instance(cfg, jobs[k].split, jobs[k].index);
    ManifestEntry e;
    e.id = p.id;
    e.matrix_file = "matrices/" + p.id + "_A.mtx";
    e.rhs_file = "matrices/" + p.id + "_b.mtx";
    e.truth_file = "matrices/" + p.id + "_x.mtx";
    try {
      if (cfg.family == Family::sparse_spd) {
        mm::write_coordinate(out_dir / e.matrix_file, p.a);
      } else {
        mm::write_array(out_dir / e.matrix_file, p.a);
      }
      mm::write_vector(out_dir / e.rhs_file, p.b);
      mm::write_vector(out_dir / e.truth_file, p.x_true);
    } catch (const std::runtime_error& err) {
      throw DatasetError(err.what());
    }
    e.matrix_checksum = file_checksum(out_dir / e.matrix_file);
    e.rhs_checksum = file_checksum(out_dir / e.rhs_file);
    e.truth_checksum = file_checksum(out_dir / e.truth_file);
    e.meta = p.meta;
    entries[k] = std::move(e);
  };

  const unsigned nthreads = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (nthreads == 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) run(k);
  } else {
    std::vector<std::exception_ptr> errors(nthreads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < jobs.size(); k += nthreads) run(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  GeneratedDataset out;
  out.train = {cfg.name, "train", cfg, {entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(cfg.n_train)},
               out_dir};
  out.test = {cfg.name, "test", cfg, {entries.begin() + static_cast<std::ptrdiff_t>(cfg.n_train), entries.end()},
              out_dir};
  out.train_path = out_dir / "train.json";
  out.test_path = out_dir / "test.json";
  save_manifest(out.train, out.train_path);
  save_manifest(out.test, out.test_path);
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  json instances = json::array();
  for (const auto& e : m.instances) {
    instances.push_back({{"id", e.id},
                         {"matrix", e.matrix_file},
                         {"rhs", e.rhs_file},
                         {"truth", e.truth_file},
                         {"checksums", {{"matrix", e.matrix_checksum}, {"rhs", e.rhs_checksum}, {"truth", e.truth_checksum}}},
                         {"meta", meta_to_json(e.meta)}});
  }
  const json doc{{"format_version", 1},
                 {"name", m.name},
                 {"split", m.split},
                 {"seed", m.config.seed},
                 {"config", m.config},
                 {"instances", instances}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write manifest " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw DatasetError("failed writing manifest " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open manifest " + path.string());
  DatasetManifest m;
  try {
    const json doc = json::parse(in);
    if (doc.at("format_version").get<int>() != 1) throw DatasetError("unsupported manifest version in " + path.string());
    m.name = doc.at("name").get<std::string>();
    m.split = doc.at("split").get<std::string>();
    m.config = doc.at("config").get<DatasetConfig>();
    for (const auto& item : doc.at("instances")) {
      ManifestEntry e;
      e.id = item.at("id").get<std::string>();
      e.matrix_file = item.at("matrix").get<std::string>();
      e.rhs_file = item.at("rhs").get<std::string>();
      e.truth_file = item.at("truth").get<std::string>();
      e.matrix_checksum = item.at("checksums").at("matrix").get<std::string>();
      e.rhs_checksum = item.at("checksums").at("rhs").get<std::string>();
      e.truth_checksum = item.at("checksums").at("truth").get<std::string>();
      e.meta = meta_from_json(item.at("meta"));
      m.instances.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.directory = path.parent_path();
  return m;
}

ProblemInstance load_instance(const DatasetManifest& m, const ManifestEntry& entry) {
  const auto check = [&](const std::string& rel, const std::string& expected) {
    const auto full = m.directory / rel;
    if (!std::filesystem::exists(full)) throw DatasetError("missing file " + full.string());
    if (file_checksum(full) != expected) throw DatasetError("checksum mismatch for " + full.string());
    return full;
  };
  ProblemInstance p;
  p.id = entry.id;
  try {
    p.a = mm::read_matrix(check(entry.matrix_file, entry.matrix_checksum));
    p.b = mm::read_vector(check(entry.rhs_file, entry.rhs_checksum));
    p.x_true = mm::read_vector(check(entry.truth_file, entry.truth_checksum));
  } catch (const DatasetError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DatasetError(e.what());
  }
  if (!p.a.square() || p.a.rows() != p.b.size() || p.b.size() != p.x_true.size())
    throw DatasetError("inconsistent dimensions for instance " + entry.id);
  p.meta = entry.meta;
  return p;
}

DatasetStats dataset_stats(const DatasetManifest& m) {
  DatasetStats s;
  s.split = m.split;
  s.count = m.instances.size();
  bool first = true;
  for (const auto& e : m.instances) {
    if (first) {
      s.kappa_min = s.kappa_max = e.meta.kappa_est;
      s.sparsity_min = s.sparsity_max = e.meta.sparsity;
      s.n_min = s.n_max = e.meta.n;
      first = false;
      continue;
    }
    s.kappa_min = std::min(s.kappa_min, e.meta.kappa_est);
    s.kappa_max = std::max(s.kappa_max, e.meta.kappa_est);
    s.sparsity_min = std::min(s.sparsity_min, e.meta.sparsity);
    s.sparsity_max = std::max(s.sparsity_max, e.meta.sparsity);
    s.n_min = std::min(s.n_min, e.meta.n);
    s.n_max = std::max(s.n_max, e.meta.n);
  }
  return s;
}

}  // namespace prectune
