#include "prectune/gmres_ir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prectune {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b, const Rounder& rnd) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc = rnd.add(acc, rnd.mul(a[i], b[i]));
  return acc;
}

double nrm2(std::span<const double> v, const Rounder& rnd) { return rnd(std::sqrt(dot(v, v, rnd))); }

}  // namespace

bool PrecisionAction::monotone() const {
  return !precision_less(u, u_f) && !precision_less(u_g, u) && !precision_less(u_r, u_g);
}

std::string to_string(const PrecisionAction& a) {
  std::string out;
  for (Format f : a.steps()) {
    if (!out.empty()) out += '|';
    out += format_name(f);
  }
  return out;
}

std::optional<PrecisionAction> parse_action(std::string_view text) {
  std::array<Format, 4> parts{};
  std::size_t count = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t bar = std::min(text.find('|', start), text.size());
    if (count == 4) return std::nullopt;
    const auto f = parse_format(text.substr(start, bar - start));
    if (!f) return std::nullopt;
    parts[count++] = *f;
    start = bar + 1;
  }
  if (count != 4) return std::nullopt;
  return PrecisionAction{parts[0], parts[1], parts[2], parts[3]};
}

void StopConfig::validate() const {
  if (!(tau_conv > 0.0 && tau_conv < 1.0)) throw std::invalid_argument("StopConfig: tau_conv must lie in (0,1)");
  if (!(stagnation > 0.0)) throw std::invalid_argument("StopConfig: stagnation ratio must be positive");
  if (i_max < 1) throw std::invalid_argument("StopConfig: i_max must be >= 1");
  if (!(gmres_rtol > 0.0 && gmres_rtol < 1.0)) throw std::invalid_argument("StopConfig: gmres_rtol must lie in (0,1)");
  if (gmres_maxit < 1) throw std::invalid_argument("StopConfig: gmres_maxit must be >= 1");
}

std::string_view to_string(StopRule r) { return r == StopRule::literal ? "literal" : "tolerance"; }

std::optional<StopRule> parse_stop_rule(std::string_view s) {
  if (s == "tolerance") return StopRule::tolerance;
  if (s == "literal") return StopRule::literal;
  return std::nullopt;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::stagnated:
      return "stagnated";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::failed:
      return "failed";
  }
  return "unknown";
}

GmresResult gmres_left_preconditioned(const DenseMatrix& a, const LUFactors& factors, std::span<const double> r,
                                      Format fmt, double rtol, int maxit) {
  const std::size_t n = a.rows();
  const Rounder rnd(fmt);
  GmresResult out;
  out.z.assign(n, 0.0);

  const Vector r0 = lu_solve(factors, r, fmt);
  const double beta = nrm2(r0, rnd);
  if (!std::isfinite(beta)) return out;
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }

  const std::size_t m = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(maxit, 1)));
  std::vector<Vector> basis;
  basis.reserve(m + 1);
  Vector v0(n);
  for (std::size_t i = 0; i < n; ++i) v0[i] = rnd.div(r0[i], beta);
  basis.push_back(std::move(v0));

  // Column-major Hessenberg, already rotated into upper-triangular form.
  std::vector<Vector> h;
  std::vector<double> cs, sn;
  std::vector<double> g{beta};
  const double target = rtol * beta;

  std::size_t k = 0;
  bool finite = true;
  while (k < m) {
    Vector w = lu_solve(factors, matvec(a, basis[k], fmt), fmt);
    Vector col(k + 2, 0.0);
    for (std::size_t i = 0; i <= k; ++i) {
      const double hij = dot(w, basis[i], rnd);
      col[i] = hij;
      for (std::size_t t = 0; t < n; ++t) w[t] = rnd.sub(w[t], rnd.mul(hij, basis[i][t]));
    }
    const double hnext = nrm2(w, rnd);
    col[k + 1] = hnext;

    for (std::size_t i = 0; i < k; ++i) {
      const double top = rnd.add(rnd.mul(cs[i], col[i]), rnd.mul(sn[i], col[i + 1]));
      const double bot = rnd.sub(rnd.mul(cs[i], col[i + 1]), rnd.mul(sn[i], col[i]));
      col[i] = top;
      col[i + 1] = bot;
    }
    const double denom = rnd(std::sqrt(rnd.add(rnd.mul(col[k], col[k]), rnd.mul(hnext, hnext))));
    double c = 1.0;
    double s = 0.0;
    if (denom != 0.0) {
      c = rnd.div(col[k], denom);
      s = rnd.div(hnext, denom);
    }
    col[k] = rnd.add(rnd.mul(c, col[k]), rnd.mul(s, hnext));
    col[k + 1] = 0.0;
    cs.push_back(c);
    sn.push_back(s);
    g.push_back(rnd.mul(-s, g[k]));
    g[k] = rnd.mul(c, g[k]);
    h.push_back(std::move(col));
    ++k;

    if (!std::isfinite(g[k]) || !std::isfinite(hnext) || !std::isfinite(h.back()[k - 1])) {
      finite = false;
      break;
    }
    if (std::fabs(g[k]) <= target || hnext == 0.0) {
      out.converged = true;
      break;
    }
    if (k == m) break;
    Vector next(n);
    for (std::size_t t = 0; t < n; ++t) next[t] = rnd.div(w[t], hnext);
    if (!all_finite(next)) {
      finite = false;
      break;
    }
    basis.push_back(std::move(next));
  }
  out.iters = static_cast<int>(k);
  if (!finite) {
    out.converged = false;
    return out;
  }

  // Back substitution on the k x k triangle, then z = V y.
  std::vector<double> y(k, 0.0);
  for (std::size_t ii = k; ii-- > 0;) {
    double s = g[ii];
    for (std::size_t j = ii + 1; j < k; ++j) s = rnd.sub(s, rnd.mul(h[j][ii], y[j]));
    y[ii] = rnd.div(s, h[ii][ii]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t t = 0; t < n; ++t) out.z[t] = rnd.add(out.z[t], rnd.mul(y[j], basis[j][t]));
  }
  if (!all_finite(out.z)) out.converged = false;
  return out;
}

ErrorMetrics compute_errors(std::span<const double> x_solve, std::span<const double> x_true, const DenseMatrix& a,
                            std::span<const double> b) {
  if (x_solve.size() != x_true.size() || a.rows() != b.size() || a.cols() != x_solve.size())
    throw std::invalid_argument("compute_errors: dimension mismatch");
  if (!all_finite(x_solve)) return {kInf, kInf};

  double diff = 0.0;
  for (std::size_t i = 0; i < x_solve.size(); ++i) diff = std::max(diff, std::fabs(x_solve[i] - x_true[i]));
  const double ferr = diff / norm_inf_vec(x_true);

  double res = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double s = b[i];
    for (std::size_t j = 0; j < row.size(); ++j) s -= row[j] * x_solve[j];
    res = std::max(res, std::fabs(s));
  }
  const double nbe = res / (norm_inf(a) * norm_inf_vec(x_solve) + norm_inf_vec(b));
  return {ferr, nbe};
}

std::optional<Vector> reference_solve(const DenseMatrix& a, std::span<const double> b) {
  const auto f = lu_factor(a, Format::FP64);
  if (std::holds_alternative<FactorFailure>(f)) return std::nullopt;
  Vector x = lu_solve(std::get<LUFactors>(f), b, Format::FP64);
  if (!all_finite(x)) return std::nullopt;
  return x;
}

SolveReport solve_gmres_ir(const DenseMatrix& a, std::span<const double> b, const PrecisionAction& action,
                           const StopConfig& cfg, std::optional<std::span<const double>> x_true) {
  cfg.validate();
  if (!a.square() || a.rows() != b.size()) throw std::invalid_argument("solve_gmres_ir: dimension mismatch");
  const std::size_t n = a.rows();

  SolveReport rep;
  rep.action = action;

  auto fail = [&](std::string reason) {
    rep.status = SolveStatus::failed;
    rep.failure_reason = std::move(reason);
    rep.ferr = rep.nbe = rep.err_normalized = kInf;
    return rep;
  };

  // Steps 1-2: factorization and initial solve at u_f.
  const auto factored = lu_factor(a, action.u_f);
  if (const auto* ff = std::get_if<FactorFailure>(&factored)) {
    return fail(std::string("factorization: ") + std::string(to_string(ff->reason)));
  }
  const auto& lu = std::get<LUFactors>(factored);
  Vector x = lu_solve(lu, b, action.u_f);
  quantize_inplace(x, action.u);
  rep.x = x;
  if (!all_finite(x)) return fail("non-finite initial solution");

  const DenseMatrix a_r = quantize_matrix(a, action.u_r);
  const Vector b_r = quantize_vector(b, action.u_r);
  const DenseMatrix a_g = quantize_matrix(a, action.u_g);
  const LUFactors lu_g = requantize(lu, action.u_g);
  const Rounder rnd_r(action.u_r);
  const Rounder rnd_u(action.u);
  const bool literal = cfg.rule == StopRule::literal;
  const double conv_tol = literal ? unit_roundoff(action.u) : std::max(cfg.tau_conv, unit_roundoff(action.u));
  const double stag_ratio = literal ? cfg.tau_conv : cfg.stagnation;
  const int inner_cap = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(cfg.gmres_maxit)));

  rep.status = SolveStatus::max_iter;
  double prev_update = 0.0;
  for (int i = 0; i < cfg.i_max; ++i) {
    // Residual at u_r.
    const Vector x_r = quantize_vector(x, action.u_r);
    const Vector ax = matvec(a_r, x_r, action.u_r);
    Vector r(n);
    for (std::size_t t = 0; t < n; ++t) r[t] = rnd_r.sub(b_r[t], ax[t]);
    if (!all_finite(r)) return fail("non-finite residual");

    // Correction at u_g.
    quantize_inplace(r, action.u_g);
    const GmresResult inner = gmres_left_preconditioned(a_g, lu_g, r, action.u_g, cfg.gmres_rtol, inner_cap);
    rep.gmres_iters_total += inner.iters;
    rep.outer_iters = i + 1;
    if (!all_finite(inner.z)) return fail("non-finite correction");

    // Update at u.
    const double x_norm = norm_inf_vec(x);
    const double z_norm = norm_inf_vec(inner.z);
    const Vector z_u = quantize_vector(inner.z, action.u);
    for (std::size_t t = 0; t < n; ++t) x[t] = rnd_u.add(x[t], z_u[t]);
    rep.x = x;
    if (!all_finite(x)) return fail("non-finite iterate");

    const double rel_update = x_norm > 0.0 ? z_norm / x_norm : (z_norm > 0.0 ? kInf : 0.0);
    if (rel_update <= conv_tol) {
      rep.status = SolveStatus::converged;
      break;
    }
    if (i > 0 && z_norm >= stag_ratio * prev_update) {
      rep.status = SolveStatus::stagnated;
      break;
    }
    prev_update = z_norm;
  }

  std::optional<Vector> owned_truth;
  std::span<const double> truth;
  if (x_true) {
    truth = *x_true;
  } else {
    owned_truth = reference_solve(a, b);
    if (!owned_truth) {
      rep.ferr = rep.err_normalized = kInf;
      rep.nbe = compute_errors(rep.x, rep.x, a, b).nbe;
      return rep;
    }
    truth = *owned_truth;
  }
  const auto err = compute_errors(rep.x, truth, a, b);
  rep.ferr = err.ferr;
  rep.nbe = err.nbe;
  rep.err_normalized = err.ferr / (norm_inf(a) * norm_inf_vec(truth) + norm_inf_vec(b));
  return rep;
}

}  // namespace prectune
