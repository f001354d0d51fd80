#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "prectune/fpemu.hpp"
#include "prectune/kernels.hpp"

namespace prectune {

/// Precisions for the four tagged GMRES-IR steps:
/// factorization, working (solution update), GMRES, residual.
struct PrecisionAction {
  Format u_f = Format::FP64;
  Format u = Format::FP64;
  Format u_g = Format::FP64;
  Format u_r = Format::FP64;

  /// u_f <= u <= u_g <= u_r in significand order.
  bool monotone() const;
  std::array<Format, 4> steps() const { return {u_f, u, u_g, u_r}; }

  friend bool operator==(const PrecisionAction&, const PrecisionAction&) = default;
};

inline constexpr PrecisionAction kAllFp64{};

/// "bf16|tf32|fp32|fp64"
std::string to_string(const PrecisionAction& a);
std::optional<PrecisionAction> parse_action(std::string_view text);

/// tolerance: converged when ||z||/||x|| <= max(tau_conv, u(u)); stagnated when
///   ||z_i||/||z_{i-1}|| >= stagnation.
/// literal: converged when ||z||/||x|| <= u(u); stagnated when
///   ||z_i||/||z_{i-1}|| >= tau_conv. The stagnation field is unused.
enum class StopRule { tolerance, literal };
std::string_view to_string(StopRule r);
std::optional<StopRule> parse_stop_rule(std::string_view s);

struct StopConfig {
  double tau_conv = 1e-6;   // experiment tolerance
  double stagnation = 0.9;  // ||z_i||/||z_{i-1}|| at or above this stops
  int i_max = 20;
  double gmres_rtol = 1e-4;
  int gmres_maxit = 100;  // effective cap is min(n, gmres_maxit)
  StopRule rule = StopRule::tolerance;

  void validate() const;
};

enum class SolveStatus { converged, stagnated, max_iter, failed };
std::string_view to_string(SolveStatus s);

struct SolveReport {
  Vector x;
  SolveStatus status = SolveStatus::failed;
  std::string failure_reason;  // empty unless status == failed
  int outer_iters = 0;
  int gmres_iters_total = 0;
  double ferr = 0.0;
  double nbe = 0.0;
  /// ferr / (||A|| ||x_true|| + ||b||), consumed by the accuracy reward.
  double err_normalized = 0.0;
  PrecisionAction action;
};

struct GmresResult {
  Vector z;
  int iters = 0;
  bool converged = false;
};

/// Unrestarted GMRES on U^-1 L^-1 A z = U^-1 L^-1 r, every operation rounded
/// to fmt. `a` and `factors` should already be representable in fmt.
/// Stops when the preconditioned residual drops to rtol times its initial
/// value or after min(n, maxit) iterations.
GmresResult gmres_left_preconditioned(const DenseMatrix& a, const LUFactors& factors, std::span<const double> r,
                                      Format fmt, double rtol, int maxit);

struct ErrorMetrics {
  double ferr;
  double nbe;
};

/// Normwise relative forward and backward error at full precision.
ErrorMetrics compute_errors(std::span<const double> x_solve, std::span<const double> x_true, const DenseMatrix& a,
                            std::span<const double> b);

/// FP64 LU solve used as ground truth when a problem carries none.
std::optional<Vector> reference_solve(const DenseMatrix& a, std::span<const double> b);

/// Mixed-precision GMRES-based iterative refinement.
SolveReport solve_gmres_ir(const DenseMatrix& a, std::span<const double> b, const PrecisionAction& action,
                           const StopConfig& cfg, std::optional<std::span<const double>> x_true = std::nullopt);

}  // namespace prectune
