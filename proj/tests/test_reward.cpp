#include <cmath>

#include "doctest.h"
#include "prectune/problems.hpp"
#include "prectune/reward.hpp"

using namespace prectune;

namespace {
const PrecisionAction kAllBf16{Format::BF16, Format::BF16, Format::BF16, Format::BF16};
}

TEST_CASE("precision term") {
  CHECK(precision_term(kAllFp64, 1.0) == 4.0);
  CHECK(precision_term(kAllBf16, 1.0) == 26.5);
  CHECK(precision_term(kAllFp64, 1e4) == 0.8);
  CHECK(precision_term(kAllFp64, 0.0) == 4.0);
  const PrecisionAction mid{Format::BF16, Format::FP32, Format::FP64, Format::FP64};
  CHECK(precision_term(mid, 1e2) < precision_term(mid, 1e1));
  CHECK(precision_term(kAllFp64, 1e2) < precision_term(mid, 1e2));
}

TEST_CASE("accuracy term") {
  CHECK(accuracy_term(1e-12, 1e-15) == 20.0);
  CHECK(accuracy_term(1e-2, 1e-8) == 10.0);
  CHECK(accuracy_term(2.0, 1e-8) == -5.0);
  CHECK(accuracy_term(1e-3, 2.0) == -5.0);
  CHECK(accuracy_term(NAN, 1e-8) == -5.0);
  CHECK(accuracy_term(INFINITY, 1e-8) == -5.0);
  CHECK(accuracy_term(2.0, 1e-8, {true}) == 5.0);
  CHECK(failure_accuracy() == -5.0);
  CHECK(accuracy_term(1.0, 1.0) == 0.0);
  double prev = 21.0;
  for (double e = 1e-14; e <= 1.0; e *= 10) {
    const double v = accuracy_term(e, 1e-12);
    CHECK(v <= prev);
    CHECK(v >= -5.0);
    CHECK(v <= 20.0);
    prev = v;
  }
}

TEST_CASE("accuracy term from vectors") {
  const DenseMatrix a = DenseMatrix::identity(2);
  const Vector x_true{1.0, 1.0};
  CHECK(accuracy_term(x_true, x_true, a, x_true) == 20.0);
  const Vector off{1.01, 1.0};
  // ferr = 1e-2, normalized = 1e-2 / (1 + 1) = 5e-3
  CHECK(accuracy_term(off, x_true, a, x_true) == doctest::Approx(2.0 + -std::log10(5e-3)));
}

TEST_CASE("penalty term") {
  CHECK(penalty_term(0) == 0.0);
  CHECK(penalty_term(1) == 0.0);
  CHECK(penalty_term(8) == 3.0);
  CHECK(penalty_term(4) == 2.0);
  for (int t = 1; t < 200; ++t) CHECK(penalty_term(t) <= penalty_term(t + 1));
}

TEST_CASE("total reward compositions") {
  SolveReport rep;
  rep.action = kAllFp64;
  rep.status = SolveStatus::converged;
  rep.ferr = 0.0;
  rep.err_normalized = 0.0;
  rep.gmres_iters_total = 4;
  const Context ctx{0.0, 0.0};

  const RewardBreakdown w2 = total_reward(rep, ctx, *weights_preset("W2"));
  CHECK(w2.f_precision == 4.0);
  CHECK(w2.f_accuracy == 20.0);
  CHECK(w2.f_penalty == 2.0);
  CHECK(w2.total == 22.0);
  CHECK_FALSE(w2.failed);

  const RewardBreakdown w1 = total_reward(rep, ctx, *weights_preset("W1"));
  CHECK(w1.total == 18.4);

  const RewardWeights custom{2.0, 0.5, 0.0};
  const RewardBreakdown c = total_reward(rep, ctx, custom);
  CHECK(c.total == 0.5 * 4.0 + 2.0 * 20.0);
}

TEST_CASE("failed solves score -C2") {
  SolveReport rep;
  rep.action = kAllBf16;
  rep.status = SolveStatus::failed;
  rep.ferr = INFINITY;
  rep.err_normalized = INFINITY;
  rep.gmres_iters_total = 0;
  const Context ctx{8.0, 0.0};
  const RewardBreakdown r = total_reward(rep, ctx, *weights_preset("W2"));
  CHECK(r.failed);
  CHECK(r.f_accuracy == -5.0);
  CHECK(r.f_precision == 26.5 / 9.0);
  CHECK(r.total == doctest::Approx(r.f_precision - 5.0 - r.f_penalty));
  CHECK(total_reward(rep, ctx, *weights_preset("W2"), {true}).f_accuracy == 5.0);

  rep.status = SolveStatus::max_iter;
  rep.ferr = 3.0;
  rep.err_normalized = 3.0;
  CHECK(total_reward(rep, ctx, *weights_preset("W2")).f_accuracy == -5.0);
}

TEST_CASE("weights") {
  CHECK(weights_preset("W1") == RewardWeights{1.0, 0.1, 1.0});
  CHECK(weights_preset("W2") == RewardWeights{1.0, 1.0, 1.0});
  CHECK_FALSE(weights_preset("W3").has_value());
  CHECK_FALSE(weights_preset("w1").has_value());
  CHECK_THROWS_AS((RewardWeights{0.0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((RewardWeights{1.0, 1.0, -1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((RewardWeights{1.0, 1.0, 0.0}.validate()));
}
