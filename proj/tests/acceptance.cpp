// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit code
// is nonzero when any selected criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "prectune/harness.hpp"

using namespace prectune;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

// Desk-scale training setup shared by the learning criteria. Thirty systems
// cannot populate a 10 x 10 grid, and the norm feature only tracks n here.
// The exact 2-norm condition number puts systems in the decade they were
// generated for.
struct Desk {
  std::size_t cond_bins = 5;
  std::size_t norm_bins = 1;
  ConditionSource condition = ConditionSource::exact_svd_2norm;
  StopRule rule = StopRule::tolerance;
};
const Desk kDesk;

std::vector<ProblemInstance> suite(Family family, std::size_t count, std::size_t n_min, std::size_t n_max,
                                   std::uint64_t seed, std::string_view split) {
  DatasetConfig c;
  c.family = family;
  c.n_train = count;
  c.n_test = count;
  c.n_min = n_min;
  c.n_max = n_max;
  c.seed = seed;
  std::vector<ProblemInstance> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_instance(c, split, i));
  return out;
}

TrainConfig desk_train(const std::string& weights, std::uint64_t seed) {
  TrainConfig t;
  t.episodes = 30;
  t.alpha = 0.5;
  t.weights_name = weights;
  t.weights = *weights_preset(weights);
  t.seed = seed;
  t.n_cond_bins = kDesk.cond_bins;
  t.n_norm_bins = kDesk.norm_bins;
  t.condition = kDesk.condition;
  t.stop.rule = kDesk.rule;
  t.stop.tau_conv = 1e-6;
  return t;
}

EvalConfig desk_eval(const TrainConfig& t) {
  EvalConfig e;
  e.stop = t.stop;
  e.weights_name = t.weights_name;
  e.weights = t.weights;
  e.tau_base = 1e-10;
  e.condition = t.condition;
  return e;
}

double fp64_usage(const UsageRow& u) { return u.avg_count[static_cast<std::size_t>(Format::FP64)]; }

// ---- 1 ----

Outcome format_fidelity() {
  struct Printed {
    Format f;
    long double u, x_min, x_max;  // 1.80e308 does not fit in a double
  };
  const Printed table[] = {{Format::BF16, 3.91e-3L, 1.18e-38L, 3.39e38L},
                           {Format::FP16, 4.88e-4L, 6.10e-5L, 6.55e4L},
                           {Format::TF32, 9.77e-4L, 1.18e-38L, 1.70e38L},
                           {Format::FP32, 5.96e-8L, 1.18e-38L, 3.40e38L},
                           {Format::FP64, 1.11e-16L, 2.23e-308L, 1.80e308L}};
  bool ok = true;
  std::string misses;
  for (const auto& row : table) {
    const Format f = row.f;
    // Measure from round_to: u is half the gap above 1, x_max the largest
    // value that survives rounding, x_min the smallest value kept under
    // flush-to-zero.
    double gap = 1.0;
    while (round_to(1.0 + gap / 2, f) != 1.0) gap /= 2;
    const double u = gap / 2;
    const double x_max = round_to(spec(f).x_max, f);
    const bool overflow_ok = std::isinf(round_to(x_max * (1 + 2 * u), f));
    const double x_min = round_to(spec(f).x_min, f, Underflow::flush_to_zero);
    const bool underflow_ok = round_to(x_min / 2, f, Underflow::flush_to_zero) == 0.0 && round_to(x_min / 2, f) == x_min / 2;
    auto close = [](long double got, long double printed) { return std::fabs(got - printed) <= 0.01L * printed; };
    const std::string name(format_name(f));
    if (!close(u, row.u)) misses += " " + name + ".u=" + num(u) + "(printed " + num(static_cast<double>(row.u)) + ")";
    if (!close(x_min, row.x_min) || !underflow_ok)
      misses += " " + name + ".x_min=" + num(x_min) + "(printed " + num(static_cast<double>(row.x_min)) + ")";
    if (!close(x_max, row.x_max) || !overflow_ok)
      misses += " " + name + ".x_max=" + num(x_max) + "(printed " + num(static_cast<double>(row.x_max)) + ")";
  }
  const bool bf16_exact = unit_roundoff(Format::BF16) == std::ldexp(1.0, -8);
  if (!bf16_exact) misses += " bf16 u != 2^-8";
  ok = misses.empty();
  return {ok, ok ? "u, x_min, x_max within 1% for all five formats; bf16 u = 2^-8" : "mismatch:" + misses};
}

// ---- 2 ----

Outcome action_count() {
  const ActionSpace space = enumerate_actions(default_formats());
  std::size_t brute = 0;
  bool same = true;
  const auto fs4 = default_formats();
  for (Format a : fs4)
    for (Format b : fs4)
      for (Format c : fs4)
        for (Format d : fs4) {
          const PrecisionAction act{a, b, c, d};
          if (!act.monotone()) continue;
          ++brute;
          same = same && space.index_of(act).has_value();
        }
  const bool ok = space.size() == 35 && brute == 35 && same;
  return {ok, std::to_string(space.size()) + " actions, brute-force filter " + std::to_string(brute) + " of 256"};
}

// ---- 3 ----

Outcome fp64_baseline() {
  const auto systems = suite(Family::dense_randsvd, 30, 50, 150, 1, "test");
  EvalConfig e;
  e.stop.tau_conv = 1e-6;
  const EvalSummary s = baseline_fp64(systems, e);
  double nbe = 0.0, iters = 0.0;
  for (const auto& r : s.systems) {
    nbe += r.nbe;
    iters += r.outer_iters;
  }
  nbe /= static_cast<double>(s.systems.size());
  iters /= static_cast<double>(s.systems.size());
  const bool ok = nbe <= 1e-15 && iters >= 1.0 && iters <= 3.0;
  return {ok, "avg nbe " + num(nbe) + ", avg outer iterations " + num(iters)};
}

// ---- 4 ----

Outcome w1_parity() {
  const auto train_set = suite(Family::dense_randsvd, 30, 50, 150, 1, "train");
  const auto test_set = suite(Family::dense_randsvd, 30, 50, 150, 1, "test");
  const TrainConfig t = desk_train("W1", 1);
  const QTable q = train(train_set, t).q;
  const EvalConfig e = desk_eval(t);
  const EvalSummary rl = evaluate(q, test_set, e);
  const EvalSummary base = baseline_fp64(test_set, e);
  bool ok = !rl.ranges.empty();
  std::string detail;
  for (const auto& r : rl.ranges) {
    const auto b = std::find_if(base.ranges.begin(), base.ranges.end(), [&](const RangeRow& x) { return x.range == r.range; });
    const double ratio = r.median_ferr / b->median_ferr;
    const bool row_ok = r.xi.value_or(0.0) >= 0.9 && ratio <= 10.0 && ratio >= 0.1;
    ok = ok && row_ok;
    detail += r.range + ": xi=" + num(*r.xi) + " median ferr " + num(r.median_ferr) + " vs " + num(b->median_ferr) + "; ";
  }
  return {ok, detail};
}

// ---- 5 ----

Outcome adaptive_usage() {
  int passes = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto train_set = suite(Family::dense_randsvd, 30, 50, 150, seed, "train");
    const auto test_set = suite(Family::dense_randsvd, 30, 50, 150, seed, "test");
    const TrainConfig t = desk_train("W2", seed);
    const QTable q = train(train_set, t).q;
    const EvalSummary rl = evaluate(q, test_set, desk_eval(t));
    std::optional<double> low, high;
    for (const auto& u : rl.usage) {
      if (u.decade == 1) low = fp64_usage(u);
      if (u.decade == 8) high = fp64_usage(u);
    }
    const bool ok = low && high && *high >= 3.5 && *high > *low;
    passes += ok ? 1 : 0;
    detail += "seed " + std::to_string(seed) + ": fp64 " + (low ? num(*low) : "--") + " in [1e1,1e2) vs " +
              (high ? num(*high) : "--") + " in [1e8,1e9)" + (ok ? " ok; " : " no; ");
  }
  return {passes >= 2, detail + std::to_string(passes) + "/3 seeds"};
}

// ---- 6 ----

Outcome sparse_fallback() {
  const auto train_set = suite(Family::sparse_spd, 20, 100, 200, 1, "train");
  const auto test_set = suite(Family::sparse_spd, 20, 100, 200, 1, "test");
  const TrainConfig t = desk_train("W2", 1);
  const QTable q = train(train_set, t).q;
  const EvalSummary rl = evaluate(q, test_set, desk_eval(t));
  double usage = 0.0, kappa_min = INFINITY;
  for (const auto& s : rl.systems) {
    const auto steps = s.action.steps();
    usage += static_cast<double>(std::count(steps.begin(), steps.end(), Format::FP64));
    kappa_min = std::min(kappa_min, s.kappa_est);
  }
  usage /= static_cast<double>(rl.systems.size());
  bool all_xi = true;
  for (const auto& r : rl.ranges) all_xi = all_xi && r.xi == 1.0;
  const bool ok = usage >= 3.8 && all_xi;
  return {ok, "fp64 usage " + num(usage) + ", xi=1 in every range: " + (all_xi ? "yes" : "no") + ", min kappa_est " +
                  num(kappa_min)};
}

// ---- 7 ----

Outcome bandit_properties() {
  std::vector<std::string> fails;
  BinSpec bins;
  bins.cond = {0.0, 10.0, 4};
  bins.norm = {0.0, 2.0, 2};
  const ActionSpace space = enumerate_actions(default_formats());

  {  // convex combination bound
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> rew(-20.0, 30.0);
    std::uniform_int_distribution<std::size_t> cell(0, 7);
    QTable q(bins, space, 0.5);
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < 5000; ++k) {
      const std::size_t s = cell(rng), a = cell(rng);
      const double before = q.value(s, a), r = rew(rng);
      q.update(s, a, r);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      if (q.value(s, a) < std::min(before, r) || q.value(s, a) > std::max(before, r)) {
        fails.push_back("convex bound");
        break;
      }
    }
  }
  {  // geometric convergence
    QTable q(bins, space, 0.3);
    for (int n = 1; n <= 50; ++n) {
      q.update(0, 0, 10.0);
      if (std::fabs(q.value(0, 0) - 10.0) > std::pow(0.7, n) * 10.0 * (1 + 1e-9) + 1e-14) {
        fails.push_back("geometric convergence");
        break;
      }
    }
  }
  {  // epsilon endpoints
    const EpsilonSchedule s{100, 0.01};
    if (epsilon_at(0, s) != 1.0 || epsilon_at(100, s) != 0.01) fails.push_back("epsilon endpoints");
  }
  {  // uniformity at eps = 1
    QTable q(bins, space, 0.5);
    Rng rng(123);
    std::vector<int> hits(q.n_actions(), 0);
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) ++hits[select_action(q, {0, 0, 0}, 1.0, rng)];
    const double p = 1.0 / static_cast<double>(q.n_actions());
    const double sigma = std::sqrt(draws * p * (1 - p));
    for (int h : hits)
      if (std::fabs(h - draws * p) > 5 * sigma) {
        fails.push_back("uniformity");
        break;
      }
  }
  {  // tie-break
    QTable q(bins, space, 0.5);
    const std::size_t a = *space.index_of({Format::BF16, Format::BF16, Format::BF16, Format::FP64});
    const std::size_t b = *space.index_of({Format::BF16, Format::BF16, Format::TF32, Format::TF32});
    q.set_value(1, a, 2.0);
    q.set_value(1, b, 2.0);
    for (int k = 0; k < 5; ++k)
      if (q.greedy(1) != b) fails.push_back("tie-break");
  }
  {  // save/load
    QTable q(bins, space, 0.5);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int k = 0; k < 300; ++k) q.update(k % q.n_states(), (k * 11) % q.n_actions(), nd(rng));
    q.weights_name = "W2";
    const fs::path p = fs::temp_directory_path() / "prectune_acceptance_q.json";
    save_qtable(q, p);
    if (!(load_qtable(p) == q)) fails.push_back("round trip");
    fs::remove(p);
  }
  std::string detail = "convex bound, geometric convergence, epsilon endpoints, 5-sigma uniformity, tie-break, round trip";
  if (!fails.empty()) {
    detail = "failed:";
    for (const auto& f : fails) detail += " " + f;
  }
  return {fails.empty(), detail};
}

// ---- 8 ----

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::size_t cases = 0, mismatches = 0;
  for (Format f : kAllFormats) {
    for (std::size_t n = 1; n <= 6; ++n) {
      for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix a = oracle::random_matrix(n, rng);
        const Vector b = oracle::random_vector(n, rng);
        const auto ref = oracle::lu(oracle::to_rows(a), f);
        const auto got = lu_factor(a, f);
        ++cases;
        if (ref.has_value() != std::holds_alternative<LUFactors>(got)) {
          ++mismatches;
          continue;
        }
        const DenseMatrix aq = quantize_matrix(a, f);
        const Vector bq = quantize_vector(b, f);
        if (matvec(aq, bq, f) != oracle::matvec(oracle::to_rows(aq), bq, f)) ++mismatches;
        if (!ref) continue;
        const LUFactors lu = std::get<LUFactors>(got);
        if (lu.pivot != ref->perm || oracle::to_rows(lu.lu) != ref->lu || lu_solve(lu, b, f) != oracle::solve(*ref, b, f))
          ++mismatches;
      }
    }
  }
  std::size_t bound_misses = 0;
  double worst = 1.0;
  std::mt19937_64 rng8(99);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseMatrix a = oracle::random_matrix(8, rng8);
    const double exact = oracle::kappa_1(a);
    const double est = condest_1(a);
    worst = std::min(worst, est / exact);
    if (est > exact * (1 + 1e-10) || est < exact / 10) ++bound_misses;
  }
  const bool ok = mismatches == 0 && bound_misses == 0;
  return {ok, std::to_string(cases) + " kernel cases, " + std::to_string(mismatches) + " mismatches; condest worst ratio " +
                  num(worst) + ", " + std::to_string(bound_misses) + " of 50 outside [kappa/10, kappa]"};
}

// ---- 9 ----

Outcome reward_arithmetic() {
  const PrecisionAction bf16{Format::BF16, Format::BF16, Format::BF16, Format::BF16};
  SolveReport rep;
  rep.action = kAllFp64;
  rep.status = SolveStatus::converged;
  rep.gmres_iters_total = 4;
  const Context ctx{0.0, 0.0};
  const bool ok = precision_term(kAllFp64, 1.0) == 4.0 && precision_term(bf16, 1.0) == 26.5 &&
                  precision_term(kAllFp64, 1e4) == 0.8 && accuracy_term(1e-12, 1e-15) == 20.0 &&
                  accuracy_term(1e-2, 1e-8) == 10.0 && accuracy_term(2.0, 1e-8) == -5.0 && penalty_term(1) == 0.0 &&
                  penalty_term(8) == 3.0 && penalty_term(0) == 0.0 &&
                  total_reward(rep, ctx, *weights_preset("W2")).total == 22.0 &&
                  total_reward(rep, ctx, *weights_preset("W1")).total == 18.4;
  return {ok, "precision 4.0/26.5/0.8, accuracy 20/10/-5, penalty 0/3/0, totals 22.0 (W2) and 18.4 (W1)"};
}

// ---- 10 ----

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PRECTUNE_BIN) + " " + args + " >> " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "prectune_acceptance_e2e";
  fs::remove_all(root);
  for (const char* tag : {"a", "b"}) {
    const fs::path d = root / tag;
    fs::create_directories(d);
    const fs::path log = d / "log.txt";
    const std::string p = d.string();
    const std::string steps[] = {
        "gen --profile ci --seed 7 -o " + p + "/data",
        "train --profile ci --data " + p + "/data/train.json --seed 7 -o " + p + "/train",
        "eval --qtable " + p + "/train/qtable.json --data " + p + "/data/test.json -o " + p + "/eval",
        "baseline --data " + p + "/data/test.json -o " + p + "/base",
        "report -i " + p + "/eval -i " + p + "/base -i " + p + "/train -o " + p + "/report"};
    for (const auto& s : steps)
      if (run(s, log) != 0) return {false, "command failed: prectune " + s};
  }
  std::size_t compared = 0;
  std::string differs;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    const std::string name = rel.filename().string();
    // Resolved configs and logs record the output paths, which differ by design.
    if (name == "log.txt" || name.ends_with("_config.json")) continue;
    ++compared;
    if (read_text(entry.path()) != read_text(root / "b" / rel)) differs += " " + rel.string();
  }
  fs::remove_all(root);
  const bool ok = differs.empty() && compared > 0;
  return {ok, std::to_string(compared) + " files compared" + (ok ? ", all byte-identical" : "; differing:" + differs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number (repeatable); default all")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"format fidelity", format_fidelity}},
      {2, {"action-space count", action_count}},
      {3, {"fp64 baseline trend", fp64_baseline}},
      {4, {"W1 accuracy parity", w1_parity}},
      {5, {"condition-adaptive usage", adaptive_usage}},
      {6, {"sparse safety fallback", sparse_fallback}},
      {7, {"bandit properties", bandit_properties}},
      {8, {"numerical oracle equivalence", oracle_equivalence}},
      {9, {"reward arithmetic", reward_arithmetic}},
      {10, {"end-to-end determinism", determinism}}};

  bool all = true;
  for (int id : selected) {
    const auto& [name, check] = criteria.at(id);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail << " ["
              << num(secs) << " s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
