#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prectune/agent.hpp"
#include "prectune/config_io.hpp"
#include "prectune/harness.hpp"
#include "prectune/matrix_market.hpp"
#include "prectune/problems.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prectune;

namespace {

// Thrown for bad user input; maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  if (const char* env = std::getenv("PRECTUNE_OUT"); env && *env) return env;
  return "runs";
}

struct Common {
  std::string config_path;
  std::string profile = "paper";
  std::optional<std::string> out;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
  cmd->add_option("--profile", c.profile, "Preset sizes: paper (default) or ci")
      ->check(CLI::IsMember({"paper", "ci"}));
  cmd->add_option("-o,--out", c.out, "Output directory (default under $PRECTUNE_OUT or ./runs)");
  cmd->add_option("-j,--workers", c.workers, "Worker threads for generation and evaluation")
      ->check(CLI::PositiveNumber);
}

json load_config(const Common& c) {
  if (c.config_path.empty()) return json::object();
  try {
    return json::parse(read_text(c.config_path));
  } catch (const json::exception& e) {
    throw UsageError("cannot parse config " + c.config_path + ": " + e.what());
  }
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.contains(key) ? doc.at(key) : empty;
}

std::string path_from(const json& doc, const char* key, const std::optional<std::string>& flag) {
  if (flag) return *flag;
  const json& paths = section(doc, "paths");
  if (paths.contains(key)) return paths.at(key).get<std::string>();
  return {};
}

std::string resolve_profile(const Common& c, const json& doc) {
  // An explicit --profile wins; otherwise a saved config may carry one.
  if (c.profile != "paper") return c.profile;
  return doc.value("profile", c.profile);
}

unsigned resolve_workers(const Common& c, const json& doc) {
  if (c.workers) return *c.workers;
  return doc.value("workers", 1U);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void persist(const fs::path& dir, const std::string& command, json doc) {
  doc["command"] = command;
  write_text(dir / (command + "_config.json"), doc.dump(2) + "\n");
}

template <typename T>
void apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

// ---- gen ----

struct GenFlags {
  Common common;
  std::optional<std::string> family, name;
  std::optional<std::size_t> n_train, n_test, n_min, n_max;
  std::optional<double> kappa_min, kappa_max, sigma_max, lambda_s, beta;
  std::optional<std::uint64_t> seed;
};

int run_gen(const GenFlags& f) {
  const json doc = load_config(f.common);
  const std::string profile = resolve_profile(f.common, doc);
  DatasetConfig cfg;
  if (profile == "ci") {
    cfg.n_min = 50;
    cfg.n_max = 120;
    cfg.n_train = 20;
    cfg.n_test = 20;
  }
  try {
    from_json(section(doc, "gen"), cfg);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (f.family) {
    const auto fam = parse_family(*f.family);
    if (!fam) throw UsageError("unknown family '" + *f.family + "' (valid: dense, sparse)");
    cfg.family = *fam;
  }
  apply(f.name, cfg.name);
  apply(f.n_train, cfg.n_train);
  apply(f.n_test, cfg.n_test);
  apply(f.n_min, cfg.n_min);
  apply(f.n_max, cfg.n_max);
  apply(f.kappa_min, cfg.kappa_min);
  apply(f.kappa_max, cfg.kappa_max);
  apply(f.sigma_max, cfg.sigma_max);
  apply(f.lambda_s, cfg.lambda_s);
  apply(f.beta, cfg.beta);
  apply(f.seed, cfg.seed);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::string out = path_from(doc, "out", f.common.out);
  if (out.empty()) out = (output_root() / cfg.name).string();
  const unsigned workers = resolve_workers(f.common, doc);
  ensure_dir(out);

  const GeneratedDataset ds = gen_dataset(cfg, out, workers);
  persist(out, "gen", {{"profile", profile}, {"workers", workers}, {"gen", cfg}, {"paths", {{"out", out}}}});

  for (const auto* m : {&ds.train, &ds.test}) {
    const DatasetStats st = dataset_stats(*m);
    std::cout << st.split << ": " << st.count << " systems, n in [" << st.n_min << ", " << st.n_max
              << "], kappa_est in [" << mm::format_double(st.kappa_min) << ", " << mm::format_double(st.kappa_max)
              << "], sparsity in [" << mm::format_double(st.sparsity_min) << ", "
              << mm::format_double(st.sparsity_max) << "]\n";
  }
  std::cout << ds.train_path.string() << '\n' << ds.test_path.string() << '\n';
  return 0;
}

// ---- train ----

struct TrainFlags {
  Common common;
  std::optional<std::string> data, weights, condition, stop_rule;
  std::optional<double> tau, alpha, eps_min, subsample, gamma, stagnation, gmres_rtol;
  std::optional<int> episodes, i_max, gmres_maxit;
  std::optional<std::size_t> cond_bins, norm_bins;
  std::optional<std::uint64_t> seed;
  bool literal_c2_sign = false;
};

void apply_stop_flags(StopConfig& s, const std::optional<double>& tau, const std::optional<double>& stagnation,
                      const std::optional<int>& i_max, const std::optional<double>& gmres_rtol,
                      const std::optional<int>& gmres_maxit, const std::optional<std::string>& rule) {
  if (rule) {
    const auto r = parse_stop_rule(*rule);
    if (!r) throw UsageError("unknown stop rule '" + *rule + "' (valid: tolerance, literal)");
    s.rule = *r;
  }
  apply(tau, s.tau_conv);
  apply(stagnation, s.stagnation);
  apply(i_max, s.i_max);
  apply(gmres_rtol, s.gmres_rtol);
  apply(gmres_maxit, s.gmres_maxit);
}

ConditionSource condition_or_throw(const std::string& name) {
  const auto c = parse_condition_source(name);
  if (!c) throw UsageError("unknown condition source '" + name + "' (valid: estimate, svd)");
  return *c;
}

int run_train(const TrainFlags& f) {
  const json doc = load_config(f.common);
  const std::string profile = resolve_profile(f.common, doc);
  TrainConfig cfg;
  if (profile == "ci") {
    cfg.episodes = 30;
    cfg.n_cond_bins = 5;
    cfg.n_norm_bins = 1;
  }
  try {
    from_json(section(doc, "train"), cfg);
    if (f.weights) {
      cfg.weights = weights_or_throw(*f.weights);
      cfg.weights_name = *f.weights;
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  apply(f.episodes, cfg.episodes);
  apply(f.alpha, cfg.alpha);
  apply(f.eps_min, cfg.eps_min);
  apply(f.seed, cfg.seed);
  apply(f.gamma, cfg.gamma);
  apply(f.cond_bins, cfg.n_cond_bins);
  apply(f.norm_bins, cfg.n_norm_bins);
  if (f.subsample) cfg.subsample_fraction = *f.subsample;
  if (f.condition) cfg.condition = condition_or_throw(*f.condition);
  if (f.literal_c2_sign) cfg.reward_options.literal_c2_sign = true;
  apply_stop_flags(cfg.stop, f.tau, f.stagnation, f.i_max, f.gmres_rtol, f.gmres_maxit, f.stop_rule);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const std::string data = path_from(doc, "data", f.data);
  if (data.empty()) throw UsageError("train needs --data <train manifest>");
  std::string out = path_from(doc, "out", f.common.out);
  if (out.empty()) out = (output_root() / "train").string();

  const DatasetManifest manifest = load_manifest(data);
  if (manifest.instances.empty()) throw UsageError("training manifest " + data + " has no systems");
  ensure_dir(out);
  const TrainResult res = train(manifest, cfg);
  save_qtable(res.q, fs::path(out) / "qtable.json");
  write_text(fs::path(out) / "episodes.csv", episodes_csv(res.log));
  persist(out, "train", {{"profile", profile}, {"train", cfg}, {"paths", {{"data", data}, {"out", out}}}});

  const auto& last = res.log.back();
  std::cout << "trained " << manifest.instances.size() << " systems x " << cfg.episodes << " episodes; final mean reward "
            << mm::format_double(last.mean_reward) << ", mean |RPE| " << mm::format_double(last.mean_abs_rpe) << '\n'
            << (fs::path(out) / "qtable.json").string() << '\n';
  return 0;
}

// ---- eval / baseline ----

struct EvalFlags {
  Common common;
  std::optional<std::string> data, qtable, weights, condition, stop_rule;
  std::optional<double> tau, tau_base, stagnation, gmres_rtol;
  std::optional<int> i_max, gmres_maxit;
  bool literal_c2_sign = false;
};

void print_summary(const EvalSummary& s) {
  std::cout << summary_csv(std::span<const EvalSummary>(&s, 1));
  for (const auto& note : s.notes) std::cout << "note: " << note << '\n';
}

int run_eval(const EvalFlags& f, bool baseline) {
  const char* command = baseline ? "baseline" : "eval";
  const json doc = load_config(f.common);
  const std::string profile = resolve_profile(f.common, doc);

  std::optional<QTable> q;
  const std::string qpath = path_from(doc, "qtable", f.qtable);
  if (!baseline) {
    if (qpath.empty()) throw UsageError("eval needs --qtable <file>");
    q = load_qtable(qpath);
  }

  EvalConfig cfg;
  if (q) {
    // Defaults follow the training run so that rewards and stopping match.
    cfg.stop.tau_conv = q->tau_conv;
    cfg.condition = q->condition;
    cfg.stop.rule = q->stop_rule;
    if (weights_preset(q->weights_name)) {
      cfg.weights_name = q->weights_name;
      cfg.weights = *weights_preset(q->weights_name);
    }
  }
  try {
    from_json(section(doc, "eval"), cfg);
    if (f.weights) {
      cfg.weights = weights_or_throw(*f.weights);
      cfg.weights_name = *f.weights;
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  apply(f.tau_base, cfg.tau_base);
  if (f.condition) cfg.condition = condition_or_throw(*f.condition);
  if (f.literal_c2_sign) cfg.reward_options.literal_c2_sign = true;
  apply_stop_flags(cfg.stop, f.tau, f.stagnation, f.i_max, f.gmres_rtol, f.gmres_maxit, f.stop_rule);
  cfg.workers = resolve_workers(f.common, doc);
  try {
    cfg.stop.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(cfg.tau_base > 0.0)) throw UsageError("--tau-base must be positive");
  if (q && q->condition != cfg.condition) {
    std::cerr << "warning: the Q-table was trained on '" << to_string(q->condition)
              << "' condition features; evaluating with the same\n";
    cfg.condition = q->condition;
    cfg.stop.rule = q->stop_rule;
  }
  if (q && cfg.stop.tau_conv != q->tau_conv) {
    std::cerr << "warning: convergence tolerance " << mm::format_double(cfg.stop.tau_conv)
              << " differs from the training tolerance " << mm::format_double(q->tau_conv)
              << "; the baseline should use the same value\n";
  }

  const std::string data = path_from(doc, "data", f.data);
  if (data.empty()) throw UsageError(std::string(command) + " needs --data <test manifest>");
  std::string out = path_from(doc, "out", f.common.out);
  if (out.empty()) out = (output_root() / command).string();

  const DatasetManifest manifest = load_manifest(data);
  ensure_dir(out);
  const EvalSummary s = baseline ? baseline_fp64(manifest, cfg) : evaluate(*q, manifest, cfg);
  report(std::span<const EvalSummary>(&s, 1), {}, out);
  json paths = {{"data", data}, {"out", out}};
  if (!baseline) paths["qtable"] = qpath;
  persist(out, command, {{"profile", profile}, {"workers", cfg.workers}, {"eval", cfg}, {"paths", paths}});
  print_summary(s);
  return 0;
}

// ---- report ----

struct ReportFlags {
  Common common;
  std::vector<std::string> inputs;
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string label_for(const fs::path& file, const fs::path& root) {
  std::string label = fs::relative(file.parent_path(), root).generic_string();
  if (label == ".") label = root.filename().string();
  std::replace(label.begin(), label.end(), '/', '_');
  return label;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

int run_report(const ReportFlags& f) {
  if (f.inputs.empty()) throw UsageError("report needs at least one --in directory");
  std::vector<std::pair<fs::path, fs::path>> files;  // (file, root)
  for (const auto& in : f.inputs) {
    if (!fs::is_directory(in)) throw UsageError("report input " + in + " is not a directory");
    for (const auto& entry : fs::recursive_directory_iterator(in)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && (name == "summary.csv" || name == "usage.csv" || name == "episodes.csv"))
        files.emplace_back(entry.path(), fs::path(in));
    }
  }
  std::sort(files.begin(), files.end());
  std::string out = f.common.out.value_or((output_root() / "report").string());
  // Never read back what this command writes.
  const auto out_abs = fs::weakly_canonical(out);
  std::erase_if(files, [&](const auto& p) { return fs::weakly_canonical(p.first.parent_path()) == out_abs; });
  if (files.empty()) throw UsageError("nothing to report: no summary.csv, usage.csv or episodes.csv under the inputs");

  std::string summary = std::string(kSummaryHeader) + "\n";
  std::string usage = std::string(kUsageHeader) + "\n";
  std::vector<std::vector<std::string>> summary_rows, usage_rows;
  std::map<std::string, std::string> episodes;
  std::map<std::string, double> taus;
  for (const auto& [file, root] : files) {
    const auto lines = split_lines(read_text(file));
    const auto name = file.filename().string();
    const std::string_view header = name == "summary.csv" ? kSummaryHeader
                                    : name == "usage.csv" ? kUsageHeader
                                                          : kEpisodesHeader;
    if (lines.empty() || lines.front() != header) throw std::runtime_error(file.string() + ": unexpected header");
    if (name == "episodes.csv") {
      episodes[label_for(file, root)] = read_text(file);
      continue;
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      (name == "summary.csv" ? summary : usage) += lines[i] + "\n";
      (name == "summary.csv" ? summary_rows : usage_rows).push_back(split_fields(lines[i]));
    }
    for (const char* cfg_name : {"eval_config.json", "baseline_config.json"}) {
      const fs::path cfg_path = file.parent_path() / cfg_name;
      if (fs::exists(cfg_path)) {
        const json cfg = json::parse(read_text(cfg_path));
        if (cfg.contains("eval") && cfg.at("eval").contains("tau_conv"))
          taus[label_for(file, root)] = cfg.at("eval").at("tau_conv").get<double>();
      }
    }
  }
  if (taus.size() > 1) {
    const double first = taus.begin()->second;
    for (const auto& [label, tau] : taus)
      if (tau != first)
        std::cerr << "warning: inputs use different convergence tolerances (" << taus.begin()->first << ": "
                  << mm::format_double(first) << ", " << label << ": " << mm::format_double(tau) << ")\n";
  }

  ensure_dir(out);
  write_text(fs::path(out) / "summary.csv", summary);
  write_text(fs::path(out) / "usage.csv", usage);
  for (const auto& [label, text] : episodes) write_text(fs::path(out) / ("episodes_" + label + ".csv"), text);

  // Plain-text tables shaped like the result tables: one block per method.
  std::ostringstream tables;
  tables << pad("Method", 8) << pad("Range", 8) << pad("Num", 5) << pad("xi", 8) << pad("Avg ferr", 14)
         << pad("Avg nbe", 14) << pad("Avg iter", 10) << "Avg GMRES iter\n";
  for (const auto& r : summary_rows) {
    if (r.size() < 8) continue;
    tables << pad(r[0], 8) << pad(r[1], 8) << pad(r[2], 5) << pad(r[3], 8) << pad(r[4], 14) << pad(r[5], 14)
           << pad(r[6], 10) << r[7] << '\n';
  }
  tables << '\n' << pad("Method", 8) << pad("Decade", 8) << pad("Num", 5);
  for (Format fmt : kAllFormats) tables << pad(std::string(format_name(fmt)), 8);
  tables << '\n';
  for (const auto& r : usage_rows) {
    if (r.size() < 3 + kAllFormats.size()) continue;
    tables << pad(r[0], 8) << pad("1e" + r[1], 8) << pad(r[2], 5);
    for (std::size_t k = 0; k < kAllFormats.size(); ++k) tables << pad(r[3 + k], 8);
    tables << '\n';
  }
  write_text(fs::path(out) / "tables.txt", tables.str());
  persist(out, "report", {{"paths", {{"in", f.inputs}, {"out", out}}}});
  std::cout << tables.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision GMRES-IR with a learned precision selector"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "Generate a train/test dataset");
  add_common(g, gen.common);
  g->add_option("--family", gen.family, "dense or sparse");
  g->add_option("--name", gen.name, "Dataset name");
  g->add_option("--n-train", gen.n_train, "Training systems");
  g->add_option("--n-test", gen.n_test, "Test systems");
  g->add_option("--n-min", gen.n_min, "Smallest matrix size");
  g->add_option("--n-max", gen.n_max, "Largest matrix size");
  g->add_option("--kappa-min", gen.kappa_min, "Smallest target condition number (dense)");
  g->add_option("--kappa-max", gen.kappa_max, "Largest target condition number (dense)");
  g->add_option("--sigma-max", gen.sigma_max, "Largest singular value (dense)");
  g->add_option("--lambda-s", gen.lambda_s, "Sparsity factor of the sparse generator");
  g->add_option("--beta", gen.beta, "Diagonal shift of the sparse generator");
  g->add_option("--seed", gen.seed, "Global seed");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a Q-table on a training manifest");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Training manifest (train.json)");
  t->add_option("--weights", tr.weights, "Reward weight preset: W1 or W2");
  t->add_option("--tau", tr.tau, "Tolerance on ||z||/||x|| (stagnation ratio under --stop-rule literal)");
  t->add_option("--episodes", tr.episodes, "Episodes T");
  t->add_option("--alpha", tr.alpha, "Learning rate");
  t->add_option("--eps-min", tr.eps_min, "Exploration floor");
  t->add_option("--seed", tr.seed, "Agent seed");
  t->add_option("--subsample", tr.subsample, "Keep this fraction of the action space");
  t->add_option("--gamma", tr.gamma, "Discount factor (recorded, has no effect)");
  t->add_option("--cond-bins", tr.cond_bins, "Bins for the condition feature");
  t->add_option("--norm-bins", tr.norm_bins, "Bins for the norm feature");
  t->add_option("--condition", tr.condition, "Condition feature: estimate or svd");
  t->add_option("--i-max", tr.i_max, "Refinement step cap");
  t->add_option("--stagnation", tr.stagnation, "Stagnation ratio");
  t->add_option("--stop-rule", tr.stop_rule, "Stopping rule: tolerance or literal");
  t->add_option("--gmres-rtol", tr.gmres_rtol, "GMRES relative tolerance");
  t->add_option("--gmres-maxit", tr.gmres_maxit, "GMRES iteration cap");
  t->add_flag("--literal-c2-sign", tr.literal_c2_sign, "Score failed solves as +5 instead of -5");

  EvalFlags ev, bl;
  auto add_eval_options = [](CLI::App* cmd, EvalFlags& e) {
    add_common(cmd, e.common);
    cmd->add_option("--data", e.data, "Test manifest (test.json)");
    cmd->add_option("--weights", e.weights, "Reward weight preset used for the reward columns");
    cmd->add_option("--tau", e.tau, "Tolerance on ||z||/||x|| (stagnation ratio under --stop-rule literal)");
    cmd->add_option("--tau-base", e.tau_base, "Success threshold base");
    cmd->add_option("--condition", e.condition, "Condition feature: estimate or svd");
    cmd->add_option("--i-max", e.i_max, "Refinement step cap");
    cmd->add_option("--stagnation", e.stagnation, "Stagnation ratio");
    cmd->add_option("--stop-rule", e.stop_rule, "Stopping rule: tolerance or literal");
    cmd->add_option("--gmres-rtol", e.gmres_rtol, "GMRES relative tolerance");
    cmd->add_option("--gmres-maxit", e.gmres_maxit, "GMRES iteration cap");
    cmd->add_flag("--literal-c2-sign", e.literal_c2_sign, "Score failed solves as +5 instead of -5");
  };
  auto* e = app.add_subcommand("eval", "Evaluate a trained Q-table greedily on a test manifest");
  add_eval_options(e, ev);
  e->add_option("--qtable", ev.qtable, "Trained Q-table");
  auto* b = app.add_subcommand("baseline", "Solve a test manifest with all-FP64 GMRES-IR");
  add_eval_options(b, bl);

  ReportFlags rp;
  auto* r = app.add_subcommand("report", "Merge evaluation outputs into result tables");
  add_common(r, rp.common);
  r->add_option("-i,--in", rp.inputs, "Directories holding eval/baseline/train outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev, false);
    if (b->parsed()) return run_eval(bl, true);
    if (r->parsed()) return run_report(rp);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
