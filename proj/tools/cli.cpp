#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "fpdhf/config.hpp"
#include "fpdhf/deblur.hpp"
#include "fpdhf/error.hpp"
#include "fpdhf/probes.hpp"
#include "presets.hpp"

namespace fpdhf::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "fpdhf-out";
  std::optional<long> seed;
  std::vector<std::string> overrides;
  std::optional<long> max_iters;
  std::optional<double> tol;
  std::string preset;
  int parallel = 1;
};

struct ValidateOptions {
  std::optional<double> beta;
  double zeta = 0.0;
  double l_norm = 0.0;
  std::optional<double> tau;
  std::optional<double> sigma;
  std::optional<double> eps;
  double rho = 0.0;
  std::string recipe;
};

/// Config from --config (or empty) with the flag shortcuts and --set
/// overrides applied; bare keys land in `section`.
KeyValueConfig effective_config(const CommonOptions& o, const std::string& section) {
  KeyValueConfig cfg = o.config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(o.config_path);
  const bool solve = section == "solve";
  if (o.seed) cfg.set(section, "seed", std::to_string(*o.seed));
  if (o.max_iters) cfg.set(section, "max_iters", std::to_string(*o.max_iters));
  if (o.tol) cfg.set(section, solve ? "tol" : "rel_pd_tol", format_double(*o.tol));
  if (!o.preset.empty()) cfg.set("solve", "preset", o.preset);
  for (const auto& kv : o.overrides) cfg.apply_override(kv, section);
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  return f;
}

void write_vector(std::ostream& out, const char* name, const Vector& v) {
  out << name << " =";
  for (Index i = 0; i < v.size(); ++i) out << (i ? "," : " ") << format_double(v[i]);
  out << '\n';
}

/// metrics.csv, solution.txt and a manifest that reloads into the same run.
void write_solve_artifacts(const fs::path& dir, KeyValueConfig cfg, const SolveOutcome& s) {
  fs::create_directories(dir);
  {
    auto f = open_output(dir / "metrics.csv");
    MetricsCsvWriter w(f);
    for (const auto& r : s.report.records) w.write(r);
  }
  {
    auto f = open_output(dir / "solution.txt");
    write_vector(f, "x", s.x);
    write_vector(f, "u", s.u);
  }
  cfg.set("manifest", "tool", "fpdhf");
  cfg.set("manifest", "version", kVersion);
  cfg.set("manifest", "command", "solve");
  cfg.set("manifest", "step_kind", to_string(s.report.step_kind));
  cfg.set("manifest", "tau", format_double(s.steps.tau));
  cfg.set("manifest", "sigma", format_double(s.steps.sigma));
  cfg.set("manifest", "epsilon", format_double(s.steps.epsilon));
  cfg.set("manifest", "iterations", std::to_string(s.report.iterations()));
  cfg.set("manifest", "termination", to_string(s.report.termination));
  for (const auto& [k, v] : s.summary) cfg.set("manifest", k, v);
  cfg.set("manifest", "check", s.check_passed ? "pass" : "fail");
  auto f = open_output(dir / "manifest.txt");
  f << cfg.to_string();
}

double final_rel_pd_err(const RunReport& r) {
  return r.records.empty() ? 0.0 : r.records.back().rel_pd_err;
}

int cmd_solve(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = effective_config(o, "solve");
  const SolveOutcome s = solve_preset(cfg);
  write_solve_artifacts(o.out_dir, cfg, s);
  out << "preset: " << cfg.get_string("solve", "preset", "") << '\n'
      << "steps: tau=" << format_double(s.steps.tau) << " sigma=" << format_double(s.steps.sigma)
      << " eps=" << format_double(s.steps.epsilon) << '\n'
      << "iterations: " << s.report.iterations() << " (" << to_string(s.report.termination) << ")\n"
      << "rel_pd_err: " << format_double(final_rel_pd_err(s.report)) << '\n';
  for (const auto& [k, v] : s.summary) out << k << ": " << v << '\n';
  out << "check: " << (s.check_passed ? "pass" : "fail") << '\n';
  return s.check_passed ? kExitOk : kExitDomain;
}

int cmd_deblur(const CommonOptions& o, std::ostream& out) {
  const DeblurConfig c = DeblurConfig::from_config(effective_config(o, "deblur"));
  const ExperimentResult r = run_experiment(c, o.out_dir);
  if (r.recipe.adjusted) out << "note: " << r.recipe.note << '\n';
  out << "iterations: " << r.report.iterations() << " (" << to_string(r.report.termination) << ")\n"
      << "objective: " << format_double(r.initial_objective) << " -> "
      << format_double(r.final_objective) << '\n'
      << "rel_pd_err: " << format_double(final_rel_pd_err(r.report)) << '\n'
      << "psnr: observation " << format_double(r.psnr_observation) << " dB, restored "
      << format_double(r.psnr_restored) << " dB\n";
  return r.report.termination == Termination::divergence_detected ? kExitDomain : kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
  }
  return items;
}

struct SweepRun {
  std::vector<std::string> values;
  int code = kExitOk;
  std::string status = "ok";
  long iterations = 0;
  double rel_pd_err = 0.0;
  std::string metric;
  std::string message;
};

/// Runs one configuration; never throws, the outcome goes into `run`.
void run_sweep_point(const std::string& kind, const KeyValueConfig& cfg, const fs::path& dir,
                     SweepRun& run) {
  try {
    if (kind == "deblur") {
      const ExperimentResult r = run_experiment(DeblurConfig::from_config(cfg), dir);
      run.iterations = r.report.iterations();
      run.rel_pd_err = final_rel_pd_err(r.report);
      run.metric = format_double(r.final_objective);
      if (r.report.termination == Termination::divergence_detected) {
        run.code = kExitDomain;
        run.status = "diverged";
      }
    } else {
      const SolveOutcome s = solve_preset(cfg);
      write_solve_artifacts(dir, cfg, s);
      run.iterations = s.report.iterations();
      run.rel_pd_err = final_rel_pd_err(s.report);
      run.metric = s.summary.empty() ? "" : s.summary.front().second;
      if (!s.check_passed) {
        run.code = kExitDomain;
        run.status = "check-failed";
      }
    }
  } catch (const DomainFailure& e) {
    run.code = kExitDomain;
    run.status = "domain-failure";
    run.message = e.what();
  } catch (const std::exception& e) {
    run.code = kExitUsage;
    run.status = "error";
    run.message = e.what();
  }
}

int cmd_sweep(const CommonOptions& o, std::ostream& out, std::ostream& err) {
  if (o.parallel < 1) throw std::invalid_argument("--parallel must be at least 1");
  const KeyValueConfig raw = o.config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(o.config_path);
  const auto* sweep = raw.find_section("sweep");
  if (!sweep) throw std::runtime_error("sweep: the config has no [sweep] section");
  const std::string kind = raw.get_string("sweep", "kind", "deblur");
  if (kind != "deblur" && kind != "solve") throw std::invalid_argument("sweep: kind must be deblur or solve");

  // Base config without the [sweep] section, then the command-line overrides.
  KeyValueConfig base;
  for (const auto& sec : raw.sections())
    if (sec.name != "sweep")
      for (const auto& [k, v] : sec.entries) base.set(sec.name, k, v);
  CommonOptions bare = o;
  bare.config_path.clear();
  KeyValueConfig flags = effective_config(bare, kind);
  for (const auto& sec : flags.sections())
    for (const auto& [k, v] : sec.entries) base.set(sec.name, k, v);

  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> axes;
  for (const auto& [k, v] : sweep->entries) {
    if (k == "kind") continue;
    keys.push_back(k);
    axes.push_back(split_list(v));
    if (axes.back().empty()) throw std::invalid_argument("sweep: '" + k + "' has no values");
  }

  std::vector<SweepRun> runs(1);
  for (const auto& axis : axes) {
    std::vector<SweepRun> next;
    for (const auto& r : runs)
      for (const auto& v : axis) {
        next.push_back(r);
        next.back().values.push_back(v);
      }
    runs = std::move(next);
  }

  std::vector<KeyValueConfig> configs;
  for (const auto& r : runs) {
    KeyValueConfig c = base;
    for (std::size_t j = 0; j < keys.size(); ++j) c.apply_override(keys[j] + "=" + r.values[j], kind);
    configs.push_back(std::move(c));
  }

  auto run_dir = [&o](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", i);
    return fs::path(o.out_dir) / name;
  };
  fs::create_directories(o.out_dir);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) run_sweep_point(kind, configs[i], run_dir(i), runs[i]);
  };
  const int workers = std::min<int>(o.parallel, static_cast<int>(runs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  auto csv = open_output(fs::path(o.out_dir) / "sweep.csv");
  csv << "run";
  for (const auto& k : keys) csv << ',' << k;
  csv << ",status,iterations,rel_pd_err," << (kind == "deblur" ? "objective" : "check_value") << '\n';
  int code = kExitOk;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const SweepRun& r = runs[i];
    csv << run_dir(i).filename().string();
    for (const auto& v : r.values) csv << ',' << v;
    csv << ',' << r.status << ',' << r.iterations << ',' << format_double(r.rel_pd_err) << ',' << r.metric << '\n';
    if (r.code != kExitOk) {
      err << run_dir(i).filename().string() << ": " << r.status;
      if (!r.message.empty()) err << ": " << r.message;
      err << '\n';
    }
    code = std::max(code, r.code);
  }
  out << "runs: " << runs.size() << " (parallel " << workers << ")\n"
      << "summary: " << (fs::path(o.out_dir) / "sweep.csv").string() << '\n';
  return code;
}

int cmd_validate_steps(const ValidateOptions& v, std::ostream& out) {
  if (v.beta && !(*v.beta > 0.0)) throw std::invalid_argument("--beta must be positive");
  if (!(v.zeta >= 0.0)) throw std::invalid_argument("--zeta must be nonnegative");
  if (!(v.l_norm >= 0.0)) throw std::invalid_argument("--l-norm must be nonnegative");

  StepSizes st;
  if (!v.recipe.empty()) {
    StepRecipe recipe;
    if (v.recipe == "zeta") recipe = StepRecipe::zeta_term;
    else if (v.recipe == "beta") recipe = StepRecipe::beta_term;
    else throw std::invalid_argument("--recipe must be zeta or beta");
    if (!v.beta) throw std::invalid_argument("--recipe needs --beta");
    const RecipeResult r = reference_step_recipe(*v.beta, v.zeta, v.l_norm, recipe);
    st = r.steps;
    if (r.adjusted) out << "note: " << r.note << '\n';
  } else if (!v.tau || !v.sigma) {
    throw std::invalid_argument("give --tau and --sigma, or --recipe");
  }
  if (v.tau) st.tau = *v.tau;
  if (v.sigma) st.sigma = *v.sigma;
  if (v.eps) st.epsilon = *v.eps;
  else if (v.tau || v.recipe.empty()) st.epsilon = v.beta ? epsilon_condat_vu(st.tau, *v.beta) : 0.0;

  const StepConstants k{.rho = v.rho, .beta = v.beta, .zeta = v.zeta, .l_norm_sq = v.l_norm * v.l_norm};
  const StepVerdict verdict = validate_steps(k, st);
  out << "steps: tau=" << format_double(st.tau) << " sigma=" << format_double(st.sigma)
      << " eps=" << format_double(st.epsilon) << '\n'
      << verdict.describe();
  if (v.zeta == 0.0 && v.beta && st.epsilon == epsilon_condat_vu(st.tau, *v.beta)) {
    const double lhs = st.sigma * st.tau * k.l_norm_sq;
    const double rhs = 1.0 - st.tau / (2.0 * *v.beta);
    out << "condat-vu form: sigma*tau*|L|^2 = " << format_double(lhs) << " < 1 - tau/(2*beta) = "
        << format_double(rhs) << (lhs < rhs ? "  holds" : "  fails") << '\n';
  }
  return verdict.valid ? kExitOk : kExitDomain;
}

int cmd_selftest(std::ostream& out) {
  int failures = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    if (!ok) ++failures;
  };

  const double bound = fbhf_step_bound(1.0, 1.0);
  const double closed = 4.0 / (1.0 + std::sqrt(17.0));
  report("fbhf-step-bound", std::abs(bound - closed) <= 1e-12, "err=" + format_double(std::abs(bound - closed)));

  const LinearMap grad = gradient_map(16, 16);
  const ProbeResult adj = probe_adjoint(grad, 20, 1);
  report("gradient-adjoint", adj.violations == 0, "max_err=" + format_double(adj.worst));

  // Random problem without C: the general step must match the Condat-Vu step.
  const Index n = 8, m = 5;
  Matrix lm(m, n);
  for (Index j = 0; j < n; ++j) lm.col(j) = random_vector(m, 10 + j);
  ProblemSpec spec{.a = box_resolvent(n, -1.0, 1.0),
                   .b = l1_resolvent(m, 0.5),
                   .l = matrix_map(lm),
                   .c = std::nullopt,
                   .d = quadratic_data_op(identity_map(n), random_vector(n, 3)),
                   .primal_dim = n,
                   .dual_dim = m};
  const StepSizes st = automatic_steps(StepConstants::from(spec));
  IterState a = IterState::initial(random_vector(n, 4), random_vector(m, 5));
  IterState b = a;
  double dev = 0.0;
  for (int i = 0; i < 50; ++i) {
    a = fpdhf_step(spec, st, a);
    b = condat_vu_step(spec, st, b);
    dev = std::max({dev, (a.x - b.x).cwiseAbs().maxCoeff(), (a.u - b.u).cwiseAbs().maxCoeff()});
  }
  report("condat-vu-reduction", dev <= 1e-12, "max_dev=" + format_double(dev));

  for (const std::string preset : {"toy-qp", "bilinear-saddle", "decoupled-blocks"}) {
    KeyValueConfig cfg;
    cfg.set("solve", "preset", preset);
    const SolveOutcome s = solve_preset(cfg);
    std::string detail;
    for (const auto& [k, val] : s.summary) detail += k + "=" + val + " ";
    report(preset.c_str(), s.check_passed, detail);
  }
  out << (failures == 0 ? "selftest passed" : "selftest failed") << '\n';
  return failures == 0 ? kExitOk : kExitDomain;
}

void add_common(CLI::App* sub, CommonOptions& o, bool with_preset, bool with_parallel) {
  sub->add_option("--config", o.config_path, "Key=value config file")->check(CLI::ExistingFile);
  sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--set", o.overrides, "Override KEY=VALUE or SECTION.KEY=VALUE (repeatable)");
  sub->add_option("--max-iters", o.max_iters, "Iteration limit");
  sub->add_option("--tol", o.tol, "Stop when rel_pd_err falls to this value");
  if (with_preset) sub->add_option("--preset", o.preset, "Preset: toy-qp, bilinear-saddle, decoupled-blocks, blocks");
  if (with_parallel) sub->add_option("--parallel", o.parallel, "Concurrent runs")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Four-operator primal-dual splitting toolkit", "fpdhf"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonOptions common;
  ValidateOptions val;
  auto* solve = app.add_subcommand("solve", "Run a named problem preset");
  add_common(solve, common, true, false);
  auto* deblur = app.add_subcommand("deblur", "Run the image deblurring experiment");
  add_common(deblur, common, false, false);
  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of a [sweep] section");
  add_common(sweep, common, true, true);
  auto* validate = app.add_subcommand("validate-steps", "Check step sizes against the convergence conditions");
  validate->add_option("--beta", val.beta, "Cocoercivity modulus of D (omit when D = 0)");
  validate->add_option("--zeta", val.zeta, "Lipschitz constant of C")->capture_default_str();
  validate->add_option("--l-norm", val.l_norm, "Bound on the norm of L")->capture_default_str();
  validate->add_option("--tau", val.tau, "Primal step");
  validate->add_option("--sigma", val.sigma, "Dual step");
  validate->add_option("--eps", val.eps, "Epsilon (default tau/(2 beta))");
  validate->add_option("--rho", val.rho, "Monotonicity modulus of A")->capture_default_str();
  validate->add_option("--recipe", val.recipe, "Derive steps from the reference recipe: zeta or beta");
  auto* selftest = app.add_subcommand("selftest", "Quick internal consistency checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(common, out);
    if (deblur->parsed()) return cmd_deblur(common, out);
    if (sweep->parsed()) return cmd_sweep(common, out, err);
    if (validate->parsed()) return cmd_validate_steps(val, out);
    if (selftest->parsed()) return cmd_selftest(out);
  } catch (const DomainFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fpdhf::cli
