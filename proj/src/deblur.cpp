#include "fpdhf/deblur.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fpdhf/error.hpp"
#include "fpdhf/pgm.hpp"

namespace fpdhf {

std::string to_string(StepRecipe r) {
  return r == StepRecipe::zeta_term ? "zeta" : "beta";
}

void DeblurConfig::validate() const {
  require(rows >= 2 && cols >= 2, "deblur: image must be at least 2x2");
  require(lambda1 > 0.0 && lambda2 > 0.0 && delta > 0.0,
          "deblur: lambda1, lambda2, delta must be positive");
  require(blur_size >= 1 && blur_size % 2 == 1, "deblur: blur_size must be odd");
  require(blur_std > 0.0, "deblur: blur_std must be positive");
  require(noise_std >= 0.0, "deblur: noise_std must be nonnegative");
  require(x_max > 0.0, "deblur: x_max must be positive");
  require(wavelet_levels >= 1, "deblur: wavelet_levels must be positive");
  require(max_iters >= 1, "deblur: max_iters must be positive");
  require(rel_pd_tol >= 0.0, "deblur: rel_pd_tol must be nonnegative");
  const Index block = Index{1} << wavelet_levels;
  require(rows % block == 0 && cols % block == 0,
          "deblur: image dimensions must be divisible by 2^wavelet_levels");
}

DeblurConfig DeblurConfig::from_config(const KeyValueConfig& kv, const std::string& s) {
  DeblurConfig c;
  c.rows = kv.get_long(s, "rows", c.rows);
  c.cols = kv.get_long(s, "cols", c.cols);
  c.lambda1 = kv.get_double(s, "lambda1", c.lambda1);
  c.lambda2 = kv.get_double(s, "lambda2", c.lambda2);
  c.delta = kv.get_double(s, "delta", c.delta);
  c.blur_size = static_cast<int>(kv.get_long(s, "blur_size", c.blur_size));
  c.blur_std = kv.get_double(s, "blur_std", c.blur_std);
  c.noise_std = kv.get_double(s, "noise_std", c.noise_std);
  c.x_max = kv.get_double(s, "x_max", c.x_max);
  c.wavelet_levels = static_cast<int>(kv.get_long(s, "wavelet_levels", c.wavelet_levels));
  const long seed = kv.get_long(s, "seed", static_cast<long>(c.seed));
  require(seed >= 0, "deblur: seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.max_iters = kv.get_long(s, "max_iters", c.max_iters);
  c.rel_pd_tol = kv.get_double(s, "rel_pd_tol", c.rel_pd_tol);
  const std::string recipe = kv.get_string(s, "recipe", to_string(c.recipe));
  if (recipe == "zeta") {
    c.recipe = StepRecipe::zeta_term;
  } else if (recipe == "beta") {
    c.recipe = StepRecipe::beta_term;
  } else {
    throw std::runtime_error("config: recipe must be 'zeta' or 'beta', got '" + recipe + "'");
  }
  const std::string blur = kv.get_string(s, "blur", c.identity_blur ? "identity" : "gaussian");
  if (blur != "gaussian" && blur != "identity")
    throw std::runtime_error("config: blur must be 'gaussian' or 'identity', got '" + blur + "'");
  c.identity_blur = blur == "identity";
  c.image = kv.get_string(s, "image", c.image);
  return c;
}

void DeblurConfig::write_to(KeyValueConfig& kv, const std::string& s) const {
  kv.set(s, "rows", std::to_string(rows));
  kv.set(s, "cols", std::to_string(cols));
  kv.set(s, "lambda1", format_double(lambda1));
  kv.set(s, "lambda2", format_double(lambda2));
  kv.set(s, "delta", format_double(delta));
  kv.set(s, "blur", identity_blur ? "identity" : "gaussian");
  kv.set(s, "blur_size", std::to_string(blur_size));
  kv.set(s, "blur_std", format_double(blur_std));
  kv.set(s, "noise_std", format_double(noise_std));
  kv.set(s, "x_max", format_double(x_max));
  kv.set(s, "wavelet_levels", std::to_string(wavelet_levels));
  kv.set(s, "seed", std::to_string(seed));
  kv.set(s, "max_iters", std::to_string(max_iters));
  kv.set(s, "rel_pd_tol", format_double(rel_pd_tol));
  kv.set(s, "recipe", to_string(recipe));
  kv.set(s, "image", image);
}

ImageGrid make_phantom(Index rows, Index cols, double x_max, std::uint64_t seed) {
  require(rows >= 1 && cols >= 1 && x_max > 0.0, "make_phantom: bad arguments");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ImageGrid img(rows, cols);

  // Smooth background ramp.
  const double gr = 0.1 + 0.2 * unit(rng), gc = 0.1 + 0.2 * unit(rng);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      img(r, c) = 0.15 + gr * r / double(rows) + gc * c / double(cols);

  // Flat and shaded ellipses.
  for (int e = 0; e < 6; ++e) {
    const double cr = unit(rng) * rows, cc = unit(rng) * cols;
    const double ar = (0.08 + 0.22 * unit(rng)) * rows;
    const double ac = (0.08 + 0.22 * unit(rng)) * cols;
    const double level = 0.1 + 0.8 * unit(rng);
    const bool shaded = e % 2 == 1;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const double dr = (r - cr) / ar, dc = (c - cc) / ac;
        const double rad = dr * dr + dc * dc;
        if (rad <= 1.0) img(r, c) = shaded ? level * (1.0 - 0.5 * rad) : level;
      }
    }
  }
  // One rectangle with a hard edge.
  const Index r0 = static_cast<Index>(unit(rng) * rows * 0.6);
  const Index c0 = static_cast<Index>(unit(rng) * cols * 0.6);
  const double level = 0.2 + 0.7 * unit(rng);
  for (Index r = r0; r < std::min(rows, r0 + rows / 4); ++r)
    for (Index c = c0; c < std::min(cols, c0 + cols / 5); ++c) img(r, c) = level;

  img.pixels() = (img.pixels() * x_max).cwiseMax(0.0).cwiseMin(x_max);
  return img;
}

namespace {

LinearMap make_blur(const DeblurConfig& cfg, Index rows, Index cols) {
  return cfg.identity_blur ? identity_map(rows * cols)
                           : blur_map(rows, cols, cfg.blur_size, cfg.blur_std);
}

}  // namespace

ImageGrid make_observation(const ImageGrid& clean, const DeblurConfig& cfg) {
  DeblurConfig c = cfg;
  c.rows = clean.rows();
  c.cols = clean.cols();
  c.validate();
  const LinearMap t = make_blur(c, clean.rows(), clean.cols());
  Vector z = t.apply(clean.pixels());
  if (c.noise_std > 0.0) {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, c.noise_std * c.x_max);
    for (Index i = 0; i < z.size(); ++i) z[i] += normal(rng);
  }
  return ImageGrid(clean.rows(), clean.cols(), std::move(z));
}

DeblurProblem build_deblur_problem(const ImageGrid& observation, const DeblurConfig& cfg) {
  DeblurConfig c = cfg;
  c.rows = observation.rows();
  c.cols = observation.cols();
  c.validate();
  const Index rows = c.rows, cols = c.cols, n = rows * cols;

  LinearMap t = make_blur(c, rows, cols);
  LinearMap grad = gradient_map(rows, cols);
  LinearMap w = haar_map(rows, cols, c.wavelet_levels);
  const Vector z = observation.pixels();

  ProblemSpec spec{.a = box_resolvent(n, 0.0, c.x_max),
                   .b = l1_resolvent(2 * n, c.lambda1),
                   .l = grad,
                   .c = huber_analysis_op(w, c.lambda2, c.delta),
                   .d = quadratic_data_op(t, z),
                   .primal_dim = n,
                   .dual_dim = 2 * n};

  const double lambda1 = c.lambda1, lambda2 = c.lambda2, delta = c.delta;
  auto objective = [t, grad, w, z, lambda1, lambda2, delta](const Vector& x) {
    return 0.5 * (t.apply(x) - z).squaredNorm() +
           lambda1 * grad.apply(x).lpNorm<1>() +
           lambda2 * huber_value(delta, w.apply(x));
  };

  DeblurProblem p{.spec = std::move(spec),
                  .objective = objective,
                  .blur = t,
                  .gradient = grad,
                  .wavelet = w,
                  .zeta = c.lambda2 / c.delta,
                  .beta = 1.0 / (t.norm_bound() * t.norm_bound()),
                  .l_bound = grad.norm_bound()};
  return p;
}

RecipeResult reference_step_recipe(double beta, double zeta, double l_bound, StepRecipe recipe) {
  require(beta > 0.0 && zeta >= 0.0 && l_bound > 0.0,
          "reference_step_recipe: need beta > 0, zeta >= 0, l_bound > 0");
  RecipeResult r;
  const double eps = 0.8 / (1.0 + std::sqrt(1.0 + 16.0 * beta * beta));
  double tau = 2.0 * eps;
  if (tau > 2.0 * beta * eps) {
    tau = 2.0 * beta * eps;
    r.adjusted = true;
    r.note = "tau capped at 2*beta*eps; ";
  }
  const double quad = recipe == StepRecipe::zeta_term ? tau * tau * zeta * zeta
                                                    : tau * tau * beta * beta;
  double sigma = 0.99 * (1.0 - eps - quad) / (tau * l_bound * l_bound);

  const StepConstants k{.rho = 0.0, .beta = beta, .zeta = zeta, .l_norm_sq = l_bound * l_bound};
  const double room = 1.0 - eps - tau * tau * zeta * zeta;
  require(room > 0.0, "reference_step_recipe: tau^2 zeta^2 >= 1 - eps, no admissible sigma");
  if (sigma <= 0.0 || !validate_steps(k, {tau, sigma, eps}).valid) {
    const double limit = room / (tau * l_bound * l_bound);
    double shrunk = limit;
    while (!validate_steps(k, {tau, shrunk, eps}).valid) shrunk = std::nextafter(shrunk, 0.0);
    r.adjusted = true;
    r.note += "sigma reduced from " + format_double(sigma) + " to " + format_double(shrunk);
    sigma = shrunk;
  }
  r.steps = {tau, sigma, eps};
  return r;
}

double psnr(const ImageGrid& reference, const ImageGrid& test, double x_max) {
  require(reference.size() == test.size(), "psnr: size mismatch");
  const double mse = (reference.pixels() - test.pixels()).squaredNorm() /
                     static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(x_max * x_max / mse);
}

std::string experiment_manifest(const DeblurConfig& cfg, const DeblurProblem& problem,
                                const RecipeResult& recipe) {
  KeyValueConfig kv;
  kv.set("manifest", "tool", "fpdhf");
  kv.set("manifest", "version", kVersion);
  cfg.write_to(kv, "deblur");
  kv.set("derived", "zeta", format_double(problem.zeta));
  kv.set("derived", "beta", format_double(problem.beta));
  kv.set("derived", "l_bound", format_double(problem.l_bound));
  kv.set("derived", "tau", format_double(recipe.steps.tau));
  kv.set("derived", "sigma", format_double(recipe.steps.sigma));
  kv.set("derived", "epsilon", format_double(recipe.steps.epsilon));
  kv.set("derived", "recipe_adjusted", recipe.adjusted ? "true" : "false");
  if (!recipe.note.empty()) kv.set("derived", "recipe_note", recipe.note);
  kv.set("derived", "noise_units", "std = noise_std * x_max");
  return kv.to_string();
}

ExperimentResult run_experiment(const DeblurConfig& cfg_in, const std::filesystem::path& out_dir) {
  DeblurConfig cfg = cfg_in;
  ImageGrid clean = cfg.image.empty() ? make_phantom(cfg.rows, cfg.cols, cfg.x_max, cfg.seed)
                                      : read_pgm(cfg.image, cfg.x_max);
  cfg.rows = clean.rows();
  cfg.cols = clean.cols();
  cfg.validate();

  ImageGrid observation = make_observation(clean, cfg);
  DeblurProblem problem = build_deblur_problem(observation, cfg);
  RecipeResult recipe = reference_step_recipe(problem.beta, problem.zeta, problem.l_bound, cfg.recipe);

  std::ofstream metrics;
  std::optional<MetricsCsvWriter> writer;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": cannot create directory: " + ec.message());
    const auto manifest_path = out_dir / "manifest.txt";
    std::ofstream manifest(manifest_path);
    if (!manifest) throw std::runtime_error(manifest_path.string() + ": cannot open for writing");
    manifest << experiment_manifest(cfg, problem, recipe);
    const auto metrics_path = out_dir / "metrics.csv";
    metrics.open(metrics_path);
    if (!metrics) throw std::runtime_error(metrics_path.string() + ": cannot open for writing");
    writer.emplace(metrics, false);
  }

  RunCallbacks callbacks;
  callbacks.objective = problem.objective;
  if (writer) callbacks.on_iteration = [&writer](const IterRecord& r) { writer->write(r); };

  const Index n = clean.size();
  RunReport report = run(problem.spec, recipe.steps, Vector::Zero(n), Vector::Zero(2 * n),
                         StopRule{cfg.max_iters, cfg.rel_pd_tol}, callbacks);

  ImageGrid restored(cfg.rows, cfg.cols, report.final_state.x);
  ExperimentResult result{.report = std::move(report),
                          .recipe = recipe,
                          .clean = clean,
                          .observation = observation,
                          .restored = restored};
  result.initial_objective = result.report.objective0.value_or(0.0);
  result.final_objective = result.report.records.empty()
                               ? result.initial_objective
                               : result.report.records.back().objective.value_or(0.0);
  result.psnr_observation = psnr(clean, observation, cfg.x_max);
  result.psnr_restored = psnr(clean, restored, cfg.x_max);

  if (!out_dir.empty()) {
    metrics.close();
    if (!metrics) throw std::runtime_error((out_dir / "metrics.csv").string() + ": write failed");
    write_pgm(out_dir / "clean.pgm", clean, cfg.x_max);
    write_pgm(out_dir / "observation.pgm", observation, cfg.x_max);
    write_pgm(out_dir / "restored.pgm", restored, cfg.x_max);
  }
  return result;
}

}  // namespace fpdhf
