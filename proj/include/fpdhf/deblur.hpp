#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "fpdhf/config.hpp"
#include "fpdhf/solver.hpp"

namespace fpdhf {

// Image deblurring by
//
//   min_{x in [0, x_max]^N}  0.5 ||T x - z||^2 + lambda1 ||grad x||_1
//                            + lambda2 H_delta(W x)
//
// with T a periodic Gaussian blur, grad the discrete gradient and W an
// orthonormal Haar transform.

enum class StepRecipe {
  /// sigma = 0.99 (1 - eps - tau^2 zeta^2) / (tau ||L||^2)
  zeta_term,
  /// sigma = 0.99 (1 - eps - tau^2 beta^2) / (tau ||L||^2)
  beta_term
};

std::string to_string(StepRecipe r);

struct DeblurConfig {
  Index rows = 64;
  Index cols = 64;
  double lambda1 = 1e-2;
  double lambda2 = 1e-4;
  double delta = 1e-3;
  int blur_size = 9;
  double blur_std = 4.0;
  double noise_std = 1e-3;
  double x_max = 1.0;
  int wavelet_levels = 3;
  std::uint64_t seed = 1;
  long max_iters = 5000;
  double rel_pd_tol = 0.0;
  StepRecipe recipe = StepRecipe::zeta_term;
  /// Replace the blur by the identity (denoising variant).
  bool identity_blur = false;
  /// Clean image (PGM). Empty selects the synthetic phantom.
  std::string image;

  void validate() const;
  /// Reads keys of `section`; missing keys keep their defaults.
  static DeblurConfig from_config(const KeyValueConfig& cfg,
                                  const std::string& section = "deblur");
  void write_to(KeyValueConfig& cfg, const std::string& section = "deblur") const;
};

/// Seeded piecewise-smooth test image with values in [0, x_max].
ImageGrid make_phantom(Index rows, Index cols, double x_max, std::uint64_t seed);

/// z = T clean + noise, noise i.i.d. normal with std noise_std * x_max drawn
/// from a generator seeded with cfg.seed. Not clipped.
ImageGrid make_observation(const ImageGrid& clean, const DeblurConfig& cfg);

struct DeblurProblem {
  ProblemSpec spec;
  std::function<double(const Vector&)> objective;
  LinearMap blur;
  LinearMap gradient;
  LinearMap wavelet;
  /// Lipschitz constant of the wavelet-Huber gradient, lambda2 / delta.
  double zeta = 0.0;
  /// Cocoercivity of the data-fit gradient, 1 / ||T||^2.
  double beta = 0.0;
  double l_bound = 0.0;
};

/// A = normal cone of the box, B = d(lambda1 ||.||_1), L = grad,
/// C = grad(lambda2 H_delta o W), D = T*(T . - z).
DeblurProblem build_deblur_problem(const ImageGrid& observation, const DeblurConfig& cfg);

struct RecipeResult {
  StepSizes steps;
  bool adjusted = false;
  std::string note;
};

/// eps = 0.8 / (1 + sqrt(1 + 16 beta^2)), tau = 2 eps, sigma per `recipe`.
/// When the result fails validate_steps the recipe caps tau at 2 beta eps
/// and shrinks sigma just enough to pass, and says so in `note`.
RecipeResult reference_step_recipe(double beta, double zeta, double l_bound,
                               StepRecipe recipe = StepRecipe::zeta_term);

double psnr(const ImageGrid& reference, const ImageGrid& test, double x_max);

struct ExperimentResult {
  RunReport report;
  RecipeResult recipe;
  ImageGrid clean;
  ImageGrid observation;
  ImageGrid restored;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double psnr_observation = 0.0;
  double psnr_restored = 0.0;
};

/// Runs the full pipeline and writes clean.pgm, observation.pgm,
/// restored.pgm, metrics.csv (iter,dx,du,rel_pd_err,objective) and
/// manifest.txt into out_dir. An empty out_dir skips all file output.
/// Throws std::runtime_error with the offending path on I/O failure.
ExperimentResult run_experiment(const DeblurConfig& cfg,
                                const std::filesystem::path& out_dir);

/// Manifest text: the config section plus derived constants; loading it
/// with DeblurConfig::from_config reproduces the run.
std::string experiment_manifest(const DeblurConfig& cfg, const DeblurProblem& problem,
                                const RecipeResult& recipe);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fpdhf
