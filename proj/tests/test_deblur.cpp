#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpdhf/deblur.hpp"
#include "fpdhf/error.hpp"
#include "fpdhf/pgm.hpp"
#include "fpdhf/probes.hpp"

using namespace fpdhf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fpdhf_test_deblur_" + name);
  fs::remove_all(dir);
  return dir;
}

DeblurConfig small_config() {
  DeblurConfig c;
  c.rows = 16;
  c.cols = 24;
  c.max_iters = 300;
  return c;
}

}  // namespace

TEST_CASE("default configuration carries the reference constants") {
  const DeblurConfig c;
  CHECK(c.lambda1 == 1e-2);
  CHECK(c.lambda2 == 1e-4);
  CHECK(c.delta == 1e-3);
  CHECK(c.blur_size == 9);
  CHECK(c.blur_std == 4.0);
  CHECK(c.noise_std == 1e-3);
  CHECK(c.max_iters == 5000);
  CHECK_NOTHROW(c.validate());

  DeblurConfig bad = c;
  bad.blur_size = 8;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = c;
  bad.rows = 60;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = c;
  bad.delta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("observation model") {
  DeblurConfig c = small_config();
  const ImageGrid clean = make_phantom(c.rows, c.cols, c.x_max, 3);
  CHECK(clean.pixels().minCoeff() >= 0.0);
  CHECK(clean.pixels().maxCoeff() <= c.x_max);

  SUBCASE("no noise gives the blurred image exactly") {
    c.noise_std = 0.0;
    const ImageGrid z = make_observation(clean, c);
    CHECK(z.pixels() == gaussian_blur(clean, 9, 4.0).pixels());
  }
  SUBCASE("fixed seed is deterministic") {
    CHECK(make_observation(clean, c).pixels() == make_observation(clean, c).pixels());
    DeblurConfig other = c;
    other.seed = 2;
    CHECK(make_observation(clean, other).pixels() != make_observation(clean, c).pixels());
  }
  SUBCASE("noise statistics") {
    DeblurConfig big;
    big.rows = 1000;
    big.cols = 1000;
    big.x_max = 2.0;
    big.noise_std = 1e-3;
    const ImageGrid zero(1000, 1000);
    const Vector noise = make_observation(zero, big).pixels();
    const double mean = noise.mean();
    const double sd = std::sqrt((noise.array() - mean).square().sum() / (noise.size() - 1));
    CHECK(std::abs(sd - 2e-3) <= 0.01 * 2e-3);
    CHECK(std::abs(mean) <= 1e-5);
  }
}

TEST_CASE("deblurring problem") {
  const DeblurConfig c = small_config();
  const ImageGrid z = make_observation(make_phantom(c.rows, c.cols, c.x_max, 1), c);
  const DeblurProblem p = build_deblur_problem(z, c);
  CHECK(p.zeta == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(p.beta == 1.0);
  CHECK(p.l_bound == doctest::Approx(std::sqrt(8.0)));
  CHECK(p.spec.zeta() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(p.spec.beta() == 1.0);

  const Index n = c.rows * c.cols;
  CHECK(p.objective(Vector::Zero(n)) == doctest::Approx(0.5 * z.pixels().squaredNorm()).epsilon(1e-15));

  // Independent evaluation from raw pieces.
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector x = (random_vector(n, s).array() * 0.3 + 0.5).matrix();
    const ImageGrid img(c.rows, c.cols, x);
    const Vector tx = gaussian_blur(img, 9, 4.0).pixels();
    const double raw = 0.5 * (tx - z.pixels()).squaredNorm() +
                       c.lambda1 * discrete_gradient(img).lpNorm<1>() +
                       c.lambda2 * huber_value(c.delta, haar_dwt(img, 3));
    CHECK(std::abs(p.objective(x) - raw) <= 1e-10 * std::abs(raw));
  }

  CHECK(probe_forward(*p.spec.c, 200, 1, 0.01).violations == 0);
  CHECK(probe_forward(*p.spec.c, 200, 2, 1.0).violations == 0);
  CHECK(probe_forward(*p.spec.d, 200, 3).violations == 0);
  CHECK(probe_adjoint(*p.spec.l, 50, 4).violations == 0);
}

TEST_CASE("step recipe") {
  const RecipeResult r = reference_step_recipe(1.0, 0.1, std::sqrt(8.0));
  const double eps = 0.8 / (1.0 + std::sqrt(17.0));
  CHECK(r.steps.epsilon == doctest::Approx(0.1561553).epsilon(1e-6));
  CHECK(r.steps.tau == doctest::Approx(0.3123106).epsilon(1e-6));
  CHECK(r.steps.epsilon == eps);
  CHECK(r.steps.tau == 2.0 * eps);
  const double tau = 2.0 * eps;
  CHECK(r.steps.sigma == doctest::Approx(0.99 * (1 - eps - tau * tau * 0.01) / (tau * 8.0)).epsilon(1e-14));
  CHECK_FALSE(r.adjusted);
  StepConstants k{.rho = 0.0, .beta = 1.0, .zeta = 0.1, .l_norm_sq = 8.0};
  CHECK(validate_steps(k, r.steps).valid);

  const RecipeResult flat = reference_step_recipe(1.0, 0.0, std::sqrt(8.0));
  CHECK(flat.steps.sigma == doctest::Approx(0.99 * (1 - eps) / (tau * 8.0)).epsilon(1e-14));

  const RecipeResult beta_rule = reference_step_recipe(1.0, 0.1, std::sqrt(8.0), StepRecipe::beta_term);
  CHECK(beta_rule.steps.sigma == doctest::Approx(0.99 * (1 - eps - tau * tau) / (tau * 8.0)).epsilon(1e-14));
  CHECK(validate_steps(k, beta_rule.steps).valid);

  // tau = 2 eps exceeds 2 beta eps when beta < 1: the recipe caps it.
  const RecipeResult capped = reference_step_recipe(0.5, 0.1, std::sqrt(8.0));
  CHECK(capped.adjusted);
  CHECK_FALSE(capped.note.empty());
  StepConstants kc{.rho = 0.0, .beta = 0.5, .zeta = 0.1, .l_norm_sq = 8.0};
  CHECK(validate_steps(kc, capped.steps).valid);
}

TEST_CASE("experiment pipeline") {
  const DeblurConfig c = small_config();
  const fs::path dir = scratch_dir("pipeline");
  const ExperimentResult r = run_experiment(c, dir);
  REQUIRE(r.report.iterations() == c.max_iters);
  CHECK(r.final_objective < r.initial_objective);
  CHECK(r.report.records.back().rel_pd_err < r.report.records[49].rel_pd_err);
  CHECK(r.restored.pixels().minCoeff() >= 0.0);
  CHECK(r.restored.pixels().maxCoeff() <= c.x_max);
  CHECK(r.psnr_restored > r.psnr_observation);

  for (const char* f : {"manifest.txt", "metrics.csv", "clean.pgm", "observation.pgm", "restored.pgm"})
    CHECK(fs::exists(dir / f));

  std::ifstream metrics(dir / "metrics.csv");
  std::string line;
  std::getline(metrics, line);
  CHECK(line == "iter,dx,du,rel_pd_err,objective");
  long expected = 1;
  bool gapless = true;
  while (std::getline(metrics, line)) {
    if (std::stol(line.substr(0, line.find(','))) != expected++) gapless = false;
  }
  CHECK(gapless);
  CHECK(expected - 1 == c.max_iters);

  // The manifest reproduces the run byte for byte.
  const DeblurConfig again = DeblurConfig::from_config(KeyValueConfig::load(dir / "manifest.txt"));
  const fs::path dir2 = scratch_dir("pipeline_rerun");
  run_experiment(again, dir2);
  CHECK(slurp(dir / "metrics.csv") == slurp(dir2 / "metrics.csv"));
  CHECK(slurp(dir / "restored.pgm") == slurp(dir2 / "restored.pgm"));
  CHECK(slurp(dir / "manifest.txt") == slurp(dir2 / "manifest.txt"));

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("denoising consistency run") {
  DeblurConfig c = small_config();
  c.identity_blur = true;
  c.noise_std = 0.0;
  c.max_iters = 20000;
  c.rel_pd_tol = 1e-10;
  const ExperimentResult r = run_experiment(c, {});
  CHECK(r.report.termination == Termination::tolerance_met);
  const DeblurProblem p = build_deblur_problem(r.observation, c);
  const auto& s = r.report.final_state;
  const double scale = std::sqrt(s.x.squaredNorm() + s.u.squaredNorm());
  CHECK(fixed_point_residual(p.spec, r.recipe.steps, s.x, s.u) <= 1e-9 * scale);
  // Restored image stays close to the noiseless input.
  CHECK((r.restored.pixels() - r.clean.pixels()).norm() <= 0.1 * r.clean.pixels().norm());
}

TEST_CASE("user image input") {
  const fs::path dir = scratch_dir("image");
  fs::create_directories(dir);
  const ImageGrid img = make_phantom(16, 16, 1.0, 5);
  write_pgm(dir / "in.pgm", img, 1.0);
  DeblurConfig c;
  c.rows = 16;
  c.cols = 16;
  c.max_iters = 20;
  c.image = (dir / "in.pgm").string();
  const ExperimentResult r = run_experiment(c, {});
  CHECK((r.clean.pixels() - img.pixels()).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);

  c.image = (dir / "missing.pgm").string();
  CHECK_THROWS_AS(run_experiment(c, {}), std::runtime_error);
  fs::remove_all(dir);
}
