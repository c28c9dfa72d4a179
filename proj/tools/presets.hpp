#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fpdhf/config.hpp"
#include "fpdhf/multivariate.hpp"
#include "fpdhf/solver.hpp"

namespace fpdhf::cli {

/// A well-formed request whose outcome is a negative verdict (rejected
/// steps, divergence). Maps to exit code 1.
struct DomainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Steps chosen from the problem constants: tau = beta/2 capped by 0.5/zeta,
/// eps = tau/(2 beta), sigma at 90% of the remaining coupling budget.
StepSizes automatic_steps(const StepConstants& k);

/// Builds a block problem from config sections, in file order:
///   [primal.NAME]  dim, op = zero|box|l1|simplex|quadratic (lo, hi, weight,
///                  center), smooth = none|quadratic (q, b)
///   [dual.NAME]    dim, op = zero|box|l1|quadratic (same parameters)
///   [coupling.PRIMAL.DUAL]  map = identity|scaled|random, scale, seed
///   [lipschitz]    op = skew, norm, seed
BlockProblem block_problem_from_config(const KeyValueConfig& cfg);

struct SolveOutcome {
  RunReport report;
  Vector x;
  Vector u;
  StepSizes steps;
  /// "name: value" lines for the console and the manifest.
  std::vector<std::pair<std::string, std::string>> summary;
  /// The preset's built-in correctness check (oracle distance, separability).
  bool check_passed = true;
};

/// Runs the preset named in [solve] preset: toy-qp, bilinear-saddle,
/// decoupled-blocks, or blocks (operators from the config sections above).
/// Unknown names throw std::invalid_argument.
SolveOutcome solve_preset(const KeyValueConfig& cfg);

std::vector<std::string> preset_names();

}  // namespace fpdhf::cli
