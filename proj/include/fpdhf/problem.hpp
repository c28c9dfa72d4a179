#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fpdhf/linops.hpp"
#include "fpdhf/prox.hpp"

namespace fpdhf {

/// Monotone inclusion
///
///   find (x, u) with  0 in (A + C + D) x + L* u  and  0 in B^{-1} u - L x,
///
/// A maximally rho-monotone (resolvent), B maximally monotone on the dual
/// space (resolvent), L linear, C zeta-Lipschitz, D beta-cocoercive.
/// An empty optional is the zero operator and selects the matching
/// reduction in the solver.
struct ProblemSpec {
  ResolventOp a;
  std::optional<ResolventOp> b;
  std::optional<LinearMap> l;
  std::optional<ForwardOp> c;
  std::optional<ForwardOp> d;
  Index primal_dim = 0;
  Index dual_dim = 0;

  /// Throws ContractViolation on inconsistent dimensions or kinds.
  void validate() const;

  double rho() const { return a.rho(); }
  /// 0 when C is absent.
  double zeta() const;
  /// +inf when D is absent.
  double beta() const;
  /// Certified bound on ||L||; 0 when L is absent.
  double l_norm() const;
};

struct StepSizes {
  double tau = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
};

/// The constants entering the step-size conditions. beta is nullopt when the
/// cocoercive term is absent; zeta is 0 when the Lipschitz term is absent.
struct StepConstants {
  double rho = 0.0;
  std::optional<double> beta;
  double zeta = 0.0;
  double l_norm_sq = 0.0;

  static StepConstants from(const ProblemSpec& spec);
};

enum class StepCondition {
  positive_steps,       // tau > 0, sigma > 0
  epsilon_range,        // 0 < eps < 1 (only with a cocoercive term)
  single_valued,        // tau*rho > -1
  cocoercive_step,      // tau <= 2*beta*eps
  primal_dual_coupling  // tau*sigma*|L|^2 + tau^2*zeta^2 < 1 - eps (or < 1 without D)
};

std::string to_string(StepCondition c);

struct ConditionCheck {
  StepCondition condition;
  bool satisfied = false;
  double lhs = 0.0;
  double rhs = 0.0;
  /// rhs - lhs; positive when the condition holds with room to spare.
  double slack() const { return rhs - lhs; }
};

struct StepVerdict {
  bool valid = false;
  std::vector<ConditionCheck> checks;
  std::optional<StepCondition> first_violation;

  /// One line per condition with its numeric slack.
  std::string describe() const;
};

/// Verdict for constant steps. The non-strict condition tau <= 2*beta*eps
/// is compared with a relative rounding slack of 1e-12 so that the closed
/// form eps = tau/(2 beta) is accepted exactly.
StepVerdict validate_steps(const StepConstants& k, const StepSizes& steps);
StepVerdict validate_steps(const ProblemSpec& spec, const StepSizes& steps);

/// Upper end of the forward-backward-half-forward step interval,
/// 4 beta / (1 + sqrt(1 + 16 beta^2 zeta^2)).
double fbhf_step_bound(double beta, double zeta);

/// eps = tau / (2 beta): reduces the coupling condition to the Condat-Vu
/// bound sigma*tau*|L|^2 < 1 - tau/(2 beta) when zeta = 0.
double epsilon_condat_vu(double tau, double beta);

/// Root in ]0,1[ of 2*beta*zeta*eps = sqrt(1 - eps), by bisection to 1e-14.
/// With this eps, tau <= 2*beta*eps reproduces fbhf_step_bound.
double epsilon_fbhf(double beta, double zeta);

}  // namespace fpdhf
