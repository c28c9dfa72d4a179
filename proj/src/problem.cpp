#include "fpdhf/problem.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fpdhf/error.hpp"

namespace fpdhf {

void ProblemSpec::validate() const {
  require(primal_dim > 0, "ProblemSpec: primal_dim must be positive");
  require(a.dim() == primal_dim, "ProblemSpec: A does not act on the primal space");
  if (b) {
    require(dual_dim > 0, "ProblemSpec: dual_dim must be positive when B is set");
    require(b->dim() == dual_dim, "ProblemSpec: B does not act on the dual space");
    require(b->rho() >= 0.0, "ProblemSpec: B must be monotone (rho >= 0)");
  }
  if (l) {
    require(l->in_dim() == primal_dim && l->out_dim() == dual_dim,
            "ProblemSpec: L must map primal_dim -> dual_dim");
  }
  if (c) require(c->dim() == primal_dim, "ProblemSpec: C dimension mismatch");
  if (d) {
    require(d->dim() == primal_dim, "ProblemSpec: D dimension mismatch");
    require(d->kind() == ForwardKind::cocoercive,
            "ProblemSpec: D must be declared cocoercive");
  }
}

double ProblemSpec::zeta() const { return c ? c->lipschitz_constant() : 0.0; }

double ProblemSpec::beta() const {
  return d ? d->constant() : std::numeric_limits<double>::infinity();
}

double ProblemSpec::l_norm() const { return l ? l->norm_bound() : 0.0; }

StepConstants StepConstants::from(const ProblemSpec& spec) {
  StepConstants k;
  k.rho = spec.rho();
  if (spec.d) k.beta = spec.d->constant();
  k.zeta = spec.zeta();
  k.l_norm_sq = spec.l_norm() * spec.l_norm();
  return k;
}

std::string to_string(StepCondition c) {
  switch (c) {
    case StepCondition::positive_steps:
      return "tau > 0 and sigma > 0";
    case StepCondition::epsilon_range:
      return "0 < eps < 1";
    case StepCondition::single_valued:
      return "tau*rho > -1";
    case StepCondition::cocoercive_step:
      return "tau <= 2*beta*eps";
    case StepCondition::primal_dual_coupling:
      return "tau*sigma*|L|^2 + tau^2*zeta^2 < 1 - eps";
  }
  return "unknown";
}

std::string StepVerdict::describe() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-44s lhs=%.12g rhs=%.12g slack=%.6g\n",
                  c.satisfied ? "ok" : "FAIL", to_string(c.condition).c_str(),
                  c.lhs, c.rhs, c.slack());
    out << line;
  }
  out << (valid ? "valid" : "invalid");
  if (first_violation) out << " (violates " << to_string(*first_violation) << ")";
  out << '\n';
  return out.str();
}

StepVerdict validate_steps(const StepConstants& k, const StepSizes& s) {
  StepVerdict v;
  auto add = [&v](StepCondition cond, bool ok, double lhs, double rhs) {
    v.checks.push_back({cond, ok, lhs, rhs});
    if (!ok && !v.first_violation) v.first_violation = cond;
  };

  add(StepCondition::positive_steps, s.tau > 0.0 && s.sigma > 0.0,
      0.0, std::min(s.tau, s.sigma));
  if (k.beta) {
    add(StepCondition::epsilon_range, s.epsilon > 0.0 && s.epsilon < 1.0,
        s.epsilon, 1.0);
  }
  add(StepCondition::single_valued, s.tau * k.rho > -1.0, -1.0, s.tau * k.rho);

  const double coupling = s.tau * s.sigma * k.l_norm_sq + s.tau * s.tau * k.zeta * k.zeta;
  if (k.beta) {
    const double cap = 2.0 * *k.beta * s.epsilon;
    add(StepCondition::cocoercive_step, s.tau <= cap * (1.0 + 1e-12), s.tau, cap);
    add(StepCondition::primal_dual_coupling, coupling < 1.0 - s.epsilon, coupling,
        1.0 - s.epsilon);
  } else {
    add(StepCondition::primal_dual_coupling, coupling < 1.0, coupling, 1.0);
  }
  v.valid = !v.first_violation.has_value();
  return v;
}

StepVerdict validate_steps(const ProblemSpec& spec, const StepSizes& steps) {
  return validate_steps(StepConstants::from(spec), steps);
}

double fbhf_step_bound(double beta, double zeta) {
  require(beta > 0.0 && zeta >= 0.0, "fbhf_step_bound: need beta > 0, zeta >= 0");
  return 4.0 * beta / (1.0 + std::sqrt(1.0 + 16.0 * beta * beta * zeta * zeta));
}

double epsilon_condat_vu(double tau, double beta) {
  require(tau > 0.0 && beta > 0.0, "epsilon_condat_vu: need tau, beta > 0");
  return tau / (2.0 * beta);
}

double epsilon_fbhf(double beta, double zeta) {
  require(beta > 0.0 && zeta > 0.0, "epsilon_fbhf: need beta, zeta > 0");
  // 2 beta zeta eps - sqrt(1 - eps) is increasing: -1 at 0, 2 beta zeta at 1.
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (2.0 * beta * zeta * mid - std::sqrt(1.0 - mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace fpdhf
