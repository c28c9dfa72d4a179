#include "fpdhf/solver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "fpdhf/error.hpp"
#include "fpdhf/probes.hpp"

namespace fpdhf {

IterState IterState::initial(Vector x0, Vector u0) {
  IterState s;
  s.p = Vector::Zero(x0.size());
  s.z = x0;
  s.q = Vector::Zero(x0.size());
  s.x = std::move(x0);
  s.u = std::move(u0);
  return s;
}

bool IterState::finite() const {
  return x.allFinite() && u.allFinite() && p.allFinite() && z.allFinite() &&
         q.allFinite();
}

namespace {

void check_state(const ProblemSpec& spec, const IterState& s) {
  require(s.x.size() == spec.primal_dim, "step: primal iterate dimension mismatch");
  require(s.u.size() == spec.dual_dim, "step: dual iterate dimension mismatch");
}

Vector dual_update(const ProblemSpec& spec, double sigma, const Vector& w) {
  if (!spec.b) return Vector::Zero(spec.dual_dim);
  return resolvent_of_inverse(*spec.b, sigma, w);
}

}  // namespace

IterState fpdhf_step(const ProblemSpec& spec, const StepSizes& steps,
                     const IterState& state) {
  check_state(spec, state);
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  const Vector& x = state.x;
  const Vector& u = state.u;

  IterState next;
  next.n = state.n + 1;
  next.p = spec.c ? spec.c->apply(x) : Vector::Zero(x.size());

  Vector dir = spec.l ? spec.l->adjoint(u) : Vector::Zero(x.size());
  if (spec.c) dir += next.p;
  if (spec.d) dir += spec.d->apply(x);
  next.z = spec.a.resolve(tau, x - tau * dir);

  if (spec.c) {
    next.q = tau * (spec.c->apply(next.z) - next.p);
  } else {
    next.q = Vector::Zero(x.size());
  }

  Vector w = u;
  if (spec.l) {
    Vector bar = 2.0 * next.z - x;
    if (spec.c) bar -= next.q;
    w += sigma * spec.l->apply(bar);
  }
  next.u = dual_update(spec, sigma, w);
  next.x = spec.c ? Vector(next.z - next.q) : next.z;
  return next;
}

IterState condat_vu_step(const ProblemSpec& spec, const StepSizes& steps,
                         const IterState& state) {
  require(!spec.c, "condat_vu_step: requires C = 0");
  check_state(spec, state);
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  const Vector& x = state.x;
  const Vector& u = state.u;

  Vector dir = spec.l ? spec.l->adjoint(u) : Vector::Zero(x.size());
  if (spec.d) dir += spec.d->apply(x);
  Vector x_next = spec.a.resolve(tau, x - tau * dir);

  Vector w = u;
  if (spec.l) w += sigma * spec.l->apply(2.0 * x_next - x);

  IterState next;
  next.n = state.n + 1;
  next.u = dual_update(spec, sigma, w);
  next.p = Vector::Zero(x.size());
  next.q = Vector::Zero(x.size());
  next.z = x_next;
  next.x = std::move(x_next);
  return next;
}

IterState fbhf_step(const ProblemSpec& spec, const StepSizes& steps,
                    const IterState& state) {
  require(!spec.b && !spec.l, "fbhf_step: requires B = 0 and L = 0");
  check_state(spec, state);
  const double tau = steps.tau;
  const Vector& x = state.x;

  IterState next;
  next.n = state.n + 1;
  next.p = spec.c ? spec.c->apply(x) : Vector::Zero(x.size());
  Vector dir = Vector::Zero(x.size());
  if (spec.c) dir += next.p;
  if (spec.d) dir += spec.d->apply(x);
  next.z = spec.a.resolve(tau, x - tau * dir);
  next.q = spec.c ? Vector(tau * (spec.c->apply(next.z) - next.p))
                  : Vector(Vector::Zero(x.size()));
  next.x = spec.c ? Vector(next.z - next.q) : next.z;
  next.u = Vector::Zero(state.u.size());
  return next;
}

IterState corollary_d0_step(const ProblemSpec& spec, const StepSizes& steps,
                            const IterState& state) {
  require(!spec.d, "corollary_d0_step: requires D = 0");
  check_state(spec, state);
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  const Vector& x = state.x;
  const Vector& u = state.u;

  IterState next;
  next.n = state.n + 1;
  next.p = spec.c ? spec.c->apply(x) : Vector::Zero(x.size());
  Vector dir = spec.l ? spec.l->adjoint(u) : Vector::Zero(x.size());
  if (spec.c) dir += next.p;
  next.z = spec.a.resolve(tau, x - tau * dir);
  next.q = spec.c ? Vector(tau * (spec.c->apply(next.z) - next.p))
                  : Vector(Vector::Zero(x.size()));
  Vector w = u;
  if (spec.l) {
    Vector bar = 2.0 * next.z - x;
    if (spec.c) bar -= next.q;
    w += sigma * spec.l->apply(bar);
  }
  next.u = dual_update(spec, sigma, w);
  next.x = spec.c ? Vector(next.z - next.q) : next.z;
  return next;
}

StepKind select_step(const ProblemSpec& spec) {
  if (!spec.c) return StepKind::condat_vu;
  if (!spec.b && !spec.l) return StepKind::fbhf;
  if (!spec.d) return StepKind::no_cocoercive;
  return StepKind::general;
}

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::general:
      return "fpdhf";
    case StepKind::condat_vu:
      return "condat-vu";
    case StepKind::fbhf:
      return "fbhf";
    case StepKind::no_cocoercive:
      return "fpdhf-d0";
  }
  return "unknown";
}

IterState dispatch_step(const ProblemSpec& spec, const StepSizes& steps,
                        const IterState& state) {
  switch (select_step(spec)) {
    case StepKind::condat_vu:
      return condat_vu_step(spec, steps, state);
    case StepKind::fbhf:
      return fbhf_step(spec, steps, state);
    case StepKind::no_cocoercive:
      return corollary_d0_step(spec, steps, state);
    case StepKind::general:
      break;
  }
  return fpdhf_step(spec, steps, state);
}

double lyapunov_gamma(const StepSizes& steps, const IterState& state,
                      const OracleSolution& oracle, const LinearMap* l) {
  const Vector ex = state.x - oracle.x_star;
  const Vector eu = state.u - oracle.u_star;
  double gamma = ex.squaredNorm() + steps.tau / steps.sigma * eu.squaredNorm();
  if (l) gamma -= 2.0 * steps.tau * ex.dot(l->adjoint(eu));
  return gamma;
}

double lyapunov_lower_bound(const StepSizes& steps, const IterState& state,
                            const OracleSolution& oracle, double l_norm) {
  const double ex = (state.x - oracle.x_star).squaredNorm();
  const double eu = steps.tau / steps.sigma * (state.u - oracle.u_star).squaredNorm();
  return (1.0 - steps.sigma * steps.tau * l_norm * l_norm) * std::max(ex, eu);
}

double fixed_point_residual(const ProblemSpec& spec, const StepSizes& steps,
                            const Vector& x, const Vector& u) {
  const IterState s = IterState::initial(x, u);
  const IterState next = dispatch_step(spec, steps, s);
  return std::sqrt((next.x - x).squaredNorm() + (next.u - u).squaredNorm());
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::max_iters:
      return "max_iters";
    case Termination::tolerance_met:
      return "tolerance_met";
    case Termination::divergence_detected:
      return "divergence_detected";
  }
  return "unknown";
}

double relative_pd_error(const IterState& before, const IterState& after) {
  const double num = (after.x - before.x).squaredNorm() +
                     (after.u - before.u).squaredNorm();
  const double den = std::max(before.x.squaredNorm() + before.u.squaredNorm(),
                              std::numeric_limits<double>::min());
  return std::sqrt(num / den);
}

namespace {

void probe_operators(const ProblemSpec& spec, std::uint64_t seed) {
  if (spec.c) {
    const auto r = probe_forward(*spec.c, 200, seed);
    require(r.violations == 0, "debug probe: C violates its declared constant (worst ratio " +
                                   std::to_string(r.worst) + ")");
  }
  if (spec.d) {
    const auto r = probe_forward(*spec.d, 200, seed + 1);
    require(r.violations == 0, "debug probe: D violates its declared constant (worst ratio " +
                                   std::to_string(r.worst) + ")");
  }
  if (spec.l) {
    const auto r = probe_adjoint(*spec.l, 50, seed + 2);
    require(r.violations == 0, "debug probe: L fails the adjoint identity");
  }
}

}  // namespace

RunReport run(const ProblemSpec& spec, const StepSizes& steps, Vector x0,
              Vector u0, const StopRule& stop, const RunCallbacks& callbacks,
              const RunOptions& options) {
  spec.validate();
  require(x0.size() == spec.primal_dim, "run: x0 dimension mismatch");
  require(u0.size() == spec.dual_dim, "run: u0 dimension mismatch");
  require(stop.max_iters >= 1, "run: max_iters must be >= 1");
  const StepVerdict verdict = validate_steps(spec, steps);
  if (!verdict.valid && !options.unsafe_steps) {
    throw ContractViolation("run: step sizes rejected\n" + verdict.describe());
  }
  if (options.check_operators) probe_operators(spec, options.probe_seed);

  const LinearMap* l = spec.l ? &*spec.l : nullptr;
  RunReport report;
  report.step_kind = select_step(spec);
  IterState state = IterState::initial(std::move(x0), std::move(u0));
  if (callbacks.oracle)
    report.gamma0 = lyapunov_gamma(steps, state, *callbacks.oracle, l);
  if (callbacks.objective) report.objective0 = callbacks.objective(state.x);

  report.records.reserve(static_cast<std::size_t>(std::min<long>(stop.max_iters, 1 << 20)));
  for (long n = 0; n < stop.max_iters; ++n) {
    IterState next = dispatch_step(spec, steps, state);
    if (!next.finite()) {
      report.termination = Termination::divergence_detected;
      break;
    }
    IterRecord rec;
    rec.iter = next.n;
    rec.dx = (next.x - state.x).norm();
    rec.du = (next.u - state.u).norm();
    rec.rel_pd_err = relative_pd_error(state, next);
    rec.z_gap_sq = (next.z - state.x).squaredNorm();
    if (callbacks.oracle) rec.gamma = lyapunov_gamma(steps, next, *callbacks.oracle, l);
    if (callbacks.objective) rec.objective = callbacks.objective(next.x);
    report.records.push_back(rec);
    if (callbacks.on_iteration) callbacks.on_iteration(rec);
    state = std::move(next);
    if (rec.rel_pd_err <= stop.rel_pd_tol) {
      report.termination = Termination::tolerance_met;
      break;
    }
  }
  report.final_state = std::move(state);
  return report;
}

MetricsCsvWriter::MetricsCsvWriter(std::ostream& out, bool include_gamma)
    : out_(out), include_gamma_(include_gamma) {
  out_ << (include_gamma_ ? "iter,dx,du,rel_pd_err,gamma,objective\n"
                          : "iter,dx,du,rel_pd_err,objective\n");
}

void MetricsCsvWriter::write(const IterRecord& rec) {
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out_ << rec.iter << ',' << num(rec.dx) << ',' << num(rec.du) << ','
       << num(rec.rel_pd_err) << ',';
  if (include_gamma_) {
    if (rec.gamma) out_ << num(*rec.gamma);
    out_ << ',';
  }
  if (rec.objective) out_ << num(*rec.objective);
  out_ << '\n';
}

}  // namespace fpdhf
