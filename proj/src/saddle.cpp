#include "fpdhf/saddle.hpp"

#include <algorithm>
#include <iostream>
#include <memory>

#include "fpdhf/error.hpp"
#include "fpdhf/multivariate.hpp"
#include "fpdhf/probes.hpp"

namespace fpdhf {

void SaddleProblem::validate() const {
  require(f2.has_value() == l1.has_value(),
          "SaddleProblem: f2 and L1 must be given together");
  require(g2.has_value() == l2.has_value(),
          "SaddleProblem: g2 and L2 must be given together");
  if (l1) {
    require(l1->in_dim() == x_dim() && l1->out_dim() == f2->dim(),
            "SaddleProblem: L1 must map H1 -> G1");
  }
  if (l2) {
    require(l2->in_dim() == y_dim() && l2->out_dim() == g2->dim(),
            "SaddleProblem: L2 must map H2 -> G2");
  }
  if (grad_f3) {
    require(grad_f3->dim() == x_dim() && grad_f3->kind() == ForwardKind::cocoercive,
            "SaddleProblem: grad f3 must be cocoercive on H1");
  }
  if (grad_g3) {
    require(grad_g3->dim() == y_dim() && grad_g3->kind() == ForwardKind::cocoercive,
            "SaddleProblem: grad g3 must be cocoercive on H2");
  }
  require(static_cast<bool>(grad_x_psi) == static_cast<bool>(grad_y_psi),
          "SaddleProblem: both partial gradients of Psi are required");
  if (has_psi()) require(zeta > 0.0, "SaddleProblem: zeta must be positive");
}

void set_bilinear_psi(SaddleProblem& sp, const Matrix& m) {
  require(m.cols() == sp.x_dim() && m.rows() == sp.y_dim(),
          "set_bilinear_psi: M must map H1 -> H2");
  auto shared = std::make_shared<const Matrix>(m);
  sp.grad_x_psi = [shared](const Vector&, const Vector& y) -> Vector {
    return shared->transpose() * y;
  };
  sp.grad_y_psi = [shared](const Vector& x, const Vector&) -> Vector {
    return (*shared) * x;
  };
  Eigen::JacobiSVD<Matrix> svd(m);
  sp.zeta = svd.singularValues()(0) * (1.0 + 1e-12);
}

namespace {

StepConstants saddle_constants(const SaddleProblem& sp) {
  StepConstants k;
  k.rho = std::min(sp.f1.rho(), sp.g1.rho());
  if (sp.grad_f3) k.beta = sp.grad_f3->constant();
  if (sp.grad_g3) k.beta = k.beta ? std::min(*k.beta, sp.grad_g3->constant())
                                  : sp.grad_g3->constant();
  k.zeta = sp.has_psi() ? sp.zeta : 0.0;
  const double n1 = sp.l1 ? sp.l1->norm_bound() : 0.0;
  const double n2 = sp.l2 ? sp.l2->norm_bound() : 0.0;
  const double n = std::max(n1, n2);
  k.l_norm_sq = n * n;
  return k;
}

}  // namespace

ProblemSpec build_saddle_spec(const SaddleProblem& sp) {
  sp.validate();
  auto shared = std::make_shared<const SaddleProblem>(sp);
  const Index n1 = sp.x_dim(), n2 = sp.y_dim();
  const Index m1 = sp.f2 ? sp.f2->dim() : 0;
  const Index m2 = sp.g2 ? sp.g2->dim() : 0;
  const StepConstants k = saddle_constants(sp);

  ResolventOp a(
      n1 + n2, k.rho,
      [shared, n1, n2](double tau, const Vector& v) {
        Vector out(n1 + n2);
        out.head(n1) = shared->f1.resolve(tau, v.head(n1));
        out.tail(n2) = shared->g1.resolve(tau, v.tail(n2));
        return out;
      },
      "saddle-A");

  ProblemSpec spec{.a = std::move(a),
                   .b = std::nullopt,
                   .l = std::nullopt,
                   .c = std::nullopt,
                   .d = std::nullopt,
                   .primal_dim = n1 + n2,
                   .dual_dim = m1 + m2};

  if (m1 + m2 > 0) {
    spec.b = ResolventOp(
        m1 + m2, 0.0,
        [shared, m1, m2](double tau, const Vector& v) {
          Vector out(m1 + m2);
          if (m1 > 0) out.head(m1) = shared->f2->resolve(tau, v.head(m1));
          if (m2 > 0) out.tail(m2) = shared->g2->resolve(tau, v.tail(m2));
          return out;
        },
        "saddle-B");
    spec.l = LinearMap(
        n1 + n2, m1 + m2,
        [shared, n1, n2, m1, m2](const Vector& xy) {
          Vector out(m1 + m2);
          if (m1 > 0) out.head(m1) = shared->l1->apply(xy.head(n1));
          if (m2 > 0) out.tail(m2) = shared->l2->apply(xy.tail(n2));
          return out;
        },
        [shared, n1, n2, m1, m2](const Vector& uv) {
          Vector out(n1 + n2);
          out.head(n1) = m1 > 0 ? shared->l1->adjoint(uv.head(m1)) : Vector::Zero(n1);
          out.tail(n2) = m2 > 0 ? shared->l2->adjoint(uv.tail(m2)) : Vector::Zero(n2);
          return out;
        },
        std::sqrt(k.l_norm_sq));
  }
  if (k.beta) {
    spec.d = ForwardOp(
        n1 + n2, ForwardKind::cocoercive, *k.beta,
        [shared, n1, n2](const Vector& xy) {
          Vector out(n1 + n2);
          out.head(n1) = shared->grad_f3 ? shared->grad_f3->apply(xy.head(n1))
                                         : Vector::Zero(n1);
          out.tail(n2) = shared->grad_g3 ? shared->grad_g3->apply(xy.tail(n2))
                                         : Vector::Zero(n2);
          return out;
        },
        "saddle-D");
  }
  if (sp.has_psi()) {
    spec.c = ForwardOp(
        n1 + n2, ForwardKind::lipschitz, sp.zeta,
        [shared, n1, n2](const Vector& xy) {
          const Vector x = xy.head(n1), y = xy.tail(n2);
          Vector out(n1 + n2);
          out.head(n1) = shared->grad_x_psi(x, y);
          out.tail(n2) = -shared->grad_y_psi(x, y);
          return out;
        },
        "saddle-C");
  }
  return spec;
}

SaddleState saddle_step(const SaddleProblem& sp, const StepSizes& steps,
                        const SaddleState& s) {
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  const bool psi = sp.has_psi();

  Vector p1, p2;
  if (psi) {
    p1 = sp.grad_x_psi(s.x, s.y);
    p2 = -sp.grad_y_psi(s.x, s.y);
  }

  Vector dir1 = sp.l1 ? sp.l1->adjoint(s.u) : Vector::Zero(s.x.size());
  if (psi) dir1 += p1;
  if (sp.grad_f3) dir1 += sp.grad_f3->apply(s.x);
  const Vector z1 = sp.f1.resolve(tau, s.x - tau * dir1);

  Vector dir2 = sp.l2 ? sp.l2->adjoint(s.v) : Vector::Zero(s.y.size());
  if (psi) dir2 += p2;
  if (sp.grad_g3) dir2 += sp.grad_g3->apply(s.y);
  const Vector z2 = sp.g1.resolve(tau, s.y - tau * dir2);

  Vector q1, q2;
  if (psi) {
    q1 = tau * (sp.grad_x_psi(z1, z2) - p1);
    q2 = tau * (-sp.grad_y_psi(z1, z2) - p2);
  }

  SaddleState next;
  if (sp.l1) {
    Vector bar = 2.0 * z1 - s.x;
    if (psi) bar -= q1;
    next.u = resolvent_of_inverse(*sp.f2, sigma, s.u + sigma * sp.l1->apply(bar));
  }
  if (sp.l2) {
    Vector bar = 2.0 * z2 - s.y;
    if (psi) bar -= q2;
    next.v = resolvent_of_inverse(*sp.g2, sigma, s.v + sigma * sp.l2->apply(bar));
  }
  next.x = psi ? Vector(z1 - q1) : z1;
  next.y = psi ? Vector(z2 - q2) : z2;
  return next;
}

namespace {

IterState pack(const SaddleState& s) {
  Vector x(s.x.size() + s.y.size());
  x << s.x, s.y;
  Vector u(s.u.size() + s.v.size());
  u << s.u, s.v;
  return IterState::initial(std::move(x), std::move(u));
}

bool finite(const SaddleState& s) {
  return s.x.allFinite() && s.y.allFinite() && s.u.allFinite() && s.v.allFinite();
}

}  // namespace

SaddleRun run_saddle(const SaddleProblem& sp, const StepSizes& steps,
                     const SaddleState& init, const StopRule& stop,
                     const RunOptions& options) {
  sp.validate();
  require(init.x.size() == sp.x_dim() && init.y.size() == sp.y_dim(),
          "run_saddle: primal initial point dimension mismatch");
  require(init.u.size() == (sp.f2 ? sp.f2->dim() : 0) &&
              init.v.size() == (sp.g2 ? sp.g2->dim() : 0),
          "run_saddle: dual initial point dimension mismatch");
  const StepVerdict verdict = validate_steps(saddle_constants(sp), steps);
  if (!verdict.valid && !options.unsafe_steps) {
    throw ContractViolation("run_saddle: step sizes rejected\n" + verdict.describe());
  }
  if (options.check_operators && sp.has_psi()) {
    const Index n1 = sp.x_dim(), n2 = sp.y_dim();
    const double estimate = estimate_lipschitz(
        [&sp, n1, n2](const Vector& xy) {
          Vector out(n1 + n2);
          out.head(n1) = sp.grad_x_psi(xy.head(n1), xy.tail(n2));
          out.tail(n2) = -sp.grad_y_psi(xy.head(n1), xy.tail(n2));
          return out;
        },
        n1 + n2, 200, options.probe_seed);
    if (estimate > sp.zeta * (1.0 + 1e-10)) {
      std::cerr << "warning: run_saddle: observed Lipschitz ratio " << estimate
                << " exceeds the supplied zeta " << sp.zeta << '\n';
    }
  }

  SaddleRun out;
  out.report.step_kind = StepKind::general;
  SaddleState state = init;
  IterState packed = pack(state);
  for (long n = 0; n < stop.max_iters; ++n) {
    SaddleState next = saddle_step(sp, steps, state);
    if (!finite(next)) {
      out.report.termination = Termination::divergence_detected;
      break;
    }
    IterState next_packed = pack(next);
    next_packed.n = n + 1;
    IterRecord rec;
    rec.iter = n + 1;
    rec.dx = (next_packed.x - packed.x).norm();
    rec.du = (next_packed.u - packed.u).norm();
    rec.rel_pd_err = relative_pd_error(packed, next_packed);
    out.report.records.push_back(rec);
    state = std::move(next);
    packed = std::move(next_packed);
    if (rec.rel_pd_err <= stop.rel_pd_tol) {
      out.report.termination = Termination::tolerance_met;
      break;
    }
  }
  out.report.final_state = packed;
  out.final_state = std::move(state);
  return out;
}

}  // namespace fpdhf
