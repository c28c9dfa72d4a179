#include "fpdhf/multivariate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fpdhf/error.hpp"

namespace fpdhf {

BlockLayout::BlockLayout(std::vector<Index> dims) : dims_(std::move(dims)) {
  offsets_.reserve(dims_.size());
  for (Index d : dims_) {
    require(d > 0, "BlockLayout: block dimensions must be positive");
    offsets_.push_back(total_);
    total_ += d;
  }
}

Vector BlockLayout::concat(const std::vector<Vector>& parts) const {
  require(parts.size() == dims_.size(), "BlockLayout::concat: block count mismatch");
  Vector flat(total_);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require(parts[i].size() == dims_[i], "BlockLayout::concat: block dimension mismatch");
    flat.segment(offsets_[i], dims_[i]) = parts[i];
  }
  return flat;
}

std::vector<Vector> BlockLayout::split(const Vector& flat) const {
  require(flat.size() == total_, "BlockLayout::split: length mismatch");
  std::vector<Vector> parts;
  parts.reserve(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i)
    parts.emplace_back(flat.segment(offsets_[i], dims_[i]));
  return parts;
}

BlockLayout BlockProblem::primal_layout() const {
  std::vector<Index> dims;
  for (const auto& a : primal) dims.push_back(a.dim());
  return BlockLayout(std::move(dims));
}

BlockLayout BlockProblem::dual_layout() const {
  std::vector<Index> dims;
  for (const auto& b : dual) dims.push_back(b.dim());
  return BlockLayout(std::move(dims));
}

void BlockProblem::validate() const {
  require(!primal.empty(), "BlockProblem: need at least one primal block");
  require(couplings.size() == primal.size(),
          "BlockProblem: couplings must have one row per primal block");
  require(cocoercive.size() == primal.size(),
          "BlockProblem: cocoercive must have one entry per primal block");
  for (std::size_t i = 0; i < primal.size(); ++i) {
    require(couplings[i].size() == dual.size(),
            "BlockProblem: couplings row must have one entry per dual block");
    for (std::size_t k = 0; k < dual.size(); ++k) {
      const auto& l = couplings[i][k];
      if (!l) continue;
      require(l->in_dim() == primal[i].dim() && l->out_dim() == dual[k].dim(),
              "BlockProblem: L_{" + std::to_string(i) + "," + std::to_string(k) +
                  "} has inconsistent dimensions");
    }
    if (cocoercive[i]) {
      require(cocoercive[i]->dim() == primal[i].dim(),
              "BlockProblem: D_" + std::to_string(i) + " dimension mismatch");
      require(cocoercive[i]->kind() == ForwardKind::cocoercive,
              "BlockProblem: D_" + std::to_string(i) + " must be cocoercive");
    }
  }
  for (const auto& b : dual) require(b.rho() >= 0.0, "BlockProblem: B_k must be monotone");
  if (lipschitz) {
    require(lipschitz->dim() == primal_layout().total_dim(),
            "BlockProblem: C must act on the full primal product space");
  }
}

std::optional<double> BlockProblem::beta() const {
  std::optional<double> beta;
  for (const auto& d : cocoercive) {
    if (d) beta = beta ? std::min(*beta, d->constant()) : d->constant();
  }
  return beta;
}

double ell_bound(const BlockProblem& problem) {
  double ell = 0.0;
  for (std::size_t k = 0; k < problem.dual.size(); ++k) {
    double column = 0.0;
    for (std::size_t i = 0; i < problem.primal.size(); ++i) {
      if (problem.couplings[i][k]) column += problem.couplings[i][k]->norm_bound();
    }
    ell += column * column;
  }
  return ell;
}

StepConstants block_step_constants(const BlockProblem& problem) {
  StepConstants k;
  k.rho = problem.primal.front().rho();
  for (const auto& a : problem.primal) k.rho = std::min(k.rho, a.rho());
  k.beta = problem.beta();
  k.zeta = problem.lipschitz ? problem.lipschitz->lipschitz_constant() : 0.0;
  k.l_norm_sq = ell_bound(problem);
  return k;
}

namespace {

bool has_coupling(const BlockProblem& p) {
  for (const auto& row : p.couplings)
    for (const auto& l : row)
      if (l) return true;
  return false;
}

bool has_cocoercive(const BlockProblem& p) {
  return std::any_of(p.cocoercive.begin(), p.cocoercive.end(),
                     [](const auto& d) { return d.has_value(); });
}

// Sum over primal blocks of L_{i,k} x_i for every dual block k.
std::vector<Vector> stacked_apply(const BlockProblem& p, const std::vector<Vector>& x) {
  std::vector<Vector> out;
  for (std::size_t k = 0; k < p.dual.size(); ++k) {
    Vector acc = Vector::Zero(p.dual[k].dim());
    for (std::size_t i = 0; i < p.primal.size(); ++i) {
      if (p.couplings[i][k]) acc += p.couplings[i][k]->apply(x[i]);
    }
    out.push_back(std::move(acc));
  }
  return out;
}

// Sum over dual blocks of L_{i,k}* u_k for every primal block i.
std::vector<Vector> stacked_adjoint(const BlockProblem& p, const std::vector<Vector>& u) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < p.primal.size(); ++i) {
    Vector acc = Vector::Zero(p.primal[i].dim());
    for (std::size_t k = 0; k < p.dual.size(); ++k) {
      if (p.couplings[i][k]) acc += p.couplings[i][k]->adjoint(u[k]);
    }
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace

ProblemSpec assemble(const BlockProblem& problem) {
  problem.validate();
  auto shared = std::make_shared<const BlockProblem>(problem);
  const BlockLayout primal = problem.primal_layout();
  const BlockLayout dual = problem.dual.empty() ? BlockLayout() : problem.dual_layout();
  const StepConstants k = block_step_constants(problem);

  ResolventOp a(
      primal.total_dim(), k.rho,
      [shared, primal](double tau, const Vector& v) {
        auto parts = primal.split(v);
        for (std::size_t i = 0; i < parts.size(); ++i)
          parts[i] = shared->primal[i].resolve(tau, parts[i]);
        return primal.concat(parts);
      },
      "blockwise-A");

  ProblemSpec spec{.a = std::move(a),
                   .b = std::nullopt,
                   .l = std::nullopt,
                   .c = problem.lipschitz,
                   .d = std::nullopt,
                   .primal_dim = primal.total_dim(),
                   .dual_dim = dual.total_dim()};

  if (!problem.dual.empty()) {
    spec.b = ResolventOp(
        dual.total_dim(), 0.0,
        [shared, dual](double tau, const Vector& v) {
          auto parts = dual.split(v);
          for (std::size_t k = 0; k < parts.size(); ++k)
            parts[k] = shared->dual[k].resolve(tau, parts[k]);
          return dual.concat(parts);
        },
        "blockwise-B");
  }
  if (has_coupling(problem)) {
    spec.l = LinearMap(
        primal.total_dim(), dual.total_dim(),
        [shared, primal, dual](const Vector& x) {
          return dual.concat(stacked_apply(*shared, primal.split(x)));
        },
        [shared, primal, dual](const Vector& u) {
          return primal.concat(stacked_adjoint(*shared, dual.split(u)));
        },
        std::sqrt(k.l_norm_sq));
  }
  if (has_cocoercive(problem)) {
    spec.d = ForwardOp(
        primal.total_dim(), ForwardKind::cocoercive, *k.beta,
        [shared, primal](const Vector& x) {
          auto parts = primal.split(x);
          for (std::size_t i = 0; i < parts.size(); ++i) {
            if (shared->cocoercive[i]) {
              parts[i] = shared->cocoercive[i]->apply(parts[i]);
            } else {
              parts[i].setZero();
            }
          }
          return primal.concat(parts);
        },
        "blockwise-D");
  }
  return spec;
}

BlockState multivariate_step(const BlockProblem& p, const StepSizes& steps,
                             const BlockState& state) {
  p.validate();
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  const std::size_t m = p.primal.size();
  const BlockLayout primal = p.primal_layout();
  require(state.x.size() == m && state.u.size() == p.dual.size(),
          "multivariate_step: state block count mismatch");

  std::vector<Vector> pn(m), z(m), q(m);
  if (p.lipschitz) {
    pn = primal.split(p.lipschitz->apply(primal.concat(state.x)));
  }
  const std::vector<Vector> ltu = stacked_adjoint(p, state.u);
  for (std::size_t i = 0; i < m; ++i) {
    Vector dir = ltu[i];
    if (p.lipschitz) dir += pn[i];
    if (p.cocoercive[i]) dir += p.cocoercive[i]->apply(state.x[i]);
    z[i] = p.primal[i].resolve(tau, state.x[i] - tau * dir);
  }
  if (p.lipschitz) {
    const std::vector<Vector> cz = primal.split(p.lipschitz->apply(primal.concat(z)));
    for (std::size_t i = 0; i < m; ++i) q[i] = tau * (cz[i] - pn[i]);
  }

  BlockState next;
  std::vector<Vector> bar(m);
  for (std::size_t i = 0; i < m; ++i) {
    bar[i] = 2.0 * z[i] - state.x[i];
    if (p.lipschitz) bar[i] -= q[i];
  }
  const std::vector<Vector> lbar = stacked_apply(p, bar);
  for (std::size_t k = 0; k < p.dual.size(); ++k) {
    const Vector w = state.u[k] + sigma * lbar[k];
    next.u.push_back(resolvent_of_inverse(p.dual[k], sigma, w));
  }
  for (std::size_t i = 0; i < m; ++i)
    next.x.push_back(p.lipschitz ? Vector(z[i] - q[i]) : z[i]);
  return next;
}

RunReport run_multivariate(const BlockProblem& problem, const StepSizes& steps,
                           const BlockState& init, const StopRule& stop,
                           const RunCallbacks& callbacks, const RunOptions& options) {
  problem.validate();
  const StepVerdict verdict = validate_steps(block_step_constants(problem), steps);
  if (!verdict.valid && !options.unsafe_steps) {
    throw ContractViolation("run_multivariate: step sizes rejected\n" + verdict.describe());
  }
  const ProblemSpec spec = assemble(problem);
  const Vector x0 = problem.primal_layout().concat(init.x);
  const Vector u0 = problem.dual.empty() ? Vector() : problem.dual_layout().concat(init.u);
  // The assembled bound sqrt(ell) is already covered by the check above.
  RunOptions inner = options;
  inner.unsafe_steps = true;
  return run(spec, steps, x0, u0, stop, callbacks, inner);
}

}  // namespace fpdhf
