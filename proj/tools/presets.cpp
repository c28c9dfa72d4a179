#include "presets.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fpdhf/config.hpp"
#include "fpdhf/error.hpp"
#include "fpdhf/saddle.hpp"

namespace fpdhf::cli {

namespace {

constexpr const char* kSolve = "solve";

std::string fmt(double v) { return format_double(v); }

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Matrix skew_matrix(Index n, double norm, std::uint64_t seed) {
  const Matrix g = gaussian_matrix(n, n, seed);
  const Matrix s = g - g.transpose();
  const double sn = spectral_norm(s);
  return sn > 0.0 ? Matrix(s * (norm / sn)) : s;
}

ForwardOp skew_op(const Matrix& s, double norm) {
  return linear_forward_op(matrix_map(s), ForwardKind::lipschitz, norm * (1.0 + 1e-12));
}

ForwardOp weighted_quadratic(const Vector& q, const Vector& b) {
  return ForwardOp(
      q.size(), ForwardKind::cocoercive, 1.0 / q.maxCoeff(),
      [q, b](const Vector& x) { return Vector(q.cwiseProduct(x - b)); }, "weighted-quadratic");
}

/// Steps from [solve] tau/sigma/epsilon when given, otherwise automatic.
StepSizes configured_steps(const KeyValueConfig& cfg, const StepConstants& k) {
  StepSizes st = automatic_steps(k);
  st.tau = cfg.get_double(kSolve, "tau", st.tau);
  st.sigma = cfg.get_double(kSolve, "sigma", st.sigma);
  if (!cfg.get(kSolve, "epsilon") && k.beta && cfg.get(kSolve, "tau")) {
    st.epsilon = epsilon_condat_vu(st.tau, *k.beta);
  }
  st.epsilon = cfg.get_double(kSolve, "epsilon", st.epsilon);
  const StepVerdict v = validate_steps(k, st);
  if (!v.valid) throw DomainFailure("step sizes rejected\n" + v.describe());
  return st;
}

StopRule stop_rule(const KeyValueConfig& cfg, long default_iters) {
  StopRule stop;
  stop.max_iters = cfg.get_long(kSolve, "max_iters", default_iters);
  stop.rel_pd_tol = cfg.get_double(kSolve, "tol", 0.0);
  require(stop.max_iters >= 1, "solve: max_iters must be positive");
  require(stop.rel_pd_tol >= 0.0, "solve: tol must be nonnegative");
  return stop;
}

void check_divergence(const RunReport& r) {
  if (r.termination == Termination::divergence_detected)
    throw DomainFailure("iteration diverged at step " + std::to_string(r.iterations() + 1));
}

// Separable quadratic program on the box [-1, 1]^n:
//   min 0.5 sum q_i (x_i - b_i)^2 + (mu/2) ||x||^2,
// split as A = box, D = Q(x - b), B = grad (mu/2)||.||^2, L = Id, plus an
// optional skew C. Without C the solution is clamp(q b / (q + mu), -1, 1).
struct ToyQp {
  ProblemSpec spec;
  Vector x_star;
  Vector u_star;
  Matrix skew;
  Vector q;
  Vector b;
};

ToyQp make_toy_qp(Index n, double mu, double skew_norm, std::uint64_t seed) {
  require(n >= 1, "toy-qp: n must be positive");
  require(mu > 0.0, "toy-qp: mu must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 1.5);
  Vector q(n), b(n);
  for (Index i = 0; i < n; ++i) {
    q[i] = weight(rng);
    b[i] = normal(rng);
  }
  ToyQp t{.spec = {.a = box_resolvent(n, -1.0, 1.0),
                   .b = quadratic_resolvent(Vector::Zero(n), mu),
                   .l = identity_map(n),
                   .c = std::nullopt,
                   .d = weighted_quadratic(q, b),
                   .primal_dim = n,
                   .dual_dim = n},
          .x_star = (q.cwiseProduct(b).array() / (q.array() + mu)).cwiseMax(-1.0).cwiseMin(1.0).matrix(),
          .u_star = Vector(),
          .skew = Matrix(),
          .q = q,
          .b = b};
  t.u_star = mu * t.x_star;
  if (skew_norm > 0.0) {
    t.skew = skew_matrix(n, skew_norm, seed + 1);
    t.spec.c = skew_op(t.skew, skew_norm);
  }
  return t;
}

SolveOutcome solve_toy_qp(const KeyValueConfig& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.get_long(kSolve, "seed", 1));
  const ToyQp t = make_toy_qp(cfg.get_long(kSolve, "n", 10), cfg.get_double(kSolve, "mu", 0.5), 0.0, seed);
  SolveOutcome out;
  out.steps = configured_steps(cfg, StepConstants::from(t.spec));
  RunCallbacks cb;
  cb.oracle = OracleSolution{t.x_star, t.u_star};
  cb.objective = [q = t.q, b = t.b, mu = cfg.get_double(kSolve, "mu", 0.5)](const Vector& x) {
    return 0.5 * q.dot((x - b).cwiseAbs2()) + 0.5 * mu * x.squaredNorm();
  };
  out.report = run(t.spec, out.steps, Vector::Zero(t.spec.primal_dim), Vector::Zero(t.spec.dual_dim),
                   stop_rule(cfg, 10000), cb);
  check_divergence(out.report);
  out.x = out.report.final_state.x;
  out.u = out.report.final_state.u;
  const double err = (out.x - t.x_star).cwiseAbs().maxCoeff();
  const double tol = cfg.get_double(kSolve, "check_tol", 1e-6);
  out.check_passed = err <= tol;
  out.summary = {{"oracle_error", fmt(err)}, {"check_tol", fmt(tol)}};
  return out;
}

SolveOutcome solve_bilinear_saddle(const KeyValueConfig& cfg) {
  SaddleProblem sp{.f1 = zero_resolvent(1),
                   .g1 = zero_resolvent(1),
                   .f2 = std::nullopt,
                   .g2 = std::nullopt,
                   .l1 = std::nullopt,
                   .l2 = std::nullopt,
                   .grad_f3 = std::nullopt,
                   .grad_g3 = std::nullopt,
                   .grad_x_psi = {},
                   .grad_y_psi = {},
                   .zeta = 0.0};
  set_bilinear_psi(sp, Matrix::Ones(1, 1));
  StepConstants k{.rho = 0.0, .beta = std::nullopt, .zeta = sp.zeta, .l_norm_sq = 0.0};
  SolveOutcome out;
  out.steps = configured_steps(cfg, k);
  const SaddleState init{Vector::Constant(1, cfg.get_double(kSolve, "x0", 1.0)),
                         Vector::Constant(1, cfg.get_double(kSolve, "y0", 1.0)), Vector(), Vector()};
  SaddleRun r = run_saddle(sp, out.steps, init, stop_rule(cfg, 10000));
  out.report = std::move(r.report);
  check_divergence(out.report);
  out.x = out.report.final_state.x;
  out.u = out.report.final_state.u;
  const double residual = std::hypot(r.final_state.x[0], r.final_state.y[0]);
  const double tol = cfg.get_double(kSolve, "check_tol", 1e-6);
  out.check_passed = residual <= tol;
  out.summary = {{"saddle_residual", fmt(residual)}, {"check_tol", fmt(tol)}};
  return out;
}

SolveOutcome solve_decoupled_blocks(const KeyValueConfig& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.get_long(kSolve, "seed", 1));
  const double mu = cfg.get_double(kSolve, "mu", 0.5);
  const double skew = cfg.get_double(kSolve, "skew_norm", 0.3);
  const ToyQp t1 = make_toy_qp(cfg.get_long(kSolve, "n1", 6), mu, skew, seed);
  const ToyQp t2 = make_toy_qp(cfg.get_long(kSolve, "n2", 8), mu, skew, seed + 100);
  const Index n1 = t1.spec.primal_dim, n2 = t2.spec.primal_dim;

  BlockProblem bp{.primal = {t1.spec.a, t2.spec.a},
                  .dual = {*t1.spec.b, *t2.spec.b},
                  .couplings = {{t1.spec.l, std::nullopt}, {std::nullopt, t2.spec.l}},
                  .cocoercive = {t1.spec.d, t2.spec.d},
                  .lipschitz = std::nullopt};
  if (skew > 0.0) {
    Matrix s = Matrix::Zero(n1 + n2, n1 + n2);
    s.topLeftCorner(n1, n1) = t1.skew;
    s.bottomRightCorner(n2, n2) = t2.skew;
    bp.lipschitz = skew_op(s, skew);
  }

  SolveOutcome out;
  out.steps = configured_steps(cfg, block_step_constants(bp));
  const StopRule stop = stop_rule(cfg, 2000);
  out.report = run_multivariate(bp, out.steps, {{Vector::Zero(n1), Vector::Zero(n2)}, {Vector::Zero(n1), Vector::Zero(n2)}},
                                stop);
  check_divergence(out.report);
  out.x = out.report.final_state.x;
  out.u = out.report.final_state.u;

  // Same number of steps per block; a block that stops earlier sits at an
  // exact fixed point of its own iteration.
  const StopRule same{.max_iters = out.report.iterations(), .rel_pd_tol = 0.0};
  const RunReport r1 = run(t1.spec, out.steps, Vector::Zero(n1), Vector::Zero(n1), same);
  const RunReport r2 = run(t2.spec, out.steps, Vector::Zero(n2), Vector::Zero(n2), same);
  const double dev = std::max({(out.x.head(n1) - r1.final_state.x).cwiseAbs().maxCoeff(),
                               (out.x.tail(n2) - r2.final_state.x).cwiseAbs().maxCoeff(),
                               (out.u.head(n1) - r1.final_state.u).cwiseAbs().maxCoeff(),
                               (out.u.tail(n2) - r2.final_state.u).cwiseAbs().maxCoeff()});
  const double tol = cfg.get_double(kSolve, "check_tol", 1e-12);
  out.check_passed = dev <= tol;
  out.summary = {{"separability_deviation", fmt(dev)}, {"check_tol", fmt(tol)}};
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

ResolventOp resolvent_from(const KeyValueConfig& cfg, const std::string& sec, bool primal) {
  const long dim = cfg.get_long(sec, "dim", 0);
  require(dim >= 1, "[" + sec + "] dim must be a positive integer");
  const std::string op = cfg.get_string(sec, "op", "zero");
  if (op == "zero") return zero_resolvent(dim);
  if (op == "box") {
    return box_resolvent(dim, cfg.get_double(sec, "lo", -1.0), cfg.get_double(sec, "hi", 1.0));
  }
  if (op == "l1") return l1_resolvent(dim, cfg.get_double(sec, "weight", 1.0));
  if (op == "quadratic") {
    return quadratic_resolvent(Vector::Constant(dim, cfg.get_double(sec, "center", 0.0)),
                               cfg.get_double(sec, "weight", 1.0));
  }
  if (op == "simplex" && primal) return simplex_resolvent(dim);
  throw ContractViolation("[" + sec + "] unknown op '" + op + "'");
}

}  // namespace

StepSizes automatic_steps(const StepConstants& k) {
  StepSizes st;
  st.tau = k.beta ? 0.5 * *k.beta : 1.0;
  if (k.zeta > 0.0) st.tau = std::min(st.tau, 0.5 / k.zeta);
  if (k.rho < 0.0) st.tau = std::min(st.tau, 0.5 / -k.rho);
  st.epsilon = k.beta ? epsilon_condat_vu(st.tau, *k.beta) : 0.0;
  const double budget = 1.0 - st.epsilon - st.tau * st.tau * k.zeta * k.zeta;
  st.sigma = k.l_norm_sq > 0.0 ? 0.9 * budget / (st.tau * k.l_norm_sq) : 1.0;
  return st;
}

BlockProblem block_problem_from_config(const KeyValueConfig& cfg) {
  BlockProblem bp;
  std::vector<std::string> primal_names, dual_names;
  for (const auto& s : cfg.sections()) {
    if (starts_with(s.name, "primal.")) {
      primal_names.push_back(s.name.substr(7));
      bp.primal.push_back(resolvent_from(cfg, s.name, true));
      const std::string smooth = cfg.get_string(s.name, "smooth", "none");
      if (smooth == "quadratic") {
        const Index dim = bp.primal.back().dim();
        const double q = cfg.get_double(s.name, "q", 1.0);
        require(q > 0.0, "[" + s.name + "] q must be positive");
        bp.cocoercive.push_back(weighted_quadratic(Vector::Constant(dim, q),
                                                   Vector::Constant(dim, cfg.get_double(s.name, "b", 0.0))));
      } else {
        require(smooth == "none", "[" + s.name + "] smooth must be 'none' or 'quadratic'");
        bp.cocoercive.emplace_back();
      }
    } else if (starts_with(s.name, "dual.")) {
      dual_names.push_back(s.name.substr(5));
      bp.dual.push_back(resolvent_from(cfg, s.name, false));
    }
  }
  require(!bp.primal.empty(), "block problem: no [primal.NAME] sections");

  auto index_of = [](const std::vector<std::string>& names, const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  };
  bp.couplings.assign(bp.primal.size(), std::vector<std::optional<LinearMap>>(bp.dual.size()));
  for (const auto& s : cfg.sections()) {
    if (!starts_with(s.name, "coupling.")) continue;
    const std::string rest = s.name.substr(9);
    const auto dot = rest.find('.');
    require(dot != std::string::npos, "[" + s.name + "] expected coupling.PRIMAL.DUAL");
    const int i = index_of(primal_names, rest.substr(0, dot));
    const int k = index_of(dual_names, rest.substr(dot + 1));
    require(i >= 0 && k >= 0, "[" + s.name + "] names an unknown block");
    const Index in = bp.primal[i].dim(), out = bp.dual[k].dim();
    const std::string map = cfg.get_string(s.name, "map", "identity");
    const double scale = cfg.get_double(s.name, "scale", 1.0);
    if (map == "identity" || map == "scaled") {
      require(in == out, "[" + s.name + "] identity coupling needs equal dimensions");
      bp.couplings[i][k] = map == "identity" ? identity_map(in) : scaled_identity_map(in, scale);
    } else if (map == "random") {
      const Matrix g = gaussian_matrix(out, in, static_cast<std::uint64_t>(cfg.get_long(s.name, "seed", 1)));
      bp.couplings[i][k] = matrix_map(g * (scale / spectral_norm(g)));
    } else {
      throw ContractViolation("[" + s.name + "] unknown map '" + map + "'");
    }
  }
  if (cfg.find_section("lipschitz")) {
    const std::string op = cfg.get_string("lipschitz", "op", "skew");
    require(op == "skew", "[lipschitz] op must be 'skew'");
    const double norm = cfg.get_double("lipschitz", "norm", 0.5);
    require(norm > 0.0, "[lipschitz] norm must be positive");
    const Index total = bp.primal_layout().total_dim();
    bp.lipschitz = skew_op(skew_matrix(total, norm, static_cast<std::uint64_t>(cfg.get_long("lipschitz", "seed", 1))),
                           norm);
  }
  bp.validate();
  return bp;
}

namespace {

SolveOutcome solve_blocks(const KeyValueConfig& cfg) {
  const BlockProblem bp = block_problem_from_config(cfg);
  SolveOutcome out;
  const StepConstants k = block_step_constants(bp);
  out.steps = configured_steps(cfg, k);
  BlockState init;
  for (const auto& a : bp.primal) init.x.push_back(Vector::Zero(a.dim()));
  for (const auto& b : bp.dual) init.u.push_back(Vector::Zero(b.dim()));
  out.report = run_multivariate(bp, out.steps, init, stop_rule(cfg, 1000));
  check_divergence(out.report);
  out.x = out.report.final_state.x;
  out.u = out.report.final_state.u;
  out.summary = {{"ell", fmt(ell_bound(bp))},
                 {"fixed_point_residual", fmt(fixed_point_residual(assemble(bp), out.steps, out.x, out.u))}};
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"toy-qp", "bilinear-saddle", "decoupled-blocks", "blocks"};
}

SolveOutcome solve_preset(const KeyValueConfig& cfg) {
  const std::string preset = cfg.get_string(kSolve, "preset", "");
  if (preset == "toy-qp") return solve_toy_qp(cfg);
  if (preset == "bilinear-saddle") return solve_bilinear_saddle(cfg);
  if (preset == "decoupled-blocks") return solve_decoupled_blocks(cfg);
  if (preset == "blocks") return solve_blocks(cfg);
  throw std::invalid_argument("unknown preset '" + preset +
                              "' (expected toy-qp, bilinear-saddle, decoupled-blocks or blocks)");
}

}  // namespace fpdhf::cli
