#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "fpdhf/error.hpp"
#include "fpdhf/probes.hpp"
#include "fpdhf/solver.hpp"
#include "test_support.hpp"

using namespace fpdhf;
using testing::make_planted;
using testing::planted_steps;
using testing::PlantedOptions;

namespace {

double max_abs_diff(const Vector& a, const Vector& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

ResolventOp identity_resolvent(Index dim) { return zero_resolvent(dim); }

/// Resolvent of the normal cone of {0}: J_{sigma B^{-1}} is the identity.
ResolventOp origin_resolvent(Index dim) {
  return ResolventOp(dim, 0.0, [dim](double, const Vector&) { return Vector(Vector::Zero(dim)); },
                     "origin");
}

ProblemSpec scalar_example() {
  return ProblemSpec{.a = identity_resolvent(1),
                     .b = origin_resolvent(1),
                     .l = identity_map(1),
                     .c = linear_forward_op(scaled_identity_map(1, 0.5), ForwardKind::lipschitz, 0.5),
                     .d = linear_forward_op(identity_map(1), ForwardKind::cocoercive, 1.0),
                     .primal_dim = 1,
                     .dual_dim = 1};
}

}  // namespace

TEST_CASE("validate_steps examples") {
  StepConstants k{.rho = 0.0, .beta = 1.0, .zeta = 1.0, .l_norm_sq = 1.0};
  const auto ok = validate_steps(k, {.tau = 0.4, .sigma = 1.5, .epsilon = 0.2});
  CHECK(ok.valid);
  CHECK_FALSE(ok.first_violation.has_value());

  const auto bad = validate_steps(k, {.tau = 0.4, .sigma = 1.7, .epsilon = 0.2});
  CHECK_FALSE(bad.valid);
  REQUIRE(bad.first_violation.has_value());
  CHECK(*bad.first_violation == StepCondition::primal_dual_coupling);
  CHECK(bad.describe().find("FAIL") != std::string::npos);

  const auto big_tau = validate_steps(k, {.tau = 0.41, .sigma = 0.1, .epsilon = 0.2});
  CHECK(*big_tau.first_violation == StepCondition::cocoercive_step);

  const auto bad_eps = validate_steps(k, {.tau = 0.4, .sigma = 0.1, .epsilon = 1.0});
  CHECK(*bad_eps.first_violation == StepCondition::epsilon_range);

  CHECK(*validate_steps(k, {.tau = 0.0, .sigma = 1.0, .epsilon = 0.2}).first_violation ==
        StepCondition::positive_steps);

  StepConstants weak{.rho = -2.0, .beta = std::nullopt, .zeta = 0.0, .l_norm_sq = 0.0};
  CHECK(validate_steps(weak, {.tau = 0.4, .sigma = 1.0, .epsilon = 0.0}).valid);
  CHECK(*validate_steps(weak, {.tau = 0.5, .sigma = 1.0, .epsilon = 0.0}).first_violation ==
        StepCondition::single_valued);
}

TEST_CASE("validate_steps without a cocoercive term uses the strict unit bound") {
  // tau*sigma*|L|^2 + tau^2*zeta^2 = 0.5*1.66*1 + 0.25*0.64 = 0.99.
  StepConstants k{.rho = 0.0, .beta = std::nullopt, .zeta = 0.8, .l_norm_sq = 1.0};
  const auto v = validate_steps(k, {.tau = 0.5, .sigma = 1.66, .epsilon = 0.0});
  CHECK(v.valid);
  CHECK(v.checks.back().lhs == doctest::Approx(0.99).epsilon(1e-14));
  CHECK_FALSE(validate_steps(k, {.tau = 0.5, .sigma = 1.7, .epsilon = 0.0}).valid);
}

TEST_CASE("Condat-Vu acceptance region") {
  const double beta = 0.7, l2 = 2.3;
  StepConstants k{.rho = 0.0, .beta = beta, .zeta = 0.0, .l_norm_sq = l2};
  int mismatches = 0;
  for (int i = 1; i <= 50; ++i) {
    for (int j = 1; j <= 50; ++j) {
      const double tau = 2.0 * beta * i / 51.0;
      const double sigma = 1.2 * j / 50.0;
      const bool expected = sigma * tau * l2 < 1.0 - tau / (2.0 * beta);
      const auto v = validate_steps(k, {tau, sigma, epsilon_condat_vu(tau, beta)});
      if (v.valid != expected) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("forward-backward-half-forward step bound") {
  CHECK(std::abs(fbhf_step_bound(1.0, 1.0) - 4.0 / (1.0 + std::sqrt(17.0))) <= 1e-12);
  CHECK(fbhf_step_bound(1.0, 1.0) == doctest::Approx(0.780776).epsilon(1e-6));
  CHECK(fbhf_step_bound(1.5, 0.0) == 3.0);
  CHECK(fbhf_step_bound(1.5, 1e-12) == doctest::Approx(3.0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pick(0.05, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double beta = pick(rng), zeta = pick(rng);
    const double bound = fbhf_step_bound(beta, zeta);
    const double eps = epsilon_fbhf(beta, zeta);
    CHECK(std::abs(2.0 * beta * zeta * eps - std::sqrt(1.0 - eps)) <= 1e-12);
    CHECK(std::abs(2.0 * beta * eps - bound) <= 1e-12 * std::max(1.0, bound));
    StepConstants k{.rho = 0.0, .beta = beta, .zeta = zeta, .l_norm_sq = 0.0};
    // The step interval is open at the bound.
    CHECK(validate_steps(k, {(1.0 - 1e-9) * bound, 1.0, eps}).valid);
    CHECK_FALSE(validate_steps(k, {(1.0 + 1e-9) * bound, 1.0, eps}).valid);
  }
}

TEST_CASE("one step on a scalar instance") {
  const ProblemSpec spec = scalar_example();
  spec.validate();
  const IterState s = IterState::initial(Vector::Ones(1), Vector::Ones(1));
  const IterState n = fpdhf_step(spec, {.tau = 0.5, .sigma = 0.5, .epsilon = 0.25}, s);
  CHECK(n.p[0] == 0.5);
  CHECK(n.z[0] == -0.25);
  CHECK(n.q[0] == -0.3125);
  CHECK(n.u[0] == 0.40625);
  CHECK(n.x[0] == 0.0625);
  CHECK(n.n == 1);
}

TEST_CASE("zero operators give a fixed point") {
  const ProblemSpec spec{.a = identity_resolvent(4),
                         .b = origin_resolvent(3),
                         .l = matrix_map(Matrix::Zero(3, 4)),
                         .c = linear_forward_op(scaled_identity_map(4, 0.0), ForwardKind::lipschitz, 1.0),
                         .d = linear_forward_op(scaled_identity_map(4, 0.0), ForwardKind::cocoercive, 1.0),
                         .primal_dim = 4,
                         .dual_dim = 3};
  const Vector x0 = random_vector(4, 1), u0 = random_vector(3, 2);
  const IterState n = fpdhf_step(spec, {.tau = 0.3, .sigma = 0.3, .epsilon = 0.1},
                                 IterState::initial(x0, u0));
  CHECK(n.x == x0);
  CHECK(n.u == u0);
}

TEST_CASE("Condat-Vu reduction") {
  SUBCASE("hand recursion with A = 0, B^-1 = 0, L = Id") {
    const ProblemSpec spec{.a = identity_resolvent(2),
                           .b = origin_resolvent(2),
                           .l = identity_map(2),
                           .c = std::nullopt,
                           .d = std::nullopt,
                           .primal_dim = 2,
                           .dual_dim = 2};
    const double tau = 0.3, sigma = 0.6;
    Vector x{{1.0, -2.0}}, u{{0.5, 0.25}};
    IterState s = IterState::initial(x, u);
    for (int k = 0; k < 5; ++k) {
      s = condat_vu_step(spec, {tau, sigma, 0.0}, s);
      const Vector xn = x - tau * u;
      u = u + sigma * (2.0 * xn - x);
      x = xn;
      CHECK(max_abs_diff(s.x, x) <= 1e-15);
      CHECK(max_abs_diff(s.u, u) <= 1e-15);
    }
  }
  SUBCASE("agrees with the general step") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto p = make_planted({.n = 20, .m = 12, .with_c = false, .seed = seed});
      const StepSizes st = planted_steps(p.spec);
      IterState a = IterState::initial(random_vector(20, seed), random_vector(12, seed + 7));
      IterState b = a;
      double worst = 0.0;
      for (int k = 0; k < 100; ++k) {
        a = fpdhf_step(p.spec, st, a);
        b = condat_vu_step(p.spec, st, b);
        worst = std::max({worst, max_abs_diff(a.x, b.x), max_abs_diff(a.u, b.u)});
      }
      CHECK(worst <= 1e-12);
    }
  }
  SUBCASE("converges on a strongly convex instance") {
    auto p = make_planted({.n = 10, .m = 6, .with_c = false, .seed = 3});
    const auto r = run(p.spec, planted_steps(p.spec), Vector::Zero(10), Vector::Zero(6),
                       {.max_iters = 20000, .rel_pd_tol = 0.0});
    CHECK(r.step_kind == StepKind::condat_vu);
    CHECK(max_abs_diff(r.final_state.x, p.oracle.x_star) <= 1e-8);
  }
  CHECK_THROWS_AS(condat_vu_step(scalar_example(), {0.5, 0.5, 0.25},
                                 IterState::initial(Vector::Ones(1), Vector::Ones(1))),
                  ContractViolation);
}

TEST_CASE("FBHF reduction") {
  SUBCASE("agrees with the general step") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto p = make_planted({.n = 20, .with_b = false, .seed = seed});
      const StepSizes st = planted_steps(p.spec);
      IterState a = IterState::initial(random_vector(20, seed), Vector::Zero(1));
      IterState b = a;
      double worst = 0.0;
      for (int k = 0; k < 100; ++k) {
        a = fpdhf_step(p.spec, st, a);
        b = fbhf_step(p.spec, st, b);
        worst = std::max({worst, max_abs_diff(a.x, b.x), max_abs_diff(a.u, b.u)});
      }
      CHECK(worst <= 1e-12);
      CHECK(b.u.isZero(0.0));
    }
  }
  SUBCASE("C = 0 gives forward-backward") {
    auto p = make_planted({.n = 8, .with_c = false, .with_b = false, .seed = 2});
    const StepSizes st = planted_steps(p.spec);
    const Vector x = random_vector(8, 3);
    const IterState n = fbhf_step(p.spec, st, IterState::initial(x, Vector::Zero(1)));
    const Vector fb = prox_box(-1.0, 1.0, x - st.tau * p.spec.d->apply(x));
    CHECK(max_abs_diff(n.x, fb) <= 1e-15);
  }
  SUBCASE("D = 0 gives Tseng's forward-backward-forward") {
    auto p = make_planted({.n = 8, .with_b = false, .with_d = false, .seed = 2});
    const StepSizes st{.tau = 0.9, .sigma = 1.0, .epsilon = 0.0};
    const Vector x = random_vector(8, 3);
    const IterState n = fbhf_step(p.spec, st, IterState::initial(x, Vector::Zero(1)));
    const Vector z = prox_box(-1.0, 1.0, x - st.tau * p.s * x);
    const Vector tseng = z - st.tau * p.s * (z - x);
    CHECK(max_abs_diff(n.x, tseng) <= 1e-14);
  }
}

TEST_CASE("D = 0 corollary step") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto p = make_planted({.n = 12, .m = 5, .with_d = false, .seed = seed});
    StepSizes st{.tau = 0.8, .sigma = 0.0, .epsilon = 0.0};
    st.sigma = 0.9 * (1.0 - st.tau * st.tau * 0.25) / (st.tau * p.spec.l_norm() * p.spec.l_norm());
    CHECK(validate_steps(p.spec, st).valid);
    CHECK(select_step(p.spec) == StepKind::no_cocoercive);
    IterState a = IterState::initial(random_vector(12, seed), random_vector(5, seed + 1));
    IterState b = a;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      a = fpdhf_step(p.spec, st, a);
      b = corollary_d0_step(p.spec, st, b);
      worst = std::max({worst, max_abs_diff(a.x, b.x), max_abs_diff(a.u, b.u)});
    }
    CHECK(worst <= 1e-12);
  }
  SUBCASE("C = 0 as well: primal-dual hybrid gradient") {
    auto p = make_planted({.n = 6, .m = 4, .with_c = false, .with_d = false, .seed = 4});
    const StepSizes st{.tau = 0.5, .sigma = 0.5, .epsilon = 0.0};
    const Vector x = random_vector(6, 1), u = random_vector(4, 2);
    const IterState n = corollary_d0_step(p.spec, st, IterState::initial(x, u));
    const Vector xn = prox_box(-1.0, 1.0, x - st.tau * p.l.transpose() * u);
    const Vector w = u + st.sigma * p.l * (2.0 * xn - x);
    const Vector un = w.cwiseMax(-0.5).cwiseMin(0.5);
    CHECK(max_abs_diff(n.x, xn) <= 1e-15);
    CHECK(max_abs_diff(n.u, un) <= 1e-14);
  }
}

TEST_CASE("operator activations per step") {
  auto counts = std::make_shared<std::array<int, 6>>();
  enum { kC, kD, kL, kLt, kA, kB };
  const Matrix lm = testing::random_matrix(3, 5, 9);
  const Matrix sm = testing::random_skew(5, 4, 0.5);
  ProblemSpec spec{
      .a = ResolventOp(5, 0.0,
                       [counts](double, const Vector& v) {
                         ++(*counts)[kA];
                         return prox_box(-1.0, 1.0, v);
                       }),
      .b = ResolventOp(3, 0.0,
                       [counts](double tau, const Vector& v) {
                         ++(*counts)[kB];
                         return prox_l1(0.5, tau, v);
                       }),
      .l = LinearMap(
          5, 3,
          [counts, lm](const Vector& x) {
            ++(*counts)[kL];
            return Vector(lm * x);
          },
          [counts, lm](const Vector& u) {
            ++(*counts)[kLt];
            return Vector(lm.transpose() * u);
          },
          testing::spectral_norm(lm) * (1 + 1e-12)),
      .c = ForwardOp(5, ForwardKind::lipschitz, 0.5 + 1e-12,
                     [counts, sm](const Vector& x) {
                       ++(*counts)[kC];
                       return Vector(sm * x);
                     }),
      .d = ForwardOp(5, ForwardKind::cocoercive, 1.0,
                     [counts](const Vector& x) {
                       ++(*counts)[kD];
                       return Vector(x);
                     }),
      .primal_dim = 5,
      .dual_dim = 3};
  IterState s = IterState::initial(random_vector(5, 1), random_vector(3, 2));
  for (int k = 1; k <= 7; ++k) {
    s = fpdhf_step(spec, testing::planted_steps(spec), s);
    CHECK((*counts)[kC] == 2 * k);
    CHECK((*counts)[kD] == k);
    CHECK((*counts)[kL] == k);
    CHECK((*counts)[kLt] == k);
    CHECK((*counts)[kA] == k);
    CHECK((*counts)[kB] == k);
  }
}

TEST_CASE("Lyapunov function") {
  auto p = make_planted({.n = 10, .m = 6, .seed = 8});
  const StepSizes st = planted_steps(p.spec);
  REQUIRE(validate_steps(p.spec, st).valid);
  CHECK(fixed_point_residual(p.spec, st, p.oracle.x_star, p.oracle.u_star) <= 1e-10);

  SUBCASE("vanishes at the solution, no cross term without L") {
    const IterState at = IterState::initial(p.oracle.x_star, p.oracle.u_star);
    CHECK(lyapunov_gamma(st, at, p.oracle, &*p.spec.l) == 0.0);
    const IterState s = IterState::initial(random_vector(10, 1), random_vector(6, 2));
    const double plain = (s.x - p.oracle.x_star).squaredNorm() +
                         st.tau / st.sigma * (s.u - p.oracle.u_star).squaredNorm();
    CHECK(lyapunov_gamma(st, s, p.oracle, nullptr) == doctest::Approx(plain).epsilon(1e-15));
  }
  SUBCASE("lower bound on random states") {
    int violations = 0;
    for (std::uint64_t k = 0; k < 1000; ++k) {
      const IterState s = IterState::initial(random_vector(10, 2 * k, 3.0), random_vector(6, 2 * k + 1, 3.0));
      const double g = lyapunov_gamma(st, s, p.oracle, &*p.spec.l);
      const double lb = lyapunov_lower_bound(st, s, p.oracle, p.spec.l_norm());
      if (g < lb - 1e-12 * (1.0 + std::abs(g))) ++violations;
    }
    CHECK(violations == 0);
  }
  SUBCASE("nonincreasing along the iteration") {
    RunCallbacks cb;
    cb.oracle = p.oracle;
    const auto r = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 1000}, cb);
    REQUIRE(r.gamma0.has_value());
    double prev = *r.gamma0;
    int increases = 0;
    for (const auto& rec : r.records) {
      REQUIRE(rec.gamma.has_value());
      if (*rec.gamma > prev + 1e-10 * (1.0 + *r.gamma0)) ++increases;
      prev = *rec.gamma;
    }
    CHECK(increases == 0);
    CHECK(prev < 1e-6 * *r.gamma0);
  }
}

TEST_CASE("convergence with a skew, non-cocoercive C") {
  auto p = make_planted({.n = 10, .m = 6, .seed = 12});
  const StepSizes st = planted_steps(p.spec);
  const auto r = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 100000, .rel_pd_tol = 1e-15});
  CHECK(r.step_kind == StepKind::general);
  CHECK(max_abs_diff(r.final_state.x, p.oracle.x_star) <= 1e-6);

  // Square-summability proxy for ||z_{n+1} - x_n||^2.
  const auto r2 = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 10000});
  double total = 0.0;
  for (const auto& rec : r2.records) total += rec.z_gap_sq;
  CHECK(std::isfinite(total));
  CHECK(r2.records.back().z_gap_sq < 1e-12);
}

TEST_CASE("run bookkeeping") {
  SUBCASE("zero problem stops at iteration 1") {
    const ProblemSpec spec{.a = identity_resolvent(3),
                           .b = std::nullopt,
                           .l = std::nullopt,
                           .c = std::nullopt,
                           .d = std::nullopt,
                           .primal_dim = 3,
                           .dual_dim = 0};
    const auto r = run(spec, {1.0, 1.0, 0.0}, Vector::Zero(3), Vector::Zero(0), {.max_iters = 50});
    CHECK(r.iterations() == 1);
    CHECK(r.termination == Termination::tolerance_met);
    CHECK(r.records[0].dx == 0.0);
    CHECK(r.records[0].du == 0.0);
  }
  SUBCASE("invalid steps are rejected unless overridden") {
    auto p = make_planted({.seed = 2});
    StepSizes st = planted_steps(p.spec);
    st.sigma *= 10.0;
    CHECK_THROWS_AS(run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 5}),
                    ContractViolation);
    CHECK_NOTHROW(run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 5}, {},
                      {.unsafe_steps = true}));
  }
  SUBCASE("divergence is detected") {
    const ProblemSpec spec{.a = identity_resolvent(2),
                           .b = std::nullopt,
                           .l = std::nullopt,
                           .c = std::nullopt,
                           .d = linear_forward_op(identity_map(2), ForwardKind::cocoercive, 1.0),
                           .primal_dim = 2,
                           .dual_dim = 0};
    const auto r = run(spec, {1e10, 1.0, 0.5}, Vector::Ones(2), Vector::Zero(0), {.max_iters = 1000}, {},
                       {.unsafe_steps = true});
    CHECK(r.termination == Termination::divergence_detected);
    CHECK(r.iterations() < 1000);
    CHECK(r.final_state.finite());
  }
  SUBCASE("tolerance stop and fixed-point residual") {
    auto p = make_planted({.seed = 4});
    const StepSizes st = planted_steps(p.spec);
    const auto r = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 100000, .rel_pd_tol = 1e-9});
    CHECK(r.termination == Termination::tolerance_met);
    const double scale = std::sqrt(r.final_state.x.squaredNorm() + r.final_state.u.squaredNorm());
    CHECK(fixed_point_residual(p.spec, st, r.final_state.x, r.final_state.u) <= 1e-9 * scale);
  }
  SUBCASE("operator probes catch a wrong constant") {
    auto p = make_planted({.seed = 2});
    p.spec.c = linear_forward_op(matrix_map(p.s), ForwardKind::lipschitz, 0.1);
    CHECK_THROWS_AS(run(p.spec, planted_steps(p.spec), Vector::Zero(10), Vector::Zero(6), {.max_iters = 1},
                        {}, {.check_operators = true}),
                    ContractViolation);
  }
  SUBCASE("deterministic") {
    auto p = make_planted({.seed = 6});
    const StepSizes st = planted_steps(p.spec);
    const auto a = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 300});
    const auto b = run(p.spec, st, Vector::Zero(10), Vector::Zero(6), {.max_iters = 300});
    CHECK(a.final_state.x == b.final_state.x);
    CHECK(a.final_state.u == b.final_state.u);
  }
}

TEST_CASE("metrics stream") {
  std::ostringstream with, without;
  MetricsCsvWriter a(with), b(without, false);
  IterRecord rec{.iter = 3, .dx = 0.5, .du = 0.25, .rel_pd_err = 0.125, .z_gap_sq = 0.0,
                 .gamma = std::nullopt, .objective = 2.0};
  a.write(rec);
  b.write(rec);
  CHECK(with.str() == "iter,dx,du,rel_pd_err,gamma,objective\n3,0.5,0.25,0.125,,2\n");
  CHECK(without.str() == "iter,dx,du,rel_pd_err,objective\n3,0.5,0.25,0.125,2\n");
}
