#pragma once

#include <functional>
#include <optional>

#include "fpdhf/solver.hpp"

namespace fpdhf {

/// min_x max_y  f1(x) + f2(L1 x) + f3(x) + Psi(x, y) - g1(y) - g2(L2 y) - g3(y)
///
/// f1, g1 (and f2, g2 on the dual spaces) enter through the resolvents of
/// their subdifferentials, i.e. their proximity operators. f3, g3 enter
/// through cocoercive gradients with moduli beta1, beta2. Psi is
/// convex-concave with a jointly zeta-Lipschitz gradient; leaving
/// grad_x_psi empty means Psi = 0.
struct SaddleProblem {
  using PartialGradient = std::function<Vector(const Vector& x, const Vector& y)>;

  ResolventOp f1;
  ResolventOp g1;
  std::optional<ResolventOp> f2;
  std::optional<ResolventOp> g2;
  std::optional<LinearMap> l1;
  std::optional<LinearMap> l2;
  std::optional<ForwardOp> grad_f3;
  std::optional<ForwardOp> grad_g3;
  PartialGradient grad_x_psi;
  PartialGradient grad_y_psi;
  double zeta = 0.0;

  Index x_dim() const { return f1.dim(); }
  Index y_dim() const { return g1.dim(); }
  bool has_psi() const { return static_cast<bool>(grad_x_psi); }
  void validate() const;
};

/// Operator quintuple on H1 + H2 (primal) and G1 + G2 (dual):
/// A = df1 x dg1, B = df2 x dg2, L = L1 (+) L2 with bound max(|L1|, |L2|),
/// D = (grad f3, grad g3) with beta = min(beta1, beta2),
/// C = (grad_x Psi, -grad_y Psi) with the supplied zeta (absent if Psi = 0).
/// A dual track is present when both its prox and its map are given.
ProblemSpec build_saddle_spec(const SaddleProblem& sp);

/// Bilinear coupling Psi(x, y) = <M x, y>: grad_x = M^T y, grad_y = M x,
/// zeta = ||M||. Fills the Psi fields of `sp`.
void set_bilinear_psi(SaddleProblem& sp, const Matrix& m);

struct SaddleState {
  Vector x, y;  // primal tracks
  Vector u, v;  // dual tracks (empty when the track is absent)
};

/// One step of the two-track recurrence, evaluated separately on each track.
SaddleState saddle_step(const SaddleProblem& sp, const StepSizes& steps,
                        const SaddleState& state);

struct SaddleRun {
  RunReport report;
  SaddleState final_state;
};

/// Validates with beta = min(beta1, beta2), |L| = max(|L1|, |L2|) and runs
/// the two-track recurrence. Record layout and stopping rule match `run`.
SaddleRun run_saddle(const SaddleProblem& sp, const StepSizes& steps,
                     const SaddleState& init, const StopRule& stop,
                     const RunOptions& options = {});

}  // namespace fpdhf
