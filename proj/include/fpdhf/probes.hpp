#pragma once

#include <cstdint>
#include <functional>

#include "fpdhf/linops.hpp"
#include "fpdhf/prox.hpp"

namespace fpdhf {

// Randomized checks of operator contracts. They are cheap enough for tests
// and for opt-in debug runs, but are never run on the solver's hot path.

struct ProbeResult {
  int probes = 0;
  int violations = 0;
  /// Largest observed value of the checked quantity (relative error, or the
  /// ratio observed/declared for constant checks).
  double worst = 0.0;
};

/// |<Lx,u> - <x,L*u>| relative to ||Lx||*||u|| + ||x||*||L*u||.
ProbeResult probe_adjoint(const LinearMap& map, int pairs, std::uint64_t seed,
                          double rel_tol = 1e-10);

/// ||L(a x + b y) - a Lx - b Ly|| relative to |a|*||Lx|| + |b|*||Ly||.
ProbeResult probe_linearity(const LinearMap& map, int pairs,
                            std::uint64_t seed, double rel_tol = 1e-10);

/// Checks the declared Lipschitz or cocoercivity constant on random pairs,
/// allowing rel_slack. Points are drawn with standard deviation `scale`.
ProbeResult probe_forward(const ForwardOp& op, int pairs, std::uint64_t seed,
                          double scale = 1.0, double rel_slack = 1e-10);

/// ||J x - J y|| <= ||x - y|| for a monotone operator's resolvent.
ProbeResult probe_nonexpansive(const ResolventOp& op, double tau, int pairs,
                               std::uint64_t seed, double scale = 1.0);

/// Largest ||F x - F y|| / ||x - y|| seen on random pairs.
double estimate_lipschitz(const std::function<Vector(const Vector&)>& f,
                          Index dim, int pairs, std::uint64_t seed,
                          double scale = 1.0);

/// Standard normal vector from a seeded engine state.
Vector random_vector(Index dim, std::uint64_t seed, double scale = 1.0);

}  // namespace fpdhf
