#include "fpdhf/probes.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fpdhf/error.hpp"

namespace fpdhf {

namespace {

Vector draw(std::mt19937_64& rng, Index dim, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

Vector random_vector(Index dim, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  return draw(rng, dim, scale);
}

ProbeResult probe_adjoint(const LinearMap& map, int pairs, std::uint64_t seed,
                          double rel_tol) {
  std::mt19937_64 rng(seed);
  ProbeResult r;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw(rng, map.in_dim(), 1.0);
    const Vector u = draw(rng, map.out_dim(), 1.0);
    const Vector lx = map.apply(x);
    const Vector ltu = map.adjoint(u);
    const double scale = lx.norm() * u.norm() + x.norm() * ltu.norm();
    const double err = std::abs(lx.dot(u) - x.dot(ltu)) /
                       std::max(scale, std::numeric_limits<double>::min());
    r.worst = std::max(r.worst, err);
    r.violations += err > rel_tol;
    ++r.probes;
  }
  return r;
}

ProbeResult probe_linearity(const LinearMap& map, int pairs,
                            std::uint64_t seed, double rel_tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  ProbeResult r;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw(rng, map.in_dim(), 1.0);
    const Vector y = draw(rng, map.in_dim(), 1.0);
    const double a = coef(rng), b = coef(rng);
    const Vector lx = map.apply(x), ly = map.apply(y);
    const Vector combo = map.apply(a * x + b * y);
    const double scale = std::abs(a) * lx.norm() + std::abs(b) * ly.norm();
    const double err = (combo - a * lx - b * ly).norm() /
                       std::max(scale, std::numeric_limits<double>::min());
    r.worst = std::max(r.worst, err);
    r.violations += err > rel_tol;
    ++r.probes;
  }
  return r;
}

ProbeResult probe_forward(const ForwardOp& op, int pairs, std::uint64_t seed,
                          double scale, double rel_slack) {
  std::mt19937_64 rng(seed);
  ProbeResult r;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw(rng, op.dim(), scale);
    const Vector y = draw(rng, op.dim(), scale);
    const Vector dt = op.apply(x) - op.apply(y);
    const Vector dx = x - y;
    double ratio;
    if (op.kind() == ForwardKind::lipschitz) {
      // ||Tx - Ty|| <= zeta ||x - y||
      ratio = dt.norm() / (op.constant() * dx.norm());
    } else {
      // beta ||Tx - Ty||^2 <= <x - y, Tx - Ty>
      const double lhs = op.constant() * dt.squaredNorm();
      const double rhs = dx.dot(dt);
      ratio = lhs == 0.0 ? 0.0 : lhs / std::max(rhs, 0.0);
      if (rhs <= 0.0 && lhs > 0.0) ratio = std::numeric_limits<double>::infinity();
    }
    r.worst = std::max(r.worst, ratio);
    r.violations += ratio > 1.0 + rel_slack;
    ++r.probes;
  }
  return r;
}

ProbeResult probe_nonexpansive(const ResolventOp& op, double tau, int pairs,
                               std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  ProbeResult r;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw(rng, op.dim(), scale);
    const Vector y = draw(rng, op.dim(), scale);
    const double ratio =
        (op.resolve(tau, x) - op.resolve(tau, y)).norm() / (x - y).norm();
    r.worst = std::max(r.worst, ratio);
    r.violations += ratio > 1.0 + 1e-12;
    ++r.probes;
  }
  return r;
}

double estimate_lipschitz(const std::function<Vector(const Vector&)>& f,
                          Index dim, int pairs, std::uint64_t seed,
                          double scale) {
  require(dim > 0, "estimate_lipschitz: dimension must be positive");
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw(rng, dim, scale);
    const Vector y = draw(rng, dim, scale);
    worst = std::max(worst, (f(x) - f(y)).norm() / (x - y).norm());
  }
  return worst;
}

}  // namespace fpdhf
