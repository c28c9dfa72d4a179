#include "fpdhf/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "fpdhf/error.hpp"

namespace fpdhf {

ResolventOp::ResolventOp(Index dim, double rho, Resolve resolve,
                         std::string name)
    : dim_(dim), rho_(rho), resolve_(std::move(resolve)), name_(std::move(name)) {
  require(dim > 0, "ResolventOp: dimension must be positive");
  require(std::isfinite(rho), "ResolventOp: rho must be finite");
}

Vector ResolventOp::resolve(double tau, const Vector& v) const {
  require(tau > 0.0, "resolvent: step must be positive");
  require(tau * rho_ > -1.0,
          "resolvent: tau*rho must exceed -1 for a single-valued resolvent");
  require(v.size() == dim_, "resolvent: dimension mismatch");
  return resolve_(tau, v);
}

ForwardOp::ForwardOp(Index dim, ForwardKind kind, double constant, Apply apply,
                     std::string name)
    : dim_(dim),
      kind_(kind),
      constant_(constant),
      apply_(std::move(apply)),
      name_(std::move(name)) {
  require(dim > 0, "ForwardOp: dimension must be positive");
  require(constant > 0.0 && std::isfinite(constant),
          "ForwardOp: constant must be positive and finite");
}

Vector ForwardOp::apply(const Vector& x) const {
  require(x.size() == dim_, "ForwardOp::apply: dimension mismatch");
  return apply_(x);
}

double ForwardOp::lipschitz_constant() const {
  return kind_ == ForwardKind::lipschitz ? constant_ : 1.0 / constant_;
}

Vector prox_l1(double weight, double tau, const Vector& v) {
  require(std::isfinite(weight) && std::isfinite(tau),
          "prox_l1: weight and step must be finite");
  const double t = tau * weight;
  return v.unaryExpr([t](double a) {
    const double m = std::max(std::abs(a) - t, 0.0);
    return a < 0.0 ? -m : m;
  });
}

Vector prox_box(double lo, double hi, const Vector& v) {
  require(lo <= hi, "prox_box: lo must not exceed hi");
  return v.cwiseMax(lo).cwiseMin(hi);
}

Vector project_simplex(const Vector& v) {
  require(v.size() > 0, "project_simplex: empty vector");
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    cumulative += s[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (s[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

Vector resolvent_of_inverse(const ResolventOp& b, double sigma,
                            const Vector& w) {
  require(sigma > 0.0, "resolvent_of_inverse: sigma must be positive");
  return w - sigma * b.resolve(1.0 / sigma, w / sigma);
}

ResolventOp zero_resolvent(Index dim) {
  return ResolventOp(
      dim, 0.0, [](double, const Vector& v) { return v; }, "zero");
}

ResolventOp box_resolvent(Index dim, double lo, double hi) {
  require(lo <= hi, "box_resolvent: lo must not exceed hi");
  return ResolventOp(
      dim, 0.0,
      [lo, hi](double, const Vector& v) { return prox_box(lo, hi, v); },
      "box");
}

ResolventOp l1_resolvent(Index dim, double weight) {
  require(weight >= 0.0, "l1_resolvent: weight must be nonnegative");
  return ResolventOp(
      dim, 0.0,
      [weight](double tau, const Vector& v) { return prox_l1(weight, tau, v); },
      "l1");
}

ResolventOp simplex_resolvent(Index dim) {
  return ResolventOp(
      dim, 0.0, [](double, const Vector& v) { return project_simplex(v); },
      "simplex");
}

ResolventOp quadratic_resolvent(Vector center, double weight) {
  require(weight >= 0.0, "quadratic_resolvent: weight must be nonnegative");
  const Index dim = center.size();
  // weight-strongly monotone, hence rho = weight.
  return ResolventOp(
      dim, weight,
      [center = std::move(center), weight](double tau, const Vector& v) {
        return Vector((v + tau * weight * center) / (1.0 + tau * weight));
      },
      "quadratic");
}

double huber_value(double delta, const Vector& x) {
  require(delta > 0.0, "huber_value: delta must be positive");
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]);
    total += a > delta ? a - 0.5 * delta : 0.5 * x[i] * x[i] / delta;
  }
  return total;
}

Vector huber_gradient(double delta, const Vector& x) {
  require(delta > 0.0, "huber_gradient: delta must be positive");
  return x.unaryExpr([delta](double t) {
    if (t > delta) return 1.0;
    if (t < -delta) return -1.0;
    return t / delta;
  });
}

Vector quadratic_data_gradient(const LinearMap& t, const Vector& z,
                               const Vector& x) {
  require(z.size() == t.out_dim(),
          "quadratic_data_gradient: observation dimension mismatch");
  require(x.size() == t.in_dim(),
          "quadratic_data_gradient: point dimension mismatch");
  return t.adjoint(t.apply(x) - z);
}

ForwardOp quadratic_data_op(LinearMap t, Vector z) {
  require(z.size() == t.out_dim(),
          "quadratic_data_op: observation dimension mismatch");
  require(t.norm_bound() > 0.0, "quadratic_data_op: zero operator");
  const double beta = 1.0 / (t.norm_bound() * t.norm_bound());
  const Index dim = t.in_dim();
  return ForwardOp(
      dim, ForwardKind::cocoercive, beta,
      [t = std::move(t), z = std::move(z)](const Vector& x) {
        return quadratic_data_gradient(t, z, x);
      },
      "quadratic-data");
}

ForwardOp linear_forward_op(LinearMap m, ForwardKind kind, double constant) {
  require(m.in_dim() == m.out_dim(), "linear_forward_op: map must be square");
  const Index dim = m.in_dim();
  return ForwardOp(
      dim, kind, constant,
      [m = std::move(m)](const Vector& x) { return m.apply(x); }, "linear");
}

ForwardOp huber_analysis_op(LinearMap w, double weight, double delta) {
  require(delta > 0.0 && weight > 0.0,
          "huber_analysis_op: weight and delta must be positive");
  require(w.in_dim() == w.out_dim(), "huber_analysis_op: W must be square");
  const Index dim = w.in_dim();
  return ForwardOp(
      dim, ForwardKind::lipschitz, weight / delta,
      [w = std::move(w), weight, delta](const Vector& x) -> Vector {
        return weight * w.adjoint(huber_gradient(delta, w.apply(x)));
      },
      "huber-analysis");
}

}  // namespace fpdhf
