#pragma once

#include <functional>
#include <string>

#include "fpdhf/linops.hpp"

namespace fpdhf {

/// A maximally rho-monotone operator A, accessed only through its resolvent
/// J_{tau A} = (Id + tau A)^{-1}. The resolvent is single valued as long as
/// tau*rho > -1, which is checked on every call.
class ResolventOp {
 public:
  using Resolve = std::function<Vector(double tau, const Vector& v)>;

  ResolventOp(Index dim, double rho, Resolve resolve, std::string name = {});

  Index dim() const { return dim_; }
  double rho() const { return rho_; }
  const std::string& name() const { return name_; }

  Vector resolve(double tau, const Vector& v) const;

 private:
  Index dim_;
  double rho_;
  Resolve resolve_;
  std::string name_;
};

enum class ForwardKind { lipschitz, cocoercive };

/// Single-valued operator used through forward evaluations. `constant` is
/// the Lipschitz constant zeta for `lipschitz`, the cocoercivity modulus
/// beta for `cocoercive`.
class ForwardOp {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  ForwardOp(Index dim, ForwardKind kind, double constant, Apply apply,
            std::string name = {});

  Index dim() const { return dim_; }
  ForwardKind kind() const { return kind_; }
  double constant() const { return constant_; }
  const std::string& name() const { return name_; }

  Vector apply(const Vector& x) const;

  /// Lipschitz constant implied by the declared constant (1/beta for a
  /// beta-cocoercive operator).
  double lipschitz_constant() const;

 private:
  Index dim_;
  ForwardKind kind_;
  double constant_;
  Apply apply_;
  std::string name_;
};

// -- elementary proximity operators -----------------------------------------

/// prox of tau*weight*||.||_1: componentwise soft threshold at tau*weight.
Vector prox_l1(double weight, double tau, const Vector& v);

/// Projection onto [lo, hi]^n. Independent of the step.
Vector prox_box(double lo, double hi, const Vector& v);

/// Euclidean projection onto the unit simplex {x >= 0, sum x = 1}.
Vector project_simplex(const Vector& v);

/// J_{sigma B^{-1}}(w) computed from B's own resolvent by the Moreau
/// identity w - sigma * J_{B/sigma}(w / sigma). B must be monotone.
Vector resolvent_of_inverse(const ResolventOp& b, double sigma,
                            const Vector& w);

// -- resolvent factories ----------------------------------------------------

/// A = 0, so J_{tau A} = Id.
ResolventOp zero_resolvent(Index dim);
/// A = normal cone of [lo, hi]^dim (subdifferential of the box indicator).
ResolventOp box_resolvent(Index dim, double lo, double hi);
/// A = subdifferential of weight*||.||_1.
ResolventOp l1_resolvent(Index dim, double weight);
/// A = normal cone of the unit simplex.
ResolventOp simplex_resolvent(Index dim);
/// A = subdifferential of (weight/2)||x - center||^2, resolvent in closed form.
ResolventOp quadratic_resolvent(Vector center, double weight);

// -- Huber penalty ------------------------------------------------------------

/// sum_i h(x_i) with h(t) = t^2/(2 delta) for |t| <= delta,
/// |t| - delta/2 otherwise.
double huber_value(double delta, const Vector& x);
/// Componentwise x_i/delta on |x_i| <= delta, sign(x_i) outside. (1/delta)-Lipschitz.
Vector huber_gradient(double delta, const Vector& x);

// -- forward-operator factories --------------------------------------------

/// T*(T x - z), the gradient of 0.5*||T x - z||^2.
Vector quadratic_data_gradient(const LinearMap& t, const Vector& z,
                               const Vector& x);

/// x -> T*(T x - z) as a cocoercive operator with beta = 1/||T||^2.
ForwardOp quadratic_data_op(LinearMap t, Vector z);

/// Linear forward operator; the caller states its kind and constant.
ForwardOp linear_forward_op(LinearMap m, ForwardKind kind, double constant);

/// Gradient of weight * H_delta(W x) for an orthonormal W:
/// weight * W*(grad H_delta(W x)), Lipschitz with constant weight/delta.
ForwardOp huber_analysis_op(LinearMap w, double weight, double delta);

}  // namespace fpdhf
