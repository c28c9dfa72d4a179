#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fpdhf/problem.hpp"

namespace fpdhf {

/// Primal-dual iterate (x_n, u_n) plus the intermediate quantities of the
/// last step: p = C x_n, z = J_{tau A}(...), q = tau (C z - p).
struct IterState {
  Vector x;
  Vector u;
  Vector p;
  Vector z;
  Vector q;
  long n = 0;

  static IterState initial(Vector x0, Vector u0);
  bool finite() const;
};

// One step of each recursion. The general step works for any combination of
// absent operators; the reductions exist as independent implementations and
// require their operators to be absent.

/// p <- C x;  z <- J_{tau A}(x - tau (L* u + p + D x));  q <- tau (C z - p);
/// u <- J_{sigma B^{-1}}(u + sigma L (2 z - x - q));  x <- z - q.
IterState fpdhf_step(const ProblemSpec& spec, const StepSizes& steps,
                     const IterState& state);

/// C = 0: x <- J_{tau A}(x - tau (L* u + D x)); u <- J_{sigma B^{-1}}(u + sigma L (2 x+ - x)).
IterState condat_vu_step(const ProblemSpec& spec, const StepSizes& steps,
                         const IterState& state);

/// B = 0 and L = 0 (u stays 0): z <- J_{tau A}(x - tau (C x + D x));
/// x <- z - tau (C z - C x).
IterState fbhf_step(const ProblemSpec& spec, const StepSizes& steps,
                    const IterState& state);

/// D = 0: the general step without the cocoercive term.
IterState corollary_d0_step(const ProblemSpec& spec, const StepSizes& steps,
                            const IterState& state);

/// Which recursion `run` uses for a given spec.
enum class StepKind { general, condat_vu, fbhf, no_cocoercive };
StepKind select_step(const ProblemSpec& spec);
std::string to_string(StepKind k);
IterState dispatch_step(const ProblemSpec& spec, const StepSizes& steps,
                        const IterState& state);

struct OracleSolution {
  Vector x_star;
  Vector u_star;
};

/// ||x - x*||^2 + (tau/sigma)||u - u*||^2 - 2 tau <x - x*, L*(u - u*)>.
/// Pass nullptr for L = 0.
double lyapunov_gamma(const StepSizes& steps, const IterState& state,
                      const OracleSolution& oracle, const LinearMap* l);

/// (1 - sigma tau ||L||^2) max{||x - x*||^2, (tau/sigma)||u - u*||^2},
/// a lower bound for lyapunov_gamma.
double lyapunov_lower_bound(const StepSizes& steps, const IterState& state,
                            const OracleSolution& oracle, double l_norm);

/// Fixed-point residual of one dispatched step at (x, u):
/// sqrt(||x+ - x||^2 + ||u+ - u||^2).
double fixed_point_residual(const ProblemSpec& spec, const StepSizes& steps,
                            const Vector& x, const Vector& u);

enum class Termination { max_iters, tolerance_met, divergence_detected };
std::string to_string(Termination t);

struct IterRecord {
  long iter = 0;
  double dx = 0.0;
  double du = 0.0;
  double rel_pd_err = 0.0;
  /// ||z_{n+1} - x_n||^2, summable along the iteration.
  double z_gap_sq = 0.0;
  std::optional<double> gamma;
  std::optional<double> objective;
};

struct RunReport {
  std::vector<IterRecord> records;
  Termination termination = Termination::max_iters;
  StepKind step_kind = StepKind::general;
  IterState final_state;
  std::optional<double> gamma0;
  std::optional<double> objective0;

  long iterations() const { return static_cast<long>(records.size()); }
};

struct StopRule {
  long max_iters = 1000;
  double rel_pd_tol = 0.0;
};

struct RunCallbacks {
  std::function<double(const Vector&)> objective;
  std::optional<OracleSolution> oracle;
  std::function<void(const IterRecord&)> on_iteration;
};

struct RunOptions {
  /// Run even when validate_steps rejects the steps.
  bool unsafe_steps = false;
  /// Probe the declared operator constants before iterating (debug aid).
  bool check_operators = false;
  std::uint64_t probe_seed = 0x5eed;
};

/// sqrt((dx^2 + du^2) / max(||x_n||^2 + ||u_n||^2, tiny)).
double relative_pd_error(const IterState& before, const IterState& after);

/// Iterates dispatch_step until relative_pd_error <= rel_pd_tol or
/// max_iters. Throws ContractViolation when the steps are invalid (unless
/// unsafe_steps) or when a debug probe fails.
RunReport run(const ProblemSpec& spec, const StepSizes& steps, Vector x0,
              Vector u0, const StopRule& stop, const RunCallbacks& callbacks = {},
              const RunOptions& options = {});

/// Streams iteration records as comma-separated values. The header is
/// "iter,dx,du,rel_pd_err,gamma,objective", or without the gamma column
/// when constructed with include_gamma = false. Missing values are empty.
class MetricsCsvWriter {
 public:
  MetricsCsvWriter(std::ostream& out, bool include_gamma = true);
  void write(const IterRecord& rec);

 private:
  std::ostream& out_;
  bool include_gamma_;
};

}  // namespace fpdhf
