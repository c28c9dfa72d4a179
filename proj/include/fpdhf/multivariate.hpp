#pragma once

#include <optional>
#include <vector>

#include "fpdhf/solver.hpp"

namespace fpdhf {

/// Block sizes of a product space; flattening concatenates blocks in order.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<Index> dims);

  std::size_t blocks() const { return dims_.size(); }
  Index dim(std::size_t i) const { return dims_[i]; }
  Index offset(std::size_t i) const { return offsets_[i]; }
  Index total_dim() const { return total_; }

  Vector concat(const std::vector<Vector>& parts) const;
  std::vector<Vector> split(const Vector& flat) const;

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

/// System of coupled inclusions over primal blocks i and dual blocks k:
///
///   0 in A_i x_i + sum_k L_{i,k}* B_k(sum_j L_{j,k} x_j) + D_i x_i + C_i(x).
///
/// couplings[i][k] is L_{i,k}: H_i -> G_k, or empty for a zero block.
/// cocoercive[i] is D_i or empty. `lipschitz` is C on the whole product
/// space, or empty.
struct BlockProblem {
  std::vector<ResolventOp> primal;
  std::vector<ResolventOp> dual;
  std::vector<std::vector<std::optional<LinearMap>>> couplings;
  std::vector<std::optional<ForwardOp>> cocoercive;
  std::optional<ForwardOp> lipschitz;

  BlockLayout primal_layout() const;
  BlockLayout dual_layout() const;
  void validate() const;
  /// min_i beta_i over the present D_i; nullopt when all are absent.
  std::optional<double> beta() const;
};

/// sum_k (sum_i ||L_{i,k}||)^2 from the certified bounds; ||L x||^2 <= ell ||x||^2.
double ell_bound(const BlockProblem& problem);

/// Product-space ProblemSpec: blockwise resolvents, stacked L with
/// ||L|| <= sqrt(ell), blockwise D with beta = min beta_i, the coupled C.
ProblemSpec assemble(const BlockProblem& problem);

/// Step-size constants with ell in place of ||L||^2.
StepConstants block_step_constants(const BlockProblem& problem);

struct BlockState {
  std::vector<Vector> x;
  std::vector<Vector> u;
};

/// One step of the block recursion written out per block: p_i, z_i, q_i for
/// every primal block, then u_k from sum_i L_{i,k}(2 z_i - x_i - q_i).
BlockState multivariate_step(const BlockProblem& problem, const StepSizes& steps,
                             const BlockState& state);

/// Validates with ell and beta = min beta_i, then runs the solver on the
/// assembled problem.
RunReport run_multivariate(const BlockProblem& problem, const StepSizes& steps,
                           const BlockState& init, const StopRule& stop,
                           const RunCallbacks& callbacks = {},
                           const RunOptions& options = {});

}  // namespace fpdhf
