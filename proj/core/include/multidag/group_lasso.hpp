#pragma once

#include <span>
#include <vector>

#include "multidag/graph_core.hpp"
#include "multidag/sem_sim.hpp"
#include "multidag/types.hpp"

namespace multidag {

// K p x p matrices; group (i, j) is the K-vector of entry (i, j) across tasks.
class WeightStack {
 public:
  WeightStack() = default;
  WeightStack(int num_tasks, int p);
  explicit WeightStack(std::vector<Matrix> tasks);

  static WeightStack zeros(int num_tasks, int p) { return WeightStack(num_tasks, p); }

  int num_tasks() const noexcept { return static_cast<int>(tasks_.size()); }
  int p() const noexcept { return p_; }

  Matrix& operator[](int k) { return tasks_[static_cast<std::size_t>(k)]; }
  const Matrix& operator[](int k) const { return tasks_[static_cast<std::size_t>(k)]; }
  const std::vector<Matrix>& tasks() const noexcept { return tasks_; }

  // p x p matrix of per-group Euclidean norms.
  Matrix group_norms() const;
  double squared_norm() const;
  void zero_diagonals();
  bool all_finite() const;

  friend bool operator==(const WeightStack& a, const WeightStack& b) { return a.tasks_ == b.tasks_; }

 private:
  std::vector<Matrix> tasks_;
  int p_ = 0;
};

// Sum over (i, j) of the Euclidean norm of the K-vector at (i, j).
double group_norm(const WeightStack& g);

// Group-wise soft threshold: V_ij * max(0, 1 - c / ||V_ij||).
WeightStack prox_group(const WeightStack& v, double c);

struct FixedOrderOptions {
  // Stop once the gradient mapping L * |B - prox(B - grad / L)| falls below
  // kkt_tol * max(1, max_i |X_i^T X_j| / n).
  double kkt_tol = 1e-8;
  int max_iter = 20000;
  int power_iterations = 20;
};

struct FixedOrderFit {
  WeightStack weights;
  // sum_k (1/2n_k)||X_k - X_k G_k||_F^2 + lambda * group_norm(G)
  double objective = 0.0;
  // Largest iteration count over the p column subproblems.
  int iterations = 0;
  bool converged = true;
};

// Multi-task group Lasso with predictors restricted to {i : rank(i) < rank(j)}
// for every column j. Columns are independent problems solved by accelerated
// proximal gradient with adaptive restart and backtracking.
FixedOrderFit fit_fixed_order(const TaskBundle& bundle, const Permutation& order, double lambda,
                              const FixedOrderOptions& options = {});

struct ColumnFit {
  Matrix coefficients;  // predictors x K
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

// One column of the fixed-order problem: column j regressed on `predictors`
// in every task. `lipschitz` is an initial step-size bound; pass 0 to estimate
// it from the restricted Gram matrices. Backtracking enlarges it as needed.
ColumnFit fit_column(const TaskBundle& bundle, int j, std::span<const int> predictors, double lambda,
                     double lipschitz, const FixedOrderOptions& options = {});

// Unpenalized least squares per task and column on the given parent sets.
// Throws RankDeficient when a restricted Gram matrix is numerically singular.
WeightStack ols_refit(const TaskBundle& bundle, std::span<const EdgePattern> supports);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_norm(const Matrix& gram, int iterations);

}  // namespace multidag
