#pragma once

#include <utility>
#include <vector>

#include "multidag/graph_core.hpp"
#include "multidag/types.hpp"

namespace multidag {

// One Gaussian linear SEM x = G^T x + w, w ~ N(0, diag(noise_vars)).
struct SemModel {
  AdjacencyMatrix weights;
  Vector noise_vars;
  Permutation order;

  int p() const noexcept { return static_cast<int>(weights.rows()); }
  void validate() const;
};

using Edge = std::pair<int, int>;

// K models sharing one causal order and one union support S_0. The first
// n_identifiable models have unit noise variance on every node.
struct SemFamily {
  std::vector<SemModel> models;
  Permutation shared_order;
  std::vector<Edge> union_support;
  int n_identifiable = 0;

  int p() const noexcept { return shared_order.size(); }
  int num_tasks() const noexcept { return static_cast<int>(models.size()); }
  std::vector<AdjacencyMatrix> weight_matrices() const;
  void validate() const;
};

// K observation matrices, each n_k x p. Scaled Gram matrices X^T X / n_k are
// computed once at construction.
class TaskBundle {
 public:
  TaskBundle() = default;
  explicit TaskBundle(std::vector<Matrix> data);

  int p() const noexcept { return p_; }
  int num_tasks() const noexcept { return static_cast<int>(data_.size()); }
  int n(int k) const { return static_cast<int>(data_.at(static_cast<std::size_t>(k)).rows()); }
  const Matrix& data(int k) const { return data_.at(static_cast<std::size_t>(k)); }
  const Matrix& gram(int k) const { return gram_.at(static_cast<std::size_t>(k)); }
  const std::vector<Matrix>& all_data() const noexcept { return data_; }

  // Restriction to a subset of tasks, in the given order.
  TaskBundle subset(const std::vector<int>& tasks) const;

 private:
  std::vector<Matrix> data_;
  std::vector<Matrix> gram_;
  int p_ = 0;
};

struct FamilyConfig {
  int p = 0;
  int s = 0;
  int num_tasks = 1;
  int n_identifiable = 1;
  double weight_lo = 0.5;
  double weight_hi = 2.0;
  double keep_prob = 0.9;
  // Per-node variance range for tasks beyond n_identifiable.
  double hetero_var_lo = 0.5;
  double hetero_var_hi = 2.0;

  void validate() const;
};

// Samples a shared order uniformly, a union support uniformly among the
// order-consistent pairs, then per-task supports by independent Bernoulli
// retention and weights uniform on +-[lo, hi]. Task k draws from a stream
// derived from (seed, k), so the first tasks of a larger family coincide with
// those of a smaller one built from the same seed.
SemFamily generate_family(const FamilyConfig& config, Seed seed);

// n rows per task by ancestral sampling in the shared order.
TaskBundle sample_data(const SemFamily& family, int n, Seed seed);
Matrix sample_task(const SemModel& model, int n, Seed seed);

// (I - G)^{-T} Omega (I - G)^{-1}.
Matrix covariance(const SemModel& model);

}  // namespace multidag
