#pragma once

#include <optional>
#include <string>
#include <vector>

#include "multidag/graph_core.hpp"
#include "multidag/group_lasso.hpp"
#include "multidag/sem_sim.hpp"
#include "multidag/types.hpp"

namespace multidag {

enum class GradientOptimizer { Adam, Plain };

std::string_view to_string(GradientOptimizer o) noexcept;
GradientOptimizer parse_gradient_optimizer(std::string_view name);

struct Hyperparams {
  double rho = 1.0;       // weight of ||1 - T||_F^2
  double lambda = 0.01;   // group-norm weight
  double alpha0 = 1e-4;   // initial quadratic-penalty coefficient
  double beta0 = 0.0;     // initial dual variable
  double step = 1e-3;     // prox step t (and the plain-gradient step)
  double delta = 0.6;     // alpha <- alpha * (1 + delta) per outer round
  double tau = 1e-3;      // dual step
  int outer_iters = 40;
  int inner_iters = 300;
  AcyclicityVariant h_variant = AcyclicityVariant::Expm;
  double tol_h = 1e-8;
  Seed seed = 0;

  GradientOptimizer optimizer = GradientOptimizer::Adam;
  double learning_rate = 3e-3;  // Adam only

  // Estimate extraction.
  double edge_threshold = 0.3;
  bool refit = false;
  double round_tol = 1e-3;
  // Round T to the nearest permutation mask and re-solve G under that order.
  bool final_projection = true;
  // Sweeps of single-node-move descent on the fixed-order objective after
  // rounding; 0 keeps the rounded order as is.
  int order_search_passes = 20;
  // Column-solve tolerance used while scoring candidate orders.
  double order_search_tol = 1e-5;

  void validate() const;
};

// lambda = c * sqrt(p ln p / n).
double theory_lambda(int p, int n, double c);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  // f + lambda * group_norm(G o T)
  double h = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
};

struct EstimationResult {
  WeightStack weights;  // masked, G o T
  MaskMatrix mask;
  std::optional<Permutation> order;
  std::vector<AdjacencyMatrix> per_task_adjacency;
  std::vector<IterationRecord> diagnostics;
  bool converged = false;
  double h_before_projection = 0.0;
  double objective = 0.0;  // penalized joint objective of the returned weights
  std::string note;        // why the run did not converge, if it did not
};

// f(G, T; beta) = sum_k (1/2n_k)||X_k - X_k (G_k o T)||_F^2 + rho ||1 - T||_F^2
//                 + beta h(T) + alpha h(T)^2, with diag(T) treated as zero.
double smooth_objective(const WeightStack& g, const MaskMatrix& t, double beta, double alpha,
                        const TaskBundle& bundle, const Hyperparams& hyper);

struct SmoothGradient {
  double value = 0.0;
  double h = 0.0;
  WeightStack d_weights;
  MaskMatrix d_mask;
};

SmoothGradient gradient_f(const WeightStack& g, const MaskMatrix& t, double beta, double alpha,
                          const TaskBundle& bundle, const Hyperparams& hyper);

EstimationResult fit_joint(const TaskBundle& bundle, const Hyperparams& hyper);

// Greedy descent over single-node moves (remove a node, reinsert it at another
// position), scoring each order by the fixed-order group-Lasso objective.
// Stops after `max_passes` sweeps or when a sweep makes no improving move.
Permutation refine_order(const TaskBundle& bundle, const Permutation& order, double lambda, int max_passes,
                         const FixedOrderOptions& options = {});

struct ExtractedEstimate {
  Permutation order;
  std::vector<AdjacencyMatrix> adjacency;
};

// Order from the rounded mask; masked weights thresholded at `edge_threshold`
// and optionally refit by least squares on the surviving support.
ExtractedEstimate extract_estimate(const WeightStack& g, const MaskMatrix& t, double edge_threshold,
                                   const TaskBundle& bundle, bool refit, double round_tol = 1e-3);

}  // namespace multidag
