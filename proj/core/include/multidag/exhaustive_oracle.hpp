#pragma once

#include "multidag/graph_core.hpp"
#include "multidag/group_lasso.hpp"
#include "multidag/sem_sim.hpp"

namespace multidag {

struct ExhaustiveFit {
  Permutation order;
  WeightStack weights;
  double objective = 0.0;
  long long permutations_evaluated = 0;
};

// Minimizes the penalized joint likelihood over every order by solving the
// fixed-order group Lasso for each of the p! permutations. Ties go to the
// lexicographically smallest rank sequence. Refuses p > max_p.
ExhaustiveFit fit_exhaustive(const TaskBundle& bundle, double lambda, int max_p = 6, int threads = 1,
                             const FixedOrderOptions& options = {});

// sum_k (1/2n_k)||X_k - X_k G_k||_F^2 + lambda * group_norm(G), evaluated on the
// raw data. Throws InconsistentStack if some G_k violates the order.
double objective_at(const TaskBundle& bundle, const Permutation& order, const WeightStack& g, double lambda);

}  // namespace multidag
