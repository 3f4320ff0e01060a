#include "multidag/exhaustive_oracle.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "multidag/errors.hpp"

namespace multidag {

double objective_at(const TaskBundle& bundle, const Permutation& order, const WeightStack& g, double lambda) {
  if (g.num_tasks() != bundle.num_tasks() || g.p() != bundle.p() || order.size() != bundle.p()) {
    throw Error(Errc::DimensionMismatch, "weights, order and data disagree on K or p");
  }
  double total = 0.0;
  for (int k = 0; k < bundle.num_tasks(); ++k) {
    if (!is_consistent(g[k], order)) {
      throw Error(Errc::InconsistentStack, "task " + std::to_string(k) + " weights violate the order");
    }
    const Matrix& x = bundle.data(k);
    total += (x - x * g[k]).squaredNorm() / (2.0 * static_cast<double>(x.rows()));
  }
  return total + lambda * group_norm(g);
}

ExhaustiveFit fit_exhaustive(const TaskBundle& bundle, double lambda, int max_p, int threads,
                             const FixedOrderOptions& options) {
  const int p = bundle.p();
  if (p > max_p) {
    throw Error(Errc::DimensionTooLarge, "exhaustive search over p = " + std::to_string(p) +
                                             " exceeds the limit max_p = " + std::to_string(max_p));
  }

  // Rank sequences in lexicographic order.
  std::vector<std::vector<int>> all;
  std::vector<int> ranks(static_cast<std::size_t>(p));
  std::iota(ranks.begin(), ranks.end(), 0);
  do {
    all.push_back(ranks);
  } while (std::next_permutation(ranks.begin(), ranks.end()));

  const std::size_t count = all.size();
  std::vector<double> objectives(count, std::numeric_limits<double>::infinity());
  auto evaluate = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < count; i += stride) {
      objectives[i] = fit_fixed_order(bundle, Permutation(all[i]), lambda, options).objective;
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, count);
  if (workers == 1) {
    evaluate(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(evaluate, w, workers);
    for (auto& th : pool) th.join();
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i)
    if (objectives[i] < objectives[best]) best = i;

  ExhaustiveFit out;
  out.order = Permutation(all[best]);
  FixedOrderFit fit = fit_fixed_order(bundle, out.order, lambda, options);
  out.weights = std::move(fit.weights);
  out.objective = fit.objective;
  out.permutations_evaluated = static_cast<long long>(count);
  return out;
}

}  // namespace multidag
