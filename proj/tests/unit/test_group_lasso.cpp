#include "doctest.h"

#include <random>

#include "multidag/errors.hpp"
#include "multidag/group_lasso.hpp"
#include "multidag/sem_sim.hpp"
#include "../support/oracles.hpp"

using namespace multidag;

namespace {

TaskBundle simulated(int p, int s, int k, int n, Seed seed, double keep = 0.9) {
  FamilyConfig c;
  c.p = p;
  c.s = s;
  c.num_tasks = k;
  c.n_identifiable = k;
  c.keep_prob = keep;
  return sample_data(generate_family(c, seed), n, seed + 100);
}

std::vector<int> predecessors(const Permutation& pi, int j) {
  std::vector<int> out;
  for (int i = 0; i < pi.size(); ++i)
    if (pi.rank(i) < pi.rank(j)) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("group_norm") {
  CHECK(group_norm(WeightStack::zeros(3, 4)) == 0.0);
  std::mt19937_64 rng(2);
  WeightStack one({oracle::random_matrix(4, 4, rng)});
  CHECK(group_norm(one) == doctest::Approx(one[0].cwiseAbs().sum()));
  WeightStack two = WeightStack::zeros(2, 3);
  two[0](0, 1) = 3.0;
  two[1](0, 1) = 4.0;
  CHECK(group_norm(two) == doctest::Approx(5.0));
}

TEST_CASE("prox_group") {
  std::mt19937_64 rng(4);
  WeightStack v({oracle::random_matrix(4, 4, rng), oracle::random_matrix(4, 4, rng)});
  CHECK(prox_group(v, 0.0) == v);
  CHECK_THROWS_AS(prox_group(v, -1.0), Error);

  WeightStack small = WeightStack::zeros(2, 2);
  small[0](0, 1) = 0.1;
  small[1](0, 1) = 0.2;
  CHECK(prox_group(small, 0.3)[0].isZero());

  const WeightStack out = prox_group(v, 0.3);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const Vector group = (Vector(2) << v[0](i, j), v[1](i, j)).finished();
      const Vector expected = oracle::prox_group_1d(group, 0.3);
      CHECK(std::abs(out[0](i, j) - expected(0)) < 1e-12);
      CHECK(std::abs(out[1](i, j) - expected(1)) < 1e-12);
    }
  }
}

TEST_CASE("fit_fixed_order: null solution above the threshold") {
  const TaskBundle bundle = simulated(5, 6, 2, 200, 3);
  const Permutation pi = Permutation::identity(5);
  double lambda_max = 0.0;
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 5; ++i) {
      if (i == j) continue;
      double sq = 0.0;
      for (int k = 0; k < 2; ++k) sq += std::pow(bundle.gram(k)(i, j), 2);
      lambda_max = std::max(lambda_max, std::sqrt(sq));
    }
  }
  const FixedOrderFit fit = fit_fixed_order(bundle, pi, lambda_max * 1.0001);
  for (int k = 0; k < 2; ++k) CHECK(fit.weights[k].isZero());
}

TEST_CASE("fit_fixed_order: lambda 0 reduces to least squares") {
  const TaskBundle bundle = simulated(5, 7, 1, 2000, 8);
  std::vector<int> nodes{3, 0, 4, 1, 2};
  const Permutation pi = Permutation::from_node_order(nodes);
  FixedOrderOptions tight;
  tight.kkt_tol = 1e-13;
  tight.max_iter = 200000;
  const FixedOrderFit fit = fit_fixed_order(bundle, pi, 0.0, tight);
  for (int j = 0; j < 5; ++j) {
    const std::vector<int> parents = predecessors(pi, j);
    const Vector b = oracle::least_squares(bundle.data(0), bundle.data(0).col(j), parents);
    for (std::size_t r = 0; r < parents.size(); ++r) CHECK(std::abs(fit.weights[0](parents[r], j) - b(r)) < 1e-6);
  }
}

TEST_CASE("fit_fixed_order: identical tasks give identical solutions") {
  const TaskBundle one = simulated(5, 6, 1, 150, 12);
  const TaskBundle twice({one.data(0), one.data(0)});
  const FixedOrderFit fit = fit_fixed_order(twice, Permutation::identity(5), 0.05);
  CHECK(fit.weights[0] == fit.weights[1]);
  CHECK(fit.weights[0].diagonal().isZero());
  CHECK(is_consistent(fit.weights[0], Permutation::identity(5)));
}

TEST_CASE("fit_fixed_order: KKT conditions and the l1 oracle") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    const int k = 1 + rep % 3;
    const TaskBundle bundle = simulated(6, 8, k, 120, 500 + rep);
    std::vector<int> nodes(6);
    std::iota(nodes.begin(), nodes.end(), 0);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const Permutation pi = Permutation::from_node_order(nodes);
    const double lambda = 0.02 + 0.05 * rep / 10.0;
    const FixedOrderFit fit = fit_fixed_order(bundle, pi, lambda);
    CHECK(oracle::kkt_violation(bundle, pi, fit.weights, lambda) < 1e-4);
    CHECK(fit.objective == doctest::Approx(oracle::joint_objective(bundle, fit.weights, lambda)).epsilon(1e-10));

    if (k == 1) {
      WeightStack cd = WeightStack::zeros(1, 6);
      for (int j = 0; j < 6; ++j) {
        const std::vector<int> parents = predecessors(pi, j);
        if (parents.empty()) continue;
        Matrix sub(bundle.n(0), static_cast<Eigen::Index>(parents.size()));
        for (std::size_t r = 0; r < parents.size(); ++r) sub.col(static_cast<Eigen::Index>(r)) = bundle.data(0).col(parents[r]);
        const Vector b = oracle::lasso_cd(sub, bundle.data(0).col(j), lambda);
        for (std::size_t r = 0; r < parents.size(); ++r) cd[0](parents[r], j) = b(static_cast<Eigen::Index>(r));
      }
      CHECK(std::abs(fit.objective - oracle::joint_objective(bundle, cd, lambda)) < 1e-6);
    }
  }
}

TEST_CASE("fit_column agrees with fit_fixed_order") {
  const TaskBundle bundle = simulated(5, 6, 3, 100, 31);
  const Permutation pi = Permutation::identity(5);
  const FixedOrderFit fit = fit_fixed_order(bundle, pi, 0.04);
  double total = 0.0;
  for (int j = 0; j < 5; ++j) {
    const std::vector<int> parents = predecessors(pi, j);
    total += fit_column(bundle, j, parents, 0.04, 0.0).objective;
  }
  CHECK(total == doctest::Approx(fit.objective).epsilon(1e-12));
}

TEST_CASE("fit_fixed_order rejects bad input") {
  const TaskBundle bundle = simulated(4, 3, 1, 30, 1);
  CHECK_THROWS_AS(fit_fixed_order(bundle, Permutation::identity(3), 0.1), Error);
  CHECK_THROWS_AS(fit_fixed_order(bundle, Permutation::identity(4), -0.1), Error);
}

TEST_CASE("ols_refit") {
  const TaskBundle bundle = simulated(4, 4, 2, 50, 2);
  const std::vector<EdgePattern> empty(2, EdgePattern::Constant(4, 4, false));
  const WeightStack zero = ols_refit(bundle, empty);
  CHECK(zero[0].isZero());
  CHECK(zero[1].isZero());

  FamilyConfig c;
  c.p = 5;
  c.s = 6;
  c.num_tasks = 1;
  c.n_identifiable = 1;
  c.keep_prob = 1.0;
  const SemFamily fam = generate_family(c, 40);
  const int n = 100000;
  const TaskBundle big = sample_data(fam, n, 41);
  const AdjacencyMatrix truth = fam.models[0].weights;
  const std::vector<EdgePattern> support{truth.array() != 0.0};
  const WeightStack refit = ols_refit(big, support);
  CHECK((refit[0] - truth).cwiseAbs().maxCoeff() < 0.02);

  const Matrix resid = big.data(0) - big.data(0) * refit[0];
  for (int j = 0; j < 5; ++j) {
    const double var = resid.col(j).squaredNorm() / n;
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
  }

  std::vector<EdgePattern> too_many{EdgePattern::Constant(4, 4, false)};
  too_many[0].col(3).setConstant(true);
  too_many[0](3, 3) = false;
  std::mt19937_64 rng(0);
  const TaskBundle tiny({oracle::random_matrix(2, 4, rng)});
  try {
    ols_refit(tiny, too_many);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RankDeficient);
  }
}
