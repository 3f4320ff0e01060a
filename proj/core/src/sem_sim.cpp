#include "multidag/sem_sim.hpp"

#include <algorithm>
#include <cassert>
#include <random>
#include <string>

#include "multidag/errors.hpp"
#include "multidag/seeding.hpp"

namespace multidag {

namespace {

constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;
constexpr std::uint64_t kTaskStream = 0x7461736bULL;

}  // namespace

void SemModel::validate() const {
  const int n = p();
  if (weights.cols() != n || noise_vars.size() != n || order.size() != n) {
    throw Error(Errc::DimensionMismatch, "SEM model components disagree on p");
  }
  if ((noise_vars.array() <= 0.0).any()) throw Error(Errc::InvalidArgument, "noise variances must be positive");
  if ((weights.diagonal().array() != 0.0).any()) throw Error(Errc::InvalidArgument, "weights have self-loops");
  if (!is_consistent(weights, order)) throw Error(Errc::InconsistentStack, "weights violate the model order");
}

std::vector<AdjacencyMatrix> SemFamily::weight_matrices() const {
  std::vector<AdjacencyMatrix> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(m.weights);
  return out;
}

void SemFamily::validate() const {
  if (n_identifiable < 0 || n_identifiable > num_tasks()) {
    throw Error(Errc::InvalidArgument, "n_identifiable outside [0, K]");
  }
  EdgePattern allowed = EdgePattern::Constant(p(), p(), false);
  for (auto [i, j] : union_support) {
    if (i < 0 || j < 0 || i >= p() || j >= p()) throw Error(Errc::InvalidArgument, "support edge out of range");
    allowed(i, j) = true;
  }
  for (int k = 0; k < num_tasks(); ++k) {
    const auto& m = models[static_cast<std::size_t>(k)];
    m.validate();
    if (m.p() != p()) throw Error(Errc::DimensionMismatch, "model p differs from family p");
    if (!is_consistent(m.weights, shared_order)) {
      throw Error(Errc::InconsistentStack, "model " + std::to_string(k) + " violates the shared order");
    }
    for (int i = 0; i < p(); ++i)
      for (int j = 0; j < p(); ++j)
        if (m.weights(i, j) != 0.0 && !allowed(i, j)) {
          throw Error(Errc::InvalidArgument, "model edge outside the union support");
        }
  }
}

TaskBundle::TaskBundle(std::vector<Matrix> data) : data_(std::move(data)) {
  if (data_.empty()) throw Error(Errc::InvalidArgument, "task bundle needs at least one task");
  p_ = static_cast<int>(data_.front().cols());
  gram_.reserve(data_.size());
  for (std::size_t k = 0; k < data_.size(); ++k) {
    const Matrix& x = data_[k];
    if (x.cols() != p_) {
      throw Error(Errc::DimensionMismatch, "task " + std::to_string(k) + " has " + std::to_string(x.cols()) +
                                               " columns, expected " + std::to_string(p_));
    }
    if (x.rows() < 1) throw Error(Errc::InvalidArgument, "task " + std::to_string(k) + " has no rows");
    Matrix g = Matrix::Zero(p_, p_);
    g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(x.rows()));
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    gram_.push_back(std::move(g));
  }
}

TaskBundle TaskBundle::subset(const std::vector<int>& tasks) const {
  std::vector<Matrix> picked;
  picked.reserve(tasks.size());
  for (int k : tasks) picked.push_back(data(k));
  return TaskBundle(std::move(picked));
}

void FamilyConfig::validate() const {
  const long long max_edges = static_cast<long long>(p) * (p - 1) / 2;
  if (p < 1) throw Error(Errc::InvalidArgument, "p must be >= 1");
  if (s < 0) throw Error(Errc::InvalidArgument, "s must be >= 0");
  if (s > max_edges) {
    throw Error(Errc::InvalidArgument, "s = " + std::to_string(s) + " exceeds the " + std::to_string(max_edges) +
                                           " order-consistent pairs available at p = " + std::to_string(p));
  }
  if (num_tasks < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (n_identifiable < 0 || n_identifiable > num_tasks) throw Error(Errc::InvalidArgument, "K' must lie in [0, K]");
  if (!(weight_lo > 0.0 && weight_lo < weight_hi)) throw Error(Errc::InvalidArgument, "weight range needs 0 < lo < hi");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw Error(Errc::InvalidArgument, "keep_prob must lie in (0, 1]");
  if (!(hetero_var_lo > 0.0 && hetero_var_lo <= hetero_var_hi)) {
    throw Error(Errc::InvalidArgument, "heteroscedastic variance range needs 0 < lo <= hi");
  }
}

SemFamily generate_family(const FamilyConfig& config, Seed seed) {
  config.validate();
  const int p = config.p;

  std::mt19937_64 rng(derive_seed(seed, kOrderStream));
  std::vector<int> nodes(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) nodes[static_cast<std::size_t>(i)] = i;
  std::shuffle(nodes.begin(), nodes.end(), rng);

  SemFamily family;
  family.shared_order = Permutation::from_node_order(nodes);
  family.n_identifiable = config.n_identifiable;

  // Consistent pairs enumerated by position, then a partial Fisher-Yates draw.
  std::vector<Edge> pairs;
  pairs.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(std::max(p - 1, 0)) / 2);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b) pairs.emplace_back(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]);
  for (int e = 0; e < config.s; ++e) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(e), pairs.size() - 1);
    std::swap(pairs[static_cast<std::size_t>(e)], pairs[pick(rng)]);
  }
  family.union_support.assign(pairs.begin(), pairs.begin() + config.s);
  std::sort(family.union_support.begin(), family.union_support.end());

  family.models.reserve(static_cast<std::size_t>(config.num_tasks));
  for (int k = 0; k < config.num_tasks; ++k) {
    std::mt19937_64 task_rng(derive_seed(seed, kTaskStream + static_cast<std::uint64_t>(k)));
    std::bernoulli_distribution keep(config.keep_prob);
    std::uniform_real_distribution<double> magnitude(config.weight_lo, config.weight_hi);
    std::bernoulli_distribution negative(0.5);

    SemModel model;
    model.order = family.shared_order;
    model.weights = AdjacencyMatrix::Zero(p, p);
    for (auto [i, j] : family.union_support) {
      const bool kept = keep(task_rng);
      const double w = magnitude(task_rng);
      const bool neg = negative(task_rng);
      if (kept) model.weights(i, j) = neg ? -w : w;
    }
    model.noise_vars = Vector::Ones(p);
    if (k >= config.n_identifiable) {
      std::uniform_real_distribution<double> var(config.hetero_var_lo, config.hetero_var_hi);
      for (int i = 0; i < p; ++i) model.noise_vars(i) = var(task_rng);
    }
    family.models.push_back(std::move(model));
  }
  return family;
}

Matrix sample_task(const SemModel& model, int n, Seed seed) {
  if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
  const int p = model.p();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x(n, p);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < p; ++c) x(r, c) = normal(rng);
  for (int c = 0; c < p; ++c) x.col(c) *= std::sqrt(model.noise_vars(c));

  // Parents precede children in the order, so each column is final once its
  // parents have been accumulated.
  for (int child : model.order.node_order()) {
    for (int parent = 0; parent < p; ++parent) {
      const double w = model.weights(parent, child);
      if (w == 0.0) continue;
      assert(model.order.rank(parent) < model.order.rank(child));
      x.col(child) += w * x.col(parent);
    }
  }
  return x;
}

TaskBundle sample_data(const SemFamily& family, int n, Seed seed) {
  if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
  std::vector<Matrix> data;
  data.reserve(family.models.size());
  for (int k = 0; k < family.num_tasks(); ++k) {
    data.push_back(sample_task(family.models[static_cast<std::size_t>(k)], n,
                               derive_seed(seed, kTaskStream + static_cast<std::uint64_t>(k))));
  }
  return TaskBundle(std::move(data));
}

Matrix covariance(const SemModel& model) {
  const int p = model.p();
  const Matrix i_minus_g = Matrix::Identity(p, p) - model.weights;
  // inv(I - G) via a triangular-after-permutation system; LU is exact enough at this size.
  const Matrix inv = i_minus_g.partialPivLu().solve(Matrix::Identity(p, p));
  Matrix sigma = inv.transpose() * model.noise_vars.asDiagonal() * inv;
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace multidag
