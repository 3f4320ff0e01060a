#include "multidag/metrics.hpp"

#include <cmath>
#include <string>

#include "multidag/errors.hpp"

namespace multidag {

EdgeCounts classify_edges(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || truth.rows() != truth.cols()) {
    throw Error(Errc::DimensionMismatch, "estimate and truth must be the same square size");
  }
  const auto p = truth.rows();
  EdgeCounts c;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) continue;
      const bool predicted = estimate(i, j) != 0.0;
      const bool present = truth(i, j) != 0.0;
      if (present) {
        ++c.truth_positive;
        if (estimate(i, j) == 0.0 && estimate(j, i) == 0.0) ++c.false_negative;
      }
      if (!predicted) continue;
      if (present) {
        ++c.true_positive;
      } else if (truth(j, i) != 0.0) {
        ++c.reverse;
      } else {
        ++c.false_positive;
      }
    }
  }
  return c;
}

StructureMetrics structure_metrics(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth) {
  StructureMetrics m;
  m.counts = classify_edges(estimate, truth);
  const EdgeCounts& c = m.counts;
  m.nnz = c.true_positive + c.reverse + c.false_positive;
  m.shd = c.false_negative + c.reverse + c.false_positive;
  m.fdr = m.nnz == 0 ? 0.0 : static_cast<double>(c.reverse + c.false_positive) / m.nnz;
  if (c.truth_positive > 0) {
    m.tpr = static_cast<double>(c.true_positive) / c.truth_positive;
    m.fpr = static_cast<double>(c.false_positive) / c.truth_positive;
  }
  return m;
}

bool order_success(const Permutation& order, std::span<const AdjacencyMatrix> truths) {
  for (const auto& t : truths)
    if (!is_consistent(t, order)) return false;
  return true;
}

double theta(double n, double num_tasks, double n_identifiable, double p, double s) {
  if (!(n > 0 && num_tasks > 0 && n_identifiable > 0 && s > 0 && p >= 2)) {
    throw Error(Errc::InvalidArgument, "theta needs positive n, K, K', s and p >= 2");
  }
  return (p / s) * std::sqrt(n / (p * std::log(p)) * n_identifiable * n_identifiable / num_tasks);
}

double frob_error(const WeightStack& estimate, const WeightStack& truth) {
  if (estimate.num_tasks() != truth.num_tasks() || estimate.p() != truth.p()) {
    throw Error(Errc::DimensionMismatch, "weight stacks differ in shape");
  }
  if (truth.num_tasks() == 0) return 0.0;
  double total = 0.0;
  for (int k = 0; k < truth.num_tasks(); ++k) total += (estimate[k] - truth[k]).squaredNorm();
  return total / truth.num_tasks();
}

std::vector<MetricsReport> evaluate_tasks(std::span<const AdjacencyMatrix> estimates,
                                          std::span<const AdjacencyMatrix> truths, const Permutation& order,
                                          const ReportContext& context) {
  if (estimates.size() != truths.size() || truths.empty()) {
    throw Error(Errc::DimensionMismatch, "need one estimate per true task");
  }
  const bool success = order_success(order, truths);
  double th = std::nan("");
  if (context.p >= 2 && context.s > 0 && context.n > 0 && context.n_identifiable > 0) {
    th = theta(context.n, context.num_tasks, context.n_identifiable, context.p, context.s);
  }

  std::vector<MetricsReport> rows;
  MetricsReport mean;
  mean.context = context;
  mean.theta = th;
  mean.order_success = success;
  const double k_count = static_cast<double>(truths.size());
  for (std::size_t k = 0; k < truths.size(); ++k) {
    const StructureMetrics sm = structure_metrics(estimates[k], truths[k]);
    MetricsReport r;
    r.context = context;
    r.task = static_cast<int>(k);
    r.theta = th;
    r.order_success = success;
    r.fdr = sm.fdr;
    r.tpr = sm.tpr;
    r.fpr = sm.fpr;
    r.shd = sm.shd;
    r.nnz = sm.nnz;
    r.frob_err = (estimates[k] - truths[k]).squaredNorm();
    rows.push_back(r);
    mean.fdr += r.fdr / k_count;
    mean.tpr += r.tpr / k_count;
    mean.fpr += r.fpr / k_count;
    mean.shd += r.shd / k_count;
    mean.nnz += r.nnz / k_count;
    mean.frob_err += r.frob_err / k_count;
  }
  rows.push_back(mean);
  return rows;
}

}  // namespace multidag
