#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "multidag/graph_core.hpp"
#include "multidag/group_lasso.hpp"
#include "multidag/types.hpp"

namespace multidag {

// Per-edge classification of a predicted structure against the truth.
struct EdgeCounts {
  int true_positive = 0;   // predicted, exists in the same direction
  int reverse = 0;         // predicted, exists only in the opposite direction
  int false_positive = 0;  // predicted, absent in both directions
  int false_negative = 0;  // true edge predicted in neither direction
  int truth_positive = 0;
};

struct StructureMetrics {
  EdgeCounts counts;
  double fdr = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  int shd = 0;
  int nnz = 0;
};

EdgeCounts classify_edges(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth);

// FDR = (R + FP) / (TP + R + FP), 0 without predictions.
// TPR = TP / truth positives; FPR = FP / truth positives (both 0 when the truth is empty).
// SHD = FN + R + FP; NNZ = TP + R + FP.
StructureMetrics structure_metrics(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth);

// The estimated order is consistent with every true DAG.
bool order_success(const Permutation& order, std::span<const AdjacencyMatrix> truths);

// (p / s) * sqrt(n / (p ln p) * K'^2 / K)
double theta(double n, double num_tasks, double n_identifiable, double p, double s);

// (1/K) sum_k ||est_k - truth_k||_F^2
double frob_error(const WeightStack& estimate, const WeightStack& truth);

struct ReportContext {
  int p = 0;
  int s = 0;
  int num_tasks = 0;
  int n_identifiable = 0;
  int n = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct MetricsReport {
  ReportContext context;
  int task = -1;  // -1 for an aggregate row
  double theta = 0.0;
  bool order_success = false;
  double fdr = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double shd = 0.0;
  double nnz = 0.0;
  double frob_err = 0.0;
};

// One row per task followed by a mean row.
std::vector<MetricsReport> evaluate_tasks(std::span<const AdjacencyMatrix> estimates,
                                          std::span<const AdjacencyMatrix> truths, const Permutation& order,
                                          const ReportContext& context);

}  // namespace multidag
