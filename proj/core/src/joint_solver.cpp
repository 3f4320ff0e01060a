#include "multidag/joint_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "multidag/errors.hpp"
#include "multidag/seeding.hpp"

namespace multidag {

std::string_view to_string(GradientOptimizer o) noexcept { return o == GradientOptimizer::Adam ? "adam" : "plain"; }

GradientOptimizer parse_gradient_optimizer(std::string_view name) {
  if (name == "adam") return GradientOptimizer::Adam;
  if (name == "plain" || name == "gd") return GradientOptimizer::Plain;
  throw Error(Errc::InvalidArgument, "optimizer '" + std::string(name) + "' (expected adam|plain)");
}

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, what);
  };
  require(rho > 0.0, "rho must be > 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(alpha0 > 0.0, "alpha0 must be > 0");
  require(beta0 >= 0.0, "beta0 must be >= 0");
  require(step > 0.0, "step must be > 0");
  require(delta > 0.0, "delta must be > 0");
  require(tau > 0.0, "tau must be > 0");
  require(outer_iters >= 0, "outer_iters must be >= 0");
  require(inner_iters >= 1, "inner_iters must be >= 1");
  require(tol_h > 0.0, "tol_h must be > 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(edge_threshold >= 0.0, "edge_threshold must be >= 0");
  require(round_tol >= 0.0 && round_tol < 0.5, "round_tol must lie in [0, 0.5)");
  require(order_search_passes >= 0, "order_search_passes must be >= 0");
  require(order_search_tol > 0.0, "order_search_tol must be > 0");
}

double theory_lambda(int p, int n, double c) {
  if (p < 1 || n < 1) throw Error(Errc::InvalidArgument, "theory lambda needs p, n >= 1");
  return c * std::sqrt(static_cast<double>(p) * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

namespace {

void check_shapes(const WeightStack& g, const MaskMatrix& t, const TaskBundle& bundle) {
  if (g.num_tasks() != bundle.num_tasks() || g.p() != bundle.p() || t.rows() != bundle.p() || t.cols() != bundle.p()) {
    throw Error(Errc::DimensionMismatch, "weights, mask and data disagree on K or p");
  }
}

double mask_attraction(const MaskMatrix& t_offdiag) {
  // The diagonal target of one stays unmatched, contributing p.
  return (Matrix::Ones(t_offdiag.rows(), t_offdiag.cols()) - t_offdiag).squaredNorm();
}

// Residual Gram product S_k (I - G_k o T) and the least-squares value.
struct TaskResidual {
  Matrix r;
  double loss;
};

TaskResidual task_residual(const Matrix& gram, const Matrix& g, const MaskMatrix& t_offdiag) {
  const auto p = gram.rows();
  const Matrix i_minus_b = Matrix::Identity(p, p) - g.cwiseProduct(t_offdiag);
  TaskResidual out;
  out.r.noalias() = gram * i_minus_b;
  out.loss = 0.5 * i_minus_b.cwiseProduct(out.r).sum();
  return out;
}

double penalized_objective(const WeightStack& masked, const TaskBundle& bundle, double lambda) {
  const MaskMatrix ones = zero_diagonal(Matrix::Ones(bundle.p(), bundle.p()));
  double total = 0.0;
  for (int k = 0; k < bundle.num_tasks(); ++k) total += task_residual(bundle.gram(k), masked[k], ones).loss;
  return total + lambda * group_norm(masked);
}

WeightStack mask_stack(const WeightStack& g, const MaskMatrix& t) {
  WeightStack out = g;
  const MaskMatrix t0 = zero_diagonal(t);
  for (int k = 0; k < out.num_tasks(); ++k) out[k] = out[k].cwiseProduct(t0);
  return out;
}

class Adam {
 public:
  Adam(int num_tasks, int p, double lr) : lr_(lr), mg_(num_tasks, p), vg_(num_tasks, p) {
    mt_ = Matrix::Zero(p, p);
    vt_ = Matrix::Zero(p, p);
  }

  void step(WeightStack& g, MaskMatrix& t, const WeightStack& dg, const MaskMatrix& dt) {
    ++count_;
    const double c1 = 1.0 - std::pow(kBeta1, count_);
    const double c2 = 1.0 - std::pow(kBeta2, count_);
    auto update = [&](Matrix& x, Matrix& m, Matrix& v, const Matrix& grad) {
      m = kBeta1 * m + (1.0 - kBeta1) * grad;
      v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
      x.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    };
    for (int k = 0; k < g.num_tasks(); ++k) update(g[k], mg_[k], vg_[k], dg[k]);
    update(t, mt_, vt_, dt);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int count_ = 0;
  WeightStack mg_, vg_;
  Matrix mt_, vt_;
};

// Orders nodes by descending mask row sum; used when rounding fails.
Permutation order_by_row_sums(const MaskMatrix& t) {
  const Vector sums = zero_diagonal(t).rowwise().sum();
  std::vector<int> nodes(static_cast<std::size_t>(t.rows()));
  std::iota(nodes.begin(), nodes.end(), 0);
  std::stable_sort(nodes.begin(), nodes.end(), [&](int a, int b) { return sums(a) > sums(b); });
  return Permutation::from_node_order(nodes);
}

// Column fits keyed by (node, parent set). Parent sets that differ from a
// cached one by a single node are screened first: adding a candidate whose
// group gradient is inside the lambda ball, or dropping a parent whose
// coefficients are zero, leaves the solution unchanged.
class ColumnScores {
 public:
  ColumnScores(const TaskBundle& bundle, double lambda, const FixedOrderOptions& options)
      : bundle_(bundle), lambda_(lambda), options_(options) {}

  double operator()(int node, std::vector<int> parents) { return get(node, std::move(parents)).objective; }

  // Score of node on parents + {extra}, using the fit on `parents` when possible.
  double with(int node, std::vector<int> parents, int extra) {
    std::sort(parents.begin(), parents.end());
    std::vector<int> target = parents;
    target.insert(std::lower_bound(target.begin(), target.end(), extra), extra);
    std::string key = key_of(node, target);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second.objective;
    const Entry& base = get(node, parents);
    double norm_sq = 0.0, scale = 1.0;
    for (int k = 0; k < bundle_.num_tasks(); ++k) {
      const Matrix& s = bundle_.gram(k);
      double g = -s(extra, node);
      for (std::size_t r = 0; r < parents.size(); ++r) g += s(extra, parents[r]) * base.coefficients(static_cast<Eigen::Index>(r), k);
      norm_sq += g * g;
      scale = std::max(scale, std::abs(s(extra, node)));
    }
    const double margin = options_.kkt_tol * scale * std::sqrt(static_cast<double>(bundle_.num_tasks()));
    if (std::sqrt(norm_sq) <= lambda_ - margin) {
      Entry grown{Matrix::Zero(static_cast<Eigen::Index>(target.size()), bundle_.num_tasks()), base.objective};
      for (std::size_t r = 0, t = 0; t < target.size(); ++t) {
        if (target[t] == extra) continue;
        grown.coefficients.row(static_cast<Eigen::Index>(t)) = base.coefficients.row(static_cast<Eigen::Index>(r++));
      }
      return cache_.emplace(std::move(key), std::move(grown)).first->second.objective;
    }
    return get(node, std::move(target)).objective;
  }

  // Score of node on parents - {gone}, using the fit on `parents` when possible.
  double without(int node, std::vector<int> parents, int gone) {
    std::sort(parents.begin(), parents.end());
    std::vector<int> target = parents;
    target.erase(std::find(target.begin(), target.end(), gone));
    std::string key = key_of(node, target);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second.objective;
    const Entry& base = get(node, parents);
    const auto row = static_cast<Eigen::Index>(std::find(parents.begin(), parents.end(), gone) - parents.begin());
    if (base.coefficients.row(row).isZero(0.0)) {
      Entry shrunk{Matrix(static_cast<Eigen::Index>(target.size()), bundle_.num_tasks()), base.objective};
      for (Eigen::Index r = 0, t = 0; r < base.coefficients.rows(); ++r)
        if (r != row) shrunk.coefficients.row(t++) = base.coefficients.row(r);
      return cache_.emplace(std::move(key), std::move(shrunk)).first->second.objective;
    }
    return get(node, std::move(target)).objective;
  }

 private:
  struct Entry {
    Matrix coefficients;  // rows follow the sorted parent list
    double objective = 0.0;
  };

  std::string key_of(int node, const std::vector<int>& sorted) const {
    std::string key(static_cast<std::size_t>(bundle_.p()), '0');
    for (int q : sorted) key[static_cast<std::size_t>(q)] = '1';
    return key + ':' + std::to_string(node);
  }

  const Entry& get(int node, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    std::string key = key_of(node, parents);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ColumnFit fit = fit_column(bundle_, node, parents, lambda_, 0.0, options_);
    return cache_.emplace(std::move(key), Entry{std::move(fit.coefficients), fit.objective}).first->second;
  }

  const TaskBundle& bundle_;
  double lambda_;
  FixedOrderOptions options_;
  std::unordered_map<std::string, Entry> cache_;
};

}  // namespace

Permutation refine_order(const TaskBundle& bundle, const Permutation& order, double lambda, int max_passes,
                         const FixedOrderOptions& options) {
  if (order.size() != bundle.p()) throw Error(Errc::DimensionMismatch, "order size does not match data");
  std::vector<int> nodes = order.node_order();
  const int p = bundle.p();
  ColumnScores score(bundle, lambda, options);
  auto prefix = [&](int end) { return std::vector<int>(nodes.begin(), nodes.begin() + end); };

  for (int pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    for (int v = 0; v < p; ++v) {
      const int r = static_cast<int>(std::find(nodes.begin(), nodes.end(), v) - nodes.begin());
      const double base = score(v, prefix(r));
      const double eps = 1e-9 * std::max(1.0, std::abs(base));
      double best = -eps;
      int best_q = r;

      // Move v in front of position q < r: nodes in [q, r) gain v as a
      // candidate parent and v loses them.
      double shift = 0.0;
      for (int q = r - 1; q >= 0; --q) {
        const int w = nodes[static_cast<std::size_t>(q)];
        const std::vector<int> before = prefix(q);
        shift += score.with(w, before, v) - score(w, before);
        const double change = shift + score.without(v, prefix(q + 1), w) - base;
        if (change < best) {
          best = change;
          best_q = q;
        }
      }
      // Move v behind position q > r: nodes in (r, q] lose v and v gains them.
      shift = 0.0;
      std::vector<int> own = prefix(r);
      for (int q = r + 1; q < p; ++q) {
        const int w = nodes[static_cast<std::size_t>(q)];
        const std::vector<int> before = prefix(q);
        shift += score.without(w, before, v) - score(w, before);
        const double change = shift + score.with(v, own, w) - base;
        own.push_back(w);
        if (change < best) {
          best = change;
          best_q = q;
        }
      }
      if (best_q != r) {
        nodes.erase(nodes.begin() + r);
        nodes.insert(nodes.begin() + best_q, v);
        improved = true;
      }
    }
    if (!improved) break;
  }
  return Permutation::from_node_order(nodes);
}

double smooth_objective(const WeightStack& g, const MaskMatrix& t, double beta, double alpha,
                        const TaskBundle& bundle, const Hyperparams& hyper) {
  check_shapes(g, t, bundle);
  const MaskMatrix t0 = zero_diagonal(t);
  double value = 0.0;
  for (int k = 0; k < bundle.num_tasks(); ++k) value += task_residual(bundle.gram(k), g[k], t0).loss;
  const double h = acyclicity(t0, hyper.h_variant);
  return value + hyper.rho * mask_attraction(t0) + beta * h + alpha * h * h;
}

SmoothGradient gradient_f(const WeightStack& g, const MaskMatrix& t, double beta, double alpha,
                          const TaskBundle& bundle, const Hyperparams& hyper) {
  check_shapes(g, t, bundle);
  const int p = bundle.p();
  const MaskMatrix t0 = zero_diagonal(t);

  SmoothGradient out;
  out.d_weights = WeightStack::zeros(bundle.num_tasks(), p);
  out.d_mask = Matrix::Zero(p, p);
  for (int k = 0; k < bundle.num_tasks(); ++k) {
    const TaskResidual res = task_residual(bundle.gram(k), g[k], t0);
    out.value += res.loss;
    out.d_weights[k] = -res.r.cwiseProduct(t0);
    out.d_mask -= res.r.cwiseProduct(g[k]);
  }
  const AcyclicityEval acyc = acyclicity_with_gradient(t0, hyper.h_variant);
  out.h = acyc.value;
  out.value += hyper.rho * mask_attraction(t0) + beta * acyc.value + alpha * acyc.value * acyc.value;
  out.d_mask -= 2.0 * hyper.rho * (Matrix::Ones(p, p) - t0);
  out.d_mask += (beta + 2.0 * alpha * acyc.value) * acyc.gradient;

  out.d_weights.zero_diagonals();
  out.d_mask.diagonal().setZero();
  return out;
}

ExtractedEstimate extract_estimate(const WeightStack& g, const MaskMatrix& t, double edge_threshold,
                                   const TaskBundle& bundle, bool refit, double round_tol) {
  check_shapes(g, t, bundle);
  ExtractedEstimate out{permutation_from_mask(t, round_tol), {}};
  const MaskMatrix allowed = mask_from_permutation(out.order);
  const WeightStack masked = mask_stack(g, t);

  std::vector<EdgePattern> supports;
  supports.reserve(static_cast<std::size_t>(bundle.num_tasks()));
  for (int k = 0; k < bundle.num_tasks(); ++k) {
    supports.push_back(masked[k].array().abs() > edge_threshold && allowed.array() > 0.5);
  }
  if (refit) {
    const WeightStack refitted = ols_refit(bundle, supports);
    out.adjacency = refitted.tasks();
  } else {
    for (int k = 0; k < bundle.num_tasks(); ++k) {
      out.adjacency.push_back(supports[static_cast<std::size_t>(k)].select(masked[k], 0.0));
    }
  }
  return out;
}

EstimationResult fit_joint(const TaskBundle& bundle, const Hyperparams& hyper) {
  hyper.validate();
  const int p = bundle.p();
  const int num_tasks = bundle.num_tasks();

  WeightStack g = WeightStack::zeros(num_tasks, p);
  MaskMatrix t(p, p);
  {
    std::mt19937_64 rng(derive_seed(hyper.seed, 0x6d61736bULL));
    std::uniform_real_distribution<double> init(0.4, 0.6);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) t(i, j) = init(rng);
    t.diagonal().setZero();
  }

  EstimationResult result;
  double beta = hyper.beta0;
  double alpha = hyper.alpha0;
  Adam adam(num_tasks, p, hyper.learning_rate);
  const double shrink = hyper.step * hyper.lambda;

  for (int outer = 0; outer < hyper.outer_iters; ++outer) {
    for (int inner = 0; inner < hyper.inner_iters; ++inner) {
      const SmoothGradient grad = gradient_f(g, t, beta, alpha, bundle, hyper);
      if (!std::isfinite(grad.value)) {
        throw Error(Errc::NonFinite, "objective became non-finite at outer iteration " + std::to_string(outer) +
                                         "; reduce the step size or learning rate");
      }
      if (hyper.optimizer == GradientOptimizer::Adam) {
        adam.step(g, t, grad.d_weights, grad.d_mask);
      } else {
        for (int k = 0; k < num_tasks; ++k) g[k] -= hyper.step * grad.d_weights[k];
        t -= hyper.step * grad.d_mask;
      }
      g.zero_diagonals();
      t.diagonal().setZero();

      // Group soft-threshold of G at t * lambda * |T_ij|, then entrywise
      // soft-threshold of T at t * lambda * ||G_ij||.
      if (shrink > 0.0) {
        const Matrix norms = g.group_norms();
        const Matrix scale = norms.binaryExpr(t, [shrink](double n, double tij) {
          const double c = shrink * std::abs(tij);
          return n > c ? 1.0 - c / n : 0.0;
        });
        for (int k = 0; k < num_tasks; ++k) g[k] = g[k].cwiseProduct(scale);
        const Matrix new_norms = g.group_norms();
        t = t.binaryExpr(new_norms, [shrink](double tij, double n) {
          const double mag = std::abs(tij) - shrink * n;
          return mag > 0.0 ? std::copysign(mag, tij) : 0.0;
        });
      }
    }

    const double h = acyclicity(t, hyper.h_variant);
    IterationRecord rec;
    rec.iteration = outer + 1;
    rec.objective = smooth_objective(g, t, beta, alpha, bundle, hyper) + hyper.lambda * group_norm(mask_stack(g, t));
    rec.h = h;
    rec.beta = beta;
    rec.alpha = alpha;
    if (!std::isfinite(rec.objective) || !g.all_finite() || !t.allFinite()) {
      throw Error(Errc::NonFinite, "objective became non-finite after outer iteration " + std::to_string(outer + 1) +
                                       "; reduce the step size or learning rate");
    }
    result.diagnostics.push_back(rec);
    beta += hyper.tau * h;
    alpha *= 1.0 + hyper.delta;
  }

  result.h_before_projection = acyclicity(t, hyper.h_variant);

  if (hyper.outer_iters == 0) {
    result.weights = mask_stack(g, t);
    result.mask = t;
    result.per_task_adjacency.assign(static_cast<std::size_t>(num_tasks), AdjacencyMatrix::Zero(p, p));
    result.objective = penalized_objective(result.weights, bundle, hyper.lambda);
    result.note = "no outer iterations were run";
    return result;
  }

  if (!hyper.final_projection) {
    result.weights = mask_stack(g, t);
    result.mask = t;
    result.objective = penalized_objective(result.weights, bundle, hyper.lambda);
    try {
      ExtractedEstimate est =
          extract_estimate(g, t, hyper.edge_threshold, bundle, hyper.refit, hyper.round_tol);
      result.order = std::move(est.order);
      result.per_task_adjacency = std::move(est.adjacency);
      result.converged = result.h_before_projection <= hyper.tol_h;
      if (!result.converged) result.note = "h(T) above tolerance";
    } catch (const Error& e) {
      if (e.code() != Errc::RoundingAmbiguous && e.code() != Errc::NotPermutationMask) throw;
      result.note = e.what();
      result.per_task_adjacency.assign(static_cast<std::size_t>(num_tasks), AdjacencyMatrix::Zero(p, p));
    }
    return result;
  }

  bool rounded_cleanly = true;
  Permutation order;
  try {
    order = permutation_from_mask(t, hyper.round_tol);
  } catch (const Error& e) {
    if (e.code() != Errc::RoundingAmbiguous && e.code() != Errc::NotPermutationMask) throw;
    rounded_cleanly = false;
    result.note = e.what();
    order = order_by_row_sums(t);
  }

  if (hyper.order_search_passes > 0) {
    FixedOrderOptions scoring;
    scoring.kkt_tol = hyper.order_search_tol;
    order = refine_order(bundle, order, hyper.lambda, hyper.order_search_passes, scoring);
  }
  const FixedOrderFit polish = fit_fixed_order(bundle, order, hyper.lambda);
  result.mask = mask_from_permutation(order);
  result.weights = polish.weights;
  result.objective = polish.objective;
  ExtractedEstimate est =
      extract_estimate(result.weights, result.mask, hyper.edge_threshold, bundle, hyper.refit, hyper.round_tol);
  result.order = std::move(est.order);
  result.per_task_adjacency = std::move(est.adjacency);
  result.converged = rounded_cleanly && acyclicity(result.mask, hyper.h_variant) <= hyper.tol_h;
  return result;
}

}  // namespace multidag
