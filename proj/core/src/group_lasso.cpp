#include "multidag/group_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "multidag/errors.hpp"

namespace multidag {

WeightStack::WeightStack(int num_tasks, int p) : p_(p) {
  if (num_tasks < 0 || p < 0) throw Error(Errc::InvalidArgument, "negative weight stack dimensions");
  tasks_.assign(static_cast<std::size_t>(num_tasks), Matrix::Zero(p, p));
}

WeightStack::WeightStack(std::vector<Matrix> tasks) : tasks_(std::move(tasks)) {
  p_ = tasks_.empty() ? 0 : static_cast<int>(tasks_.front().rows());
  for (const auto& m : tasks_) {
    if (m.rows() != p_ || m.cols() != p_) throw Error(Errc::DimensionMismatch, "weight stack matrices must all be p x p");
  }
}

Matrix WeightStack::group_norms() const {
  Matrix acc = Matrix::Zero(p_, p_);
  for (const auto& m : tasks_) acc += m.cwiseAbs2();
  return acc.cwiseSqrt();
}

double WeightStack::squared_norm() const {
  double s = 0.0;
  for (const auto& m : tasks_) s += m.squaredNorm();
  return s;
}

void WeightStack::zero_diagonals() {
  for (auto& m : tasks_) m.diagonal().setZero();
}

bool WeightStack::all_finite() const {
  return std::all_of(tasks_.begin(), tasks_.end(), [](const Matrix& m) { return m.allFinite(); });
}

double group_norm(const WeightStack& g) { return g.group_norms().sum(); }

WeightStack prox_group(const WeightStack& v, double c) {
  if (c < 0.0) throw Error(Errc::InvalidArgument, "prox threshold must be non-negative");
  WeightStack out = v;
  if (c == 0.0) return out;
  const Matrix norms = v.group_norms();
  const Matrix scale = norms.unaryExpr([c](double n) { return n > c ? 1.0 - c / n : 0.0; });
  for (int k = 0; k < out.num_tasks(); ++k) out[k] = out[k].cwiseProduct(scale);
  return out;
}

double power_iteration_norm(const Matrix& gram, int iterations) {
  const auto m = gram.rows();
  if (m == 0) return 0.0;
  Vector v = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
  double estimate = 0.0;
  for (int it = 0; it < std::max(iterations, 1); ++it) {
    Vector w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    estimate = v.dot(w);
    v = w / norm;
  }
  return std::max(estimate, (gram * v).norm());
}

namespace {

// One column of the fixed-order problem: regress column j on `predictors`
// jointly across tasks. B is m x K; column k holds task k's coefficients.
class ColumnProblem {
 public:
  ColumnProblem(const TaskBundle& bundle, int j, std::span<const int> predictors, double lambda)
      : lambda_(lambda) {
    const int m = static_cast<int>(predictors.size());
    const int num_tasks = bundle.num_tasks();
    a_.reserve(static_cast<std::size_t>(num_tasks));
    c_ = Matrix(m, num_tasks);
    d_ = 0.0;
    for (int k = 0; k < num_tasks; ++k) {
      const Matrix& s = bundle.gram(k);
      Matrix a(m, m);
      for (int r = 0; r < m; ++r) {
        for (int q = 0; q < m; ++q) a(r, q) = s(predictors[static_cast<std::size_t>(r)], predictors[static_cast<std::size_t>(q)]);
        c_(r, k) = s(predictors[static_cast<std::size_t>(r)], j);
      }
      a_.push_back(std::move(a));
      d_ += 0.5 * s(j, j);
    }
  }

  int rows() const { return static_cast<int>(c_.rows()); }

  double lipschitz(int iterations) const {
    double out = 0.0;
    for (const Matrix& a : a_) out = std::max(out, power_iteration_norm(a, iterations));
    return out;
  }
  int cols() const { return static_cast<int>(c_.cols()); }

  // Smooth part and its gradient.
  double smooth(const Matrix& b, Matrix* grad) const {
    double value = d_;
    for (int k = 0; k < cols(); ++k) {
      const Vector ab = a_[static_cast<std::size_t>(k)] * b.col(k);
      value += 0.5 * b.col(k).dot(ab) - c_.col(k).dot(b.col(k));
      if (grad) grad->col(k) = ab - c_.col(k);
    }
    return value;
  }

  // Largest |X_i^T X_j / n|; the gradient's natural magnitude.
  double scale() const { return c_.size() == 0 ? 0.0 : c_.cwiseAbs().maxCoeff(); }

  // sum_k d_k^T A_k d_k
  double curvature(const Matrix& d) const {
    double out = 0.0;
    for (int k = 0; k < cols(); ++k) out += d.col(k).dot(a_[static_cast<std::size_t>(k)] * d.col(k));
    return out;
  }

  double penalty(const Matrix& b) const { return lambda_ * b.rowwise().norm().sum(); }
  double objective(const Matrix& b) const { return smooth(b, nullptr) + penalty(b); }

  Matrix prox(const Matrix& v, double c) const {
    Matrix out = v;
    for (int r = 0; r < out.rows(); ++r) {
      const double n = out.row(r).norm();
      out.row(r) *= n > c ? 1.0 - c / n : 0.0;
    }
    return out;
  }

 private:
  std::vector<Matrix> a_;
  Matrix c_;
  double d_;
  double lambda_;
};

struct ColumnSolution {
  Matrix coefficients;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

ColumnSolution solve_column(const ColumnProblem& prob, double lipschitz, double lambda,
                            const FixedOrderOptions& opts) {
  const int m = prob.rows();
  const int num_tasks = prob.cols();
  ColumnSolution sol;
  sol.coefficients = Matrix::Zero(m, num_tasks);
  if (m == 0) {
    sol.objective = prob.objective(sol.coefficients);
    sol.converged = true;
    return sol;
  }

  double lip = std::max(lipschitz, 1e-12);
  const double threshold = opts.kkt_tol * std::max(1.0, prob.scale());
  Matrix x = sol.coefficients;
  Matrix y = x;
  Matrix grad(m, num_tasks);
  double fx = prob.objective(x);
  double momentum = 1.0;

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    prob.smooth(y, &grad);
    Matrix z = prob.prox(y - grad / lip, lambda / lip);
    // The smooth part is quadratic, so the step is valid exactly when the
    // curvature along it stays below lip.
    for (int guard = 0; guard < 60; ++guard) {
      const Matrix d = z - y;
      if (prob.curvature(d) <= lip * d.squaredNorm()) break;
      lip *= 2.0;
      z = prob.prox(y - grad / lip, lambda / lip);
    }
    // Gradient mapping at y; zero exactly at the optimum.
    const double residual = lip * (z - y).cwiseAbs().maxCoeff();
    const double fz = prob.objective(z);
    if (fz > fx && momentum > 1.0) {
      // Adaptive restart: drop the momentum and retry from x.
      momentum = 1.0;
      y = x;
      continue;
    }
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = z + ((momentum - 1.0) / next) * (z - x);
    x = std::move(z);
    fx = fz;
    momentum = next;
    if (residual <= threshold) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  sol.coefficients = std::move(x);
  sol.objective = fx;
  sol.iterations = it;
  return sol;
}

}  // namespace

ColumnFit fit_column(const TaskBundle& bundle, int j, std::span<const int> predictors, double lambda,
                     double lipschitz, const FixedOrderOptions& options) {
  const ColumnProblem prob(bundle, j, predictors, lambda);
  if (lipschitz <= 0.0) lipschitz = prob.lipschitz(options.power_iterations);
  ColumnSolution sol = solve_column(prob, lipschitz, lambda, options);
  return {std::move(sol.coefficients), sol.objective, sol.iterations, sol.converged};
}

FixedOrderFit fit_fixed_order(const TaskBundle& bundle, const Permutation& order, double lambda,
                              const FixedOrderOptions& options) {
  if (order.size() != bundle.p()) {
    throw Error(Errc::DimensionMismatch, "order has " + std::to_string(order.size()) + " nodes but data has p = " +
                                             std::to_string(bundle.p()));
  }
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be non-negative");
  const int p = bundle.p();
  const int num_tasks = bundle.num_tasks();

  FixedOrderFit fit;
  fit.weights = WeightStack::zeros(num_tasks, p);
  const std::vector<int> nodes = order.node_order();
  for (int pos = 0; pos < p; ++pos) {
    const int j = nodes[static_cast<std::size_t>(pos)];
    const std::span<const int> predictors(nodes.data(), static_cast<std::size_t>(pos));
    const ColumnFit sol = fit_column(bundle, j, predictors, lambda, 0.0, options);
    for (int k = 0; k < num_tasks; ++k)
      for (int r = 0; r < pos; ++r) fit.weights[k](predictors[static_cast<std::size_t>(r)], j) = sol.coefficients(r, k);
    fit.objective += sol.objective;
    fit.iterations = std::max(fit.iterations, sol.iterations);
    fit.converged = fit.converged && sol.converged;
  }
  return fit;
}

WeightStack ols_refit(const TaskBundle& bundle, std::span<const EdgePattern> supports) {
  const int p = bundle.p();
  const int num_tasks = bundle.num_tasks();
  if (static_cast<int>(supports.size()) != num_tasks) {
    throw Error(Errc::DimensionMismatch, "refit needs one support per task");
  }
  constexpr double kRidge = 1e-10;
  WeightStack out = WeightStack::zeros(num_tasks, p);
  for (int k = 0; k < num_tasks; ++k) {
    const EdgePattern& sup = supports[static_cast<std::size_t>(k)];
    if (sup.rows() != p || sup.cols() != p) throw Error(Errc::DimensionMismatch, "support pattern must be p x p");
    const Matrix& s = bundle.gram(k);
    for (int j = 0; j < p; ++j) {
      std::vector<int> parents;
      for (int i = 0; i < p; ++i)
        if (i != j && sup(i, j)) parents.push_back(i);
      if (parents.empty()) continue;
      const int m = static_cast<int>(parents.size());
      if (m >= bundle.n(k)) {
        throw Error(Errc::RankDeficient, "task " + std::to_string(k) + " column " + std::to_string(j) + " has " +
                                             std::to_string(m) + " parents but only " + std::to_string(bundle.n(k)) +
                                             " samples");
      }
      Matrix a(m, m);
      Vector b(m);
      for (int r = 0; r < m; ++r) {
        for (int q = 0; q < m; ++q) a(r, q) = s(parents[static_cast<std::size_t>(r)], parents[static_cast<std::size_t>(q)]);
        b(r) = s(parents[static_cast<std::size_t>(r)], j);
      }
      a.diagonal().array() += kRidge;
      const Eigen::LLT<Matrix> llt(a);
      if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        throw Error(Errc::RankDeficient, "task " + std::to_string(k) + " column " + std::to_string(j) +
                                             ": restricted Gram matrix is singular");
      }
      const Vector coef = llt.solve(b);
      for (int r = 0; r < m; ++r) out[k](parents[static_cast<std::size_t>(r)], j) = coef(r);
    }
  }
  return out;
}

}  // namespace multidag
