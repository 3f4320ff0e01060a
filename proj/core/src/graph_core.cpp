#include "multidag/graph_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "multidag/errors.hpp"

namespace multidag {

Permutation::Permutation(std::vector<int> ranks) : ranks_(std::move(ranks)) {
  const int p = size();
  std::vector<char> seen(ranks_.size(), 0);
  for (int r : ranks_) {
    if (r < 0 || r >= p || seen[static_cast<std::size_t>(r)]) {
      throw Error(Errc::InvalidArgument, "rank sequence is not a bijection over [0, " +
                                             std::to_string(p) + ")");
    }
    seen[static_cast<std::size_t>(r)] = 1;
  }
}

Permutation Permutation::identity(int p) {
  std::vector<int> r(static_cast<std::size_t>(p));
  std::iota(r.begin(), r.end(), 0);
  return Permutation(std::move(r));
}

Permutation Permutation::reversal(int p) {
  std::vector<int> r(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) r[static_cast<std::size_t>(i)] = p - 1 - i;
  return Permutation(std::move(r));
}

Permutation Permutation::from_node_order(std::span<const int> nodes) {
  const int p = static_cast<int>(nodes.size());
  std::vector<int> r(nodes.size(), -1);
  for (int pos = 0; pos < p; ++pos) {
    const int node = nodes[static_cast<std::size_t>(pos)];
    if (node < 0 || node >= p || r[static_cast<std::size_t>(node)] != -1) {
      throw Error(Errc::InvalidArgument, "node sequence is not a bijection");
    }
    r[static_cast<std::size_t>(node)] = pos;
  }
  return Permutation(std::move(r));
}

std::vector<int> Permutation::node_order() const {
  std::vector<int> nodes(ranks_.size());
  for (std::size_t i = 0; i < ranks_.size(); ++i) nodes[static_cast<std::size_t>(ranks_[i])] = static_cast<int>(i);
  return nodes;
}

AcyclicityVariant parse_acyclicity_variant(std::string_view name) {
  if (name == "expm") return AcyclicityVariant::Expm;
  if (name == "poly") return AcyclicityVariant::Poly;
  throw Error(Errc::UnknownVariant, "acyclicity variant '" + std::string(name) + "' (expected expm|poly)");
}

std::string_view to_string(AcyclicityVariant v) noexcept {
  return v == AcyclicityVariant::Expm ? "expm" : "poly";
}

Matrix zero_diagonal(Matrix m) {
  m.diagonal().setZero();
  return m;
}

namespace {

void require_square(const Matrix& t) {
  if (t.rows() != t.cols()) {
    throw Error(Errc::NotSquare, "expected a square matrix, got " + std::to_string(t.rows()) + "x" +
                                     std::to_string(t.cols()));
  }
}

// Hadamard square with the diagonal removed.
Matrix squared_offdiag(const MaskMatrix& t) {
  Matrix a = t.cwiseProduct(t);
  a.diagonal().setZero();
  return a;
}

// (I + A)^(power) by repeated multiplication; returns the last two powers.
std::pair<Matrix, Matrix> poly_powers(const Matrix& a, int p) {
  const Matrix base = Matrix::Identity(a.rows(), a.cols()) + a;
  Matrix prev = Matrix::Identity(a.rows(), a.cols());  // (I+A)^(p-1)
  Matrix cur = base;                                    // (I+A)^p
  for (int k = 1; k < p; ++k) {
    prev = cur;
    cur.noalias() = prev * base;
  }
  return {std::move(prev), std::move(cur)};
}

}  // namespace

double h_expm(const MaskMatrix& t) {
  require_square(t);
  if (t.rows() == 0) return 0.0;
  const Matrix e = squared_offdiag(t).exp();
  return std::max(0.0, e.trace() - static_cast<double>(t.rows()));
}

double h_poly(const MaskMatrix& t) {
  require_square(t);
  const int p = static_cast<int>(t.rows());
  if (p == 0) return 0.0;
  const auto [unused, full] = poly_powers(squared_offdiag(t), p);
  (void)unused;
  return std::max(0.0, full.trace() - static_cast<double>(p));
}

double acyclicity(const MaskMatrix& t, AcyclicityVariant variant) {
  return variant == AcyclicityVariant::Expm ? h_expm(t) : h_poly(t);
}

AcyclicityEval acyclicity_with_gradient(const MaskMatrix& t, AcyclicityVariant variant) {
  require_square(t);
  const int p = static_cast<int>(t.rows());
  AcyclicityEval out;
  if (p == 0) {
    out.gradient = Matrix(0, 0);
    return out;
  }
  const Matrix a = squared_offdiag(t);
  if (variant == AcyclicityVariant::Expm) {
    const Matrix e = a.exp();
    out.value = std::max(0.0, e.trace() - p);
    out.gradient = 2.0 * e.transpose().cwiseProduct(t);
  } else {
    const auto [pm1, full] = poly_powers(a, p);
    out.value = std::max(0.0, full.trace() - p);
    out.gradient = (2.0 * p) * pm1.transpose().cwiseProduct(t);
  }
  out.gradient.diagonal().setZero();
  return out;
}

MaskMatrix grad_h(const MaskMatrix& t, AcyclicityVariant variant) {
  return acyclicity_with_gradient(t, variant).gradient;
}

MaskMatrix mask_from_permutation(const Permutation& pi) {
  const int p = pi.size();
  MaskMatrix t = MaskMatrix::Zero(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (pi.rank(i) < pi.rank(j)) t(i, j) = 1.0;
  return t;
}

Permutation permutation_from_mask(const MaskMatrix& t, double tol) {
  require_square(t);
  const int p = static_cast<int>(t.rows());
  Matrix rounded = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      const double v = t(i, j);
      if (!std::isfinite(v)) throw Error(Errc::NonFinite, "mask entry is not finite");
      if (std::abs(v - 0.5) <= tol) {
        throw Error(Errc::RoundingAmbiguous, "mask entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                                 ") = " + std::to_string(v) + " is within tolerance of 0.5");
      }
      rounded(i, j) = v > 0.5 ? 1.0 : 0.0;
    }
  }

  const Vector row_sums = rounded.rowwise().sum();
  std::vector<int> sorted(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) sorted[static_cast<std::size_t>(i)] = static_cast<int>(row_sums(i));
  std::sort(sorted.begin(), sorted.end());
  for (int r = 0; r < p; ++r) {
    if (sorted[static_cast<std::size_t>(r)] != r) {
      throw Error(Errc::NotPermutationMask, "rounded mask row sums do not form {0, ..., p-1}");
    }
  }

  std::vector<int> nodes(static_cast<std::size_t>(p));
  std::iota(nodes.begin(), nodes.end(), 0);
  std::stable_sort(nodes.begin(), nodes.end(), [&](int a, int b) { return row_sums(a) > row_sums(b); });
  Permutation pi = Permutation::from_node_order(nodes);
  if (mask_from_permutation(pi) != rounded) {
    throw Error(Errc::NotPermutationMask, "rounded mask is not transitive");
  }
  return pi;
}

bool is_consistent(const AdjacencyMatrix& g, const Permutation& pi) {
  if (g.rows() != pi.size() || g.cols() != pi.size()) {
    throw Error(Errc::DimensionMismatch, "adjacency and permutation sizes differ");
  }
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      if (i != j && g(i, j) != 0.0 && !(pi.rank(i) < pi.rank(j))) return false;
  return true;
}

std::optional<Permutation> topological_order(const AdjacencyMatrix& g) {
  require_square(g);
  const int p = static_cast<int>(g.rows());
  std::vector<int> indegree(static_cast<std::size_t>(p), 0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && g(i, j) != 0.0) ++indegree[static_cast<std::size_t>(j)];

  std::vector<int> ready;
  for (int j = p - 1; j >= 0; --j)
    if (indegree[static_cast<std::size_t>(j)] == 0) ready.push_back(j);

  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(p));
  while (!ready.empty()) {
    const int i = ready.back();
    ready.pop_back();
    nodes.push_back(i);
    for (int j = p - 1; j >= 0; --j) {
      if (i != j && g(i, j) != 0.0 && --indegree[static_cast<std::size_t>(j)] == 0) ready.push_back(j);
    }
  }
  if (static_cast<int>(nodes.size()) != p) return std::nullopt;
  return Permutation::from_node_order(nodes);
}

}  // namespace multidag
