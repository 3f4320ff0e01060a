#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "multidag/types.hpp"

namespace multidag {

// A bijection over [0, p) stored as a rank function: rank(i) is the
// position of node i in the causal order.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> ranks);

  static Permutation identity(int p);
  static Permutation reversal(int p);
  // Builds the permutation whose node sequence (first to last) is `nodes`.
  static Permutation from_node_order(std::span<const int> nodes);

  int size() const noexcept { return static_cast<int>(ranks_.size()); }
  int rank(int node) const { return ranks_.at(static_cast<std::size_t>(node)); }
  const std::vector<int>& ranks() const noexcept { return ranks_; }
  // Nodes listed from earliest to latest.
  std::vector<int> node_order() const;

  bool precedes(int a, int b) const { return rank(a) < rank(b); }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> ranks_;
};

enum class AcyclicityVariant { Expm, Poly };

AcyclicityVariant parse_acyclicity_variant(std::string_view name);
std::string_view to_string(AcyclicityVariant v) noexcept;

// tr(exp(T o T)) - p. Zero exactly when the off-diagonal pattern of T is acyclic.
double h_expm(const MaskMatrix& t);
// tr((I + T o T)^p) - p.
double h_poly(const MaskMatrix& t);
double acyclicity(const MaskMatrix& t, AcyclicityVariant variant);

MaskMatrix grad_h(const MaskMatrix& t, AcyclicityVariant variant);

struct AcyclicityEval {
  double value = 0.0;
  MaskMatrix gradient;
};
// Value and gradient sharing one matrix function evaluation.
AcyclicityEval acyclicity_with_gradient(const MaskMatrix& t, AcyclicityVariant variant);

// T_ij = 1 exactly when rank(i) < rank(j).
MaskMatrix mask_from_permutation(const Permutation& pi);

// Inverse of mask_from_permutation on a near-binary mask. Entries are rounded
// at 0.5; any entry within `tol` of 0.5 raises RoundingAmbiguous, and a
// rounded mask outside the permutation-mask space raises NotPermutationMask.
Permutation permutation_from_mask(const MaskMatrix& t, double tol = 1e-3);

// Every nonzero g(i, j), i != j, satisfies rank(i) < rank(j).
bool is_consistent(const AdjacencyMatrix& g, const Permutation& pi);

// Topological order of the off-diagonal nonzero pattern, if one exists.
std::optional<Permutation> topological_order(const AdjacencyMatrix& g);
inline bool is_acyclic(const AdjacencyMatrix& g) { return topological_order(g).has_value(); }

// Copy of `m` with its diagonal set to zero.
Matrix zero_diagonal(Matrix m);

}  // namespace multidag
