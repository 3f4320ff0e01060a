#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace multidag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// p x p real mask shared across tasks. Diagonal is structurally zero.
using MaskMatrix = Eigen::MatrixXd;

// p x p connection strengths; entry (i, j) is the weight of edge i -> j.
using AdjacencyMatrix = Eigen::MatrixXd;

// Binary edge pattern; entry (i, j) marks edge i -> j.
using EdgePattern = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

using Seed = std::uint64_t;

}  // namespace multidag
