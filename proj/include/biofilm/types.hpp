#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace biofilm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Rejected input: a precondition on user-supplied data failed.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A deformation produced a non-positive Jacobian determinant or an
/// inverted element; the message names the offending point.
class DegenerateDeformation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solver did not reach the requested residual; carries the
/// per-iteration relative residual history.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// The epsilon-continuation for the fraction transport stopped making
/// progress (Cauchy differences grew over two consecutive steps).
class ContinuationFailure : public std::runtime_error {
 public:
  ContinuationFailure(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), cauchy_history(std::move(history)) {}
  std::vector<double> cauchy_history;
};

/// The coupled fixed-point sweep exceeded its iteration budget.
class SlabFailure : public std::runtime_error {
 public:
  SlabFailure(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), sweep_history(std::move(history)) {}
  std::vector<double> sweep_history;
};

}  // namespace biofilm
