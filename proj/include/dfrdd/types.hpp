#ifndef DFRDD_TYPES_HPP
#define DFRDD_TYPES_HPP

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace dfrdd {

// Points are stored column-wise: a batch of N points in R^n is an n x N matrix.
using Scalar = double;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;
using ArrayX = Eigen::ArrayXd;
using ArrayXX = Eigen::ArrayXXd;

template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Batched scalar field: n x N points -> N values.
using ScalarField = std::function<VectorX(const MatrixX&)>;
/// Batched gradient field: n x N points -> n x N gradients.
using GradientField = std::function<MatrixX(const MatrixX&)>;

/// Raised when training produces non-finite parameters, gradients or losses.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dfrdd

#endif  // DFRDD_TYPES_HPP
