#ifndef DFRDD_QUADRATURE_HPP
#define DFRDD_QUADRATURE_HPP

#include "dfrdd/geometry.hpp"
#include "dfrdd/types.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace dfrdd {

enum class RuleRole { Training, Validation, Overkill };

enum class GradingKind { Uniform, Geometric };

struct GradingSpec {
  GradingKind kind = GradingKind::Uniform;
  VectorX focus;        // geometric only, global coordinates
  double ratio = 0.9;   // geometric only, in (0,1)
  std::vector<int> count;  // cells per axis
};

/// Tensor-product structure of a rule: node (i_0, i_1) sits at
/// origin + sum_j offsets[j](i_j) * dirs.col(j), with weight prod_j
/// axis_weights[j](i_j). Nodes are stored with axis 0 varying fastest.
struct TensorLayout {
  VectorX origin;
  MatrixX dirs;  // unit vectors, n x n
  std::vector<VectorX> offsets;
  std::vector<VectorX> axis_weights;

  std::vector<Eigen::Index> shape() const;
};

struct QuadratureRule {
  MatrixX nodes;  // n x N
  VectorX weights;
  RuleRole role = RuleRole::Training;
  std::optional<TensorLayout> layout;

  int dim() const { return static_cast<int>(nodes.rows()); }
  Eigen::Index size() const { return nodes.cols(); }
  double total_weight() const { return weights.sum(); }
};

struct Rule1d {
  VectorX nodes;
  VectorX weights;
};

/// Midpoint rule on (a, b) with uniform or geometrically graded cells.
/// Geometric cells shrink by `ratio` towards `focus`; an interior focus
/// splits the interval and each side gets a share of cells proportional to
/// its length.
Rule1d build_rule_1d(double a, double b, GradingKind kind, int cells, double ratio = 0.9,
                     std::optional<double> focus = std::nullopt);

/// Tensor-product midpoint rule in the box's own frame.
QuadratureRule build_rule(const BoxDomain& box, const GradingSpec& spec,
                          RuleRole role = RuleRole::Training);

/// Nodes strictly inside the box, with unchanged weights.
QuadratureRule restrict_rule(const QuadratureRule& rule, const BoxDomain& box);

/// Denser rule for validation losses: ceil(2.17 x count) per axis.
GradingSpec validation_counterpart(const GradingSpec& spec);

void write_rule_csv(const QuadratureRule& rule, std::ostream& os);

}  // namespace dfrdd

#endif  // DFRDD_QUADRATURE_HPP
