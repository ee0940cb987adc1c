#ifndef DFRDD_RESIDUAL_HPP
#define DFRDD_RESIDUAL_HPP

#include "dfrdd/basis.hpp"
#include "dfrdd/geometry.hpp"
#include "dfrdd/quadrature.hpp"
#include "dfrdd/types.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dfrdd {

/// A subdomain together with its test modes and its quadrature rule, with the
/// per-axis mode tables precomputed at the quadrature nodes.
///
/// Pairings are computed by sum factorization when the rule is a tensor grid
/// aligned with the box, and by per-node tables otherwise.
class BoxBlock {
 public:
  BoxBlock(BoxDomain box, std::vector<int> mode_counts, QuadratureRule rule);

  const BoxDomain& box() const { return box_; }
  const QuadratureRule& rule() const { return rule_; }
  const std::vector<int>& mode_counts() const { return counts_; }
  int mode_count() const;
  std::vector<ModeIndex> modes() const;
  Eigen::Index node_count() const { return rule_.size(); }
  bool tensor() const { return tensor_; }

  /// r_k = sum_q w_q (grad u . grad Phi_k - f Phi_k) - boundary_load_k, in
  /// lexicographic mode order.
  VectorX pair(const MatrixX& grad_u, const VectorX& f) const;

  /// Same pairing without the source and boundary terms (linear part only).
  VectorX pair_gradient(const MatrixX& grad_u) const;

  /// pair_gradient for many fields at once: grad_nodes[d] is N x W, column j
  /// holding component d of field j. Returns K x W.
  MatrixX pair_gradient_columns(const std::vector<MatrixX>& grad_nodes) const;

  /// The load vector l_k = sum_q w_q f Phi_k + boundary_load_k.
  VectorX load(const VectorX& f) const;

  /// Adjoint of pair_gradient: for r_bar = dL/dr returns dL/d(grad u) at the
  /// nodes (n x N).
  MatrixX pair_adjoint(const VectorX& r_bar) const;

  /// Adds sum over face nodes of w g Phi_k for a Free face (Neumann data g).
  void add_neumann_load(int face, const ScalarField& g, int cells);
  const VectorX& boundary_load() const { return boundary_load_; }

 private:
  MatrixX contract(const MatrixX& grad_u, const VectorX* f) const;

  BoxDomain box_;
  std::vector<int> counts_;
  QuadratureRule rule_;
  bool tensor_ = false;
  Eigen::Index n0_ = 0;
  Eigen::Index n1_ = 1;
  MatrixX p0_, d0_, p1_, d1_;  // tables: grid axis or per node
  MatrixX inv_norm_;           // K0 x K1
  MatrixX unit_edges_;
  VectorX boundary_load_;
};

/// Per-box residual pairings r_k.
struct PairingVector {
  std::vector<int> box_ids;
  std::vector<VectorX> values;
};

enum class LossRole { Training, Validation };

struct LossBreakdown {
  std::map<int, double> per_box;
  double total = 0.0;
  LossRole role = LossRole::Training;
};

/// Analytic or network field: points -> (u, grad u).
struct FieldSample {
  VectorX u;
  MatrixX grad;
};
using FieldFunction = std::function<FieldSample(const MatrixX&)>;

/// Evaluates u and f at each block's nodes and pairs them; boxes are
/// independent.
PairingVector pairings(const std::vector<BoxBlock>& blocks, const FieldFunction& u,
                       const ScalarField& f);

/// Sum of squares per box, and the star-norm total (pairwise summation in
/// box-id order).
LossBreakdown loss(const PairingVector& r, LossRole role = LossRole::Training);

std::string loss_to_json(const LossBreakdown& l, int indent = 2);

/// Pairwise (cascade) summation.
double pairwise_sum(const double* data, std::size_t n);

/// Deduplicated union of the nodes of several blocks; index[b][q] is the pool
/// index of node q of block b.
struct NodePool {
  MatrixX nodes;
  std::vector<std::vector<Eigen::Index>> index;
};
NodePool build_pool(const std::vector<BoxBlock>& blocks);

/// Gram matrix G_jk = sum_q w_q (Phi_j Phi_k + grad Phi_j . grad Phi_k) of a
/// block's modes, assembled point by point from eval_mode.
MatrixX gram_matrix(const BoxBlock& block);

}  // namespace dfrdd

#endif  // DFRDD_RESIDUAL_HPP
