#ifndef DFRDD_OPTIMIZER_HPP
#define DFRDD_OPTIMIZER_HPP

#include "dfrdd/model.hpp"
#include "dfrdd/residual.hpp"
#include "dfrdd/types.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace dfrdd {

struct AdamState {
  VectorX m;
  VectorX v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index size, double lr);
};

/// One bias-corrected Adam update of `theta` in place.
void adam_step(AdamState& state, Eigen::Ref<VectorX> theta, const VectorX& grad);

/// Rows are the (box, mode) pairs in block order; columns are the last hidden
/// features. The residual is r = A W - b.
struct LsSystem {
  MatrixX A;
  VectorX b;
  std::vector<Eigen::Index> row_offsets;  // first row of each block
};

/// Default Tikhonov parameter scale * trace(A^T A) / cols.
double default_ridge(const LsSystem& system, double scale = 1e-10);

/// argmin |A W - b|^2 + ridge |W|^2. Solved through a column-pivoting QR of
/// the stacked matrix [A; sqrt(ridge) I], which has the same normal equations.
VectorX ls_solve(const LsSystem& system, double ridge);

/// Training and validation blocks of one cover, together with everything that
/// does not depend on the network parameters: deduplicated nodes, cutoff
/// values and source terms at those nodes, and the load vectors.
class Discretization {
 public:
  Discretization(std::vector<BoxBlock> blocks, const Cutoff& cutoff, const ScalarField& source);

  const std::vector<BoxBlock>& blocks() const { return blocks_; }
  const NodePool& pool() const { return pool_; }
  const CutoffValues& chi() const { return chi_; }
  Eigen::Index mode_count() const;

  /// Cut-off hidden features at every pool node.
  FeatureEval features(const Network& net, ForwardPass* pass = nullptr) const;
  LsSystem assemble(const FeatureEval& features) const;

  /// Per-block residuals r = A W - b as a PairingVector.
  PairingVector residuals(const LsSystem& system, const VectorX& w) const;

  /// Residuals of an arbitrary field sampled at the pool nodes.
  PairingVector residuals(const MatrixX& grad_u) const;

  /// d(total loss)/d(grad u) at the pool nodes for given residuals.
  MatrixX gradient_adjoint(const PairingVector& r) const;

 private:
  MatrixX gather(const MatrixX& pool_values, std::size_t block) const;
  /// gather(...).transpose() without the intermediate copy.
  MatrixX gather_transposed(const MatrixX& pool_values, std::size_t block) const;

  std::vector<BoxBlock> blocks_;
  NodePool pool_;
  CutoffValues chi_;
  std::vector<VectorX> loads_;
};

/// Field values at many points, evaluated in chunks to bound memory.
FieldEval evaluate_field(const Network& net, const Cutoff& cutoff, const MatrixX& points,
                         Eigen::Index chunk = 65536);

/// Loss gradient over the trainable slice with the output weights held fixed.
struct LossAndGradient {
  double loss = 0.0;
  VectorX gradient;
  LossBreakdown breakdown;
};
LossAndGradient loss_gradient(const Network& net, const Discretization& disc);

/// Same loss as loss_gradient, without derivatives (for finite differences).
double loss_value(const Network& net, const Discretization& disc);

struct HistoryRow {
  long iteration = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double rel_h1_error_pct = std::numeric_limits<double>::quiet_NaN();
};

void write_history_csv(const std::vector<HistoryRow>& rows, std::ostream& os);

struct TrainOptions {
  double lr = 1e-2;
  std::optional<double> ridge;  // default_ridge when unset
  double ridge_scale = 1e-10;   // relative scale of the default ridge
  int val_every = 1;            // 0 disables
  int error_every = 1;          // 0 disables
};

using ErrorMetric = std::function<double(const Network&)>;

/// Hybrid least-squares / Adam trainer. Row t of the history is the state
/// after t Adam steps, with the output layer freshly solved.
class Trainer {
 public:
  Trainer(Network net, Cutoff cutoff, ScalarField source, TrainOptions options);

  /// Replaces the training and validation blocks; network and Adam state persist.
  void set_blocks(std::vector<BoxBlock> training, std::vector<BoxBlock> validation);
  void set_error_metric(ErrorMetric metric) { error_ = std::move(metric); }

  /// Runs `iterations` Adam steps. With `record_initial`, the state before the
  /// first step is also recorded.
  std::vector<HistoryRow> train(int iterations, bool record_initial = true);

  /// Solves the output layer and records one row without stepping.
  HistoryRow evaluate(bool force_diagnostics = true);

  const Network& network() const { return net_; }
  const Discretization& training() const { return *train_; }
  const std::vector<HistoryRow>& history() const { return history_; }
  long iteration() const { return iteration_; }
  const Cutoff& cutoff() const { return cutoff_; }
  const ScalarField& source() const { return source_; }
  const TrainOptions& options() const { return options_; }
  const LossBreakdown& last_breakdown() const { return last_breakdown_; }

 private:
  HistoryRow record(double train_loss, bool force);

  Network net_;
  Cutoff cutoff_;
  ScalarField source_;
  TrainOptions options_;
  AdamState adam_;
  std::optional<Discretization> train_;
  std::optional<Discretization> val_;
  ErrorMetric error_;
  std::vector<HistoryRow> history_;
  LossBreakdown last_breakdown_;
  long iteration_ = 0;
};

}  // namespace dfrdd

#endif  // DFRDD_OPTIMIZER_HPP
