#include "dfrdd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <climits>
#include <iomanip>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dfrdd {

namespace {

#if defined(__GLIBC__)
// Training allocates many large short-lived temporaries; keep them on the heap
// instead of mapping fresh zeroed pages every iteration.
[[maybe_unused]] const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, INT_MAX);
  return true;
}();
#endif

}  // namespace

AdamState AdamState::zeros(Eigen::Index size, double lr) {
  AdamState s;
  s.m = VectorX::Zero(size);
  s.v = VectorX::Zero(size);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& s, Eigen::Ref<VectorX> theta, const VectorX& grad) {
  if (grad.size() != theta.size() || s.m.size() != theta.size())
    throw std::invalid_argument("optimizer state size mismatch");
  s.t += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  theta.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

double default_ridge(const LsSystem& system, double scale) {
  if (system.A.cols() == 0) return 0.0;
  return scale * system.A.squaredNorm() / static_cast<double>(system.A.cols());
}

VectorX ls_solve(const LsSystem& system, double ridge) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be non-negative");
  const Eigen::Index rows = system.A.rows();
  const Eigen::Index cols = system.A.cols();
  if (system.b.size() != rows) throw std::invalid_argument("right-hand side size mismatch");
  MatrixX M(rows + (ridge > 0.0 ? cols : 0), cols);
  VectorX rhs = VectorX::Zero(M.rows());
  M.topRows(rows) = system.A;
  rhs.head(rows) = system.b;
  if (ridge > 0.0) M.bottomRows(cols) = std::sqrt(ridge) * MatrixX::Identity(cols, cols);
  const Eigen::ColPivHouseholderQR<MatrixX> qr(M);
  if (qr.rank() < cols) throw std::runtime_error("rank-deficient feature matrix; increase ridge");
  return qr.solve(rhs);
}

Discretization::Discretization(std::vector<BoxBlock> blocks, const Cutoff& cutoff, const ScalarField& source)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("discretization needs at least one box");
  pool_ = build_pool(blocks_);
  chi_ = evaluate_cutoff(cutoff, pool_.nodes);
  const VectorX f = source(pool_.nodes);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    loads_.push_back(blocks_[b].load(gather(f.transpose(), b).transpose()));
  }
}

Eigen::Index Discretization::mode_count() const {
  Eigen::Index c = 0;
  for (const auto& b : blocks_) c += b.mode_count();
  return c;
}

MatrixX Discretization::gather(const MatrixX& pool_values, std::size_t block) const {
  const auto& idx = pool_.index[block];
  MatrixX out(pool_values.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t q = 0; q < idx.size(); ++q) out.col(static_cast<Eigen::Index>(q)) = pool_values.col(idx[q]);
  return out;
}

MatrixX Discretization::gather_transposed(const MatrixX& pool_values, std::size_t block) const {
  constexpr std::size_t kTile = 256;
  const auto& idx = pool_.index[block];
  const Eigen::Index rows = pool_values.rows();
  MatrixX out(static_cast<Eigen::Index>(idx.size()), rows);
  for (std::size_t q0 = 0; q0 < idx.size(); q0 += kTile) {
    const std::size_t q1 = std::min(idx.size(), q0 + kTile);
    for (Eigen::Index i = 0; i < rows; ++i) {
      double* dst = out.col(i).data();
      for (std::size_t q = q0; q < q1; ++q) dst[q] = pool_values(i, idx[q]);
    }
  }
  return out;
}

FeatureEval Discretization::features(const Network& net, ForwardPass* pass) const {
  ForwardPass p = forward_hidden(net, pool_.nodes);
  FeatureEval f = apply_cutoff(raw_features(p), chi_);
  if (pass != nullptr) *pass = std::move(p);
  return f;
}

LsSystem Discretization::assemble(const FeatureEval& features) const {
  const Eigen::Index width = features.value.rows();
  const int n = static_cast<int>(features.grad.size());
  LsSystem sys;
  sys.A.resize(mode_count(), width);
  sys.b.resize(mode_count());
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Eigen::Index K = blocks_[b].mode_count();
    sys.row_offsets.push_back(row);
    std::vector<MatrixX> gt(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) {
      gt[static_cast<std::size_t>(d)] = gather_transposed(features.grad[static_cast<std::size_t>(d)], b);
    }
    sys.A.middleRows(row, K) = blocks_[b].pair_gradient_columns(gt);
    sys.b.segment(row, K) = loads_[b];
    row += K;
  }
  return sys;
}

PairingVector Discretization::residuals(const LsSystem& system, const VectorX& w) const {
  const VectorX r = system.A * w - system.b;
  PairingVector out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out.box_ids.push_back(blocks_[b].box().id);
    out.values.push_back(r.segment(system.row_offsets[b], blocks_[b].mode_count()));
  }
  return out;
}

PairingVector Discretization::residuals(const MatrixX& grad_u) const {
  PairingVector out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out.box_ids.push_back(blocks_[b].box().id);
    out.values.push_back(blocks_[b].pair_gradient(gather(grad_u, b)) - loads_[b]);
  }
  return out;
}

MatrixX Discretization::gradient_adjoint(const PairingVector& r) const {
  MatrixX bar = MatrixX::Zero(pool_.nodes.rows(), pool_.nodes.cols());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const MatrixX g = blocks_[b].pair_adjoint(2.0 * r.values[b]);
    const auto& idx = pool_.index[b];
    for (std::size_t q = 0; q < idx.size(); ++q) bar.col(idx[q]) += g.col(static_cast<Eigen::Index>(q));
  }
  return bar;
}

FieldEval evaluate_field(const Network& net, const Cutoff& cutoff, const MatrixX& points, Eigen::Index chunk) {
  FieldEval out;
  const Eigen::Index N = points.cols();
  out.u.resize(N);
  out.grad.resize(points.rows(), N);
  for (Eigen::Index start = 0; start < N; start += chunk) {
    const Eigen::Index len = std::min(chunk, N - start);
    const FieldEval part = forward_with_grad(net, cutoff, points.middleCols(start, len));
    out.u.segment(start, len) = part.u;
    out.grad.middleCols(start, len) = part.grad;
  }
  return out;
}

LossAndGradient loss_gradient(const Network& net, const Discretization& disc) {
  ForwardPass pass;
  const FeatureEval feats = disc.features(net, &pass);
  const LsSystem sys = disc.assemble(feats);
  const VectorX w = net.output_weights();
  const PairingVector r = disc.residuals(sys, w);
  LossAndGradient out;
  out.breakdown = loss(r);
  out.loss = out.breakdown.total;
  const MatrixX grad_bar = disc.gradient_adjoint(r);
  const HiddenAdjoint adj = pull_back_output(w, disc.chi(), VectorX::Zero(grad_bar.cols()), grad_bar);
  out.gradient = backward_hidden(net, disc.pool().nodes, pass, adj.h_bar, adj.tangent_bar);
  if (!std::isfinite(out.loss) || !out.gradient.allFinite()) throw DivergenceError("diverged");
  return out;
}

double loss_value(const Network& net, const Discretization& disc) {
  const LsSystem sys = disc.assemble(disc.features(net));
  return loss(disc.residuals(sys, net.output_weights())).total;
}

void write_history_csv(const std::vector<HistoryRow>& rows, std::ostream& os) {
  os << "iteration,train_loss,val_loss,rel_h1_error_pct\n";
  os << std::setprecision(17);
  auto field = [&os](double v) {
    if (std::isfinite(v)) os << v;
  };
  for (const auto& r : rows) {
    os << r.iteration << ',';
    field(r.train_loss);
    os << ',';
    field(r.val_loss);
    os << ',';
    field(r.rel_h1_error_pct);
    os << '\n';
  }
}

Trainer::Trainer(Network net, Cutoff cutoff, ScalarField source, TrainOptions options)
    : net_(std::move(net)), cutoff_(std::move(cutoff)), source_(std::move(source)), options_(options) {
  if (!(options_.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  adam_ = AdamState::zeros(net_.trainable_count(), options_.lr);
}

void Trainer::set_blocks(std::vector<BoxBlock> training, std::vector<BoxBlock> validation) {
  train_.emplace(std::move(training), cutoff_, source_);
  if (validation.empty()) {
    val_.reset();
  } else {
    val_.emplace(std::move(validation), cutoff_, source_);
  }
}

HistoryRow Trainer::record(double train_loss, bool force) {
  HistoryRow row;
  row.iteration = iteration_;
  row.train_loss = train_loss;
  auto due = [&](int every) { return every > 0 && (force || iteration_ % every == 0); };
  if (val_ && due(options_.val_every)) {
    const FieldEval field = evaluate_field(net_, cutoff_, val_->pool().nodes);
    row.val_loss = loss(val_->residuals(field.grad), LossRole::Validation).total;
  }
  if (error_ && due(options_.error_every)) row.rel_h1_error_pct = error_(net_);
  history_.push_back(row);
  return row;
}

HistoryRow Trainer::evaluate(bool force_diagnostics) {
  if (!train_) throw std::logic_error("trainer has no blocks");
  const LsSystem sys = train_->assemble(train_->features(net_));
  const double ridge = options_.ridge.value_or(default_ridge(sys, options_.ridge_scale));
  net_.set_output_weights(ls_solve(sys, ridge));
  last_breakdown_ = loss(train_->residuals(sys, net_.output_weights()));
  if (!std::isfinite(last_breakdown_.total)) throw DivergenceError("diverged");
  return record(last_breakdown_.total, force_diagnostics);
}

std::vector<HistoryRow> Trainer::train(int iterations, bool record_initial) {
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (!train_) throw std::logic_error("trainer has no blocks");
  std::vector<HistoryRow> rows;
  const Eigen::Index trainable = net_.trainable_count();
  for (int t = 0;; ++t) {
    ForwardPass pass;
    const FeatureEval feats = train_->features(net_, &pass);
    const LsSystem sys = train_->assemble(feats);
    const double ridge = options_.ridge.value_or(default_ridge(sys, options_.ridge_scale));
    net_.set_output_weights(ls_solve(sys, ridge));
    const VectorX w = net_.output_weights();
    const PairingVector r = train_->residuals(sys, w);
    last_breakdown_ = loss(r);
    if (!std::isfinite(last_breakdown_.total)) throw DivergenceError("diverged");
    if (t > 0 || record_initial) rows.push_back(record(last_breakdown_.total, t == iterations));
    if (t == iterations) break;

    const MatrixX grad_bar = train_->gradient_adjoint(r);
    const HiddenAdjoint adj =
        pull_back_output(w, train_->chi(), VectorX::Zero(grad_bar.cols()), grad_bar);
    const VectorX g = backward_hidden(net_, train_->pool().nodes, pass, adj.h_bar, adj.tangent_bar);
    if (!g.allFinite()) throw DivergenceError("diverged");
    VectorX theta = net_.flatten();
    adam_step(adam_, theta.head(trainable), g);
    net_.unflatten(theta);
    ++iteration_;
  }
  return rows;
}

}  // namespace dfrdd
