#include "dfrdd/residual.hpp"

#include "json.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace dfrdd {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool aligned_layout(const QuadratureRule& rule, const BoxDomain& box) {
  if (!rule.layout) return false;
  for (int j = 0; j < box.dim(); ++j) {
    if (rule.layout->dirs.col(j).dot(box.unit_edge(j)) < 1.0 - 1e-12) return false;
  }
  return true;
}

}  // namespace

BoxBlock::BoxBlock(BoxDomain box, std::vector<int> mode_counts, QuadratureRule rule)
    : box_(std::move(box)), counts_(std::move(mode_counts)), rule_(std::move(rule)) {
  const int n = box_.dim();
  if (static_cast<int>(counts_.size()) != n) throw std::invalid_argument("one mode count per axis required");
  for (int c : counts_) {
    if (c < 1) throw std::invalid_argument("mode count must be >= 1");
  }
  if (rule_.dim() != n) throw std::invalid_argument("rule dimension mismatch");
  if (rule_.size() == 0) throw std::invalid_argument("subdomain contains no integration points");

  unit_edges_.resize(n, n);
  for (int j = 0; j < n; ++j) unit_edges_.col(j) = box_.unit_edge(j);

  tensor_ = aligned_layout(rule_, box_);
  std::array<AxisTable, 2> tables;
  for (int j = 0; j < n; ++j) {
    const double len = box_.side_length(j);
    VectorX s;
    if (tensor_) {
      const auto& lay = *rule_.layout;
      const double shift = (lay.origin - box_.corner).dot(unit_edges_.col(j));
      s = lay.offsets[j].array() + shift;
    } else {
      s = (local_coords_batch(box_, rule_.nodes).row(j).transpose().array() * len).matrix();
    }
    tables[j] = axis_table(axis_variant(box_, j), counts_[j], len, s);
  }
  p0_ = tables[0].value;
  d0_ = tables[0].deriv;
  const Eigen::Index k0 = counts_[0];
  const Eigen::Index k1 = n == 2 ? counts_[1] : 1;
  if (n == 2) {
    p1_ = tables[1].value;
    d1_ = tables[1].deriv;
  } else {
    const Eigen::Index rows = tensor_ ? 1 : rule_.size();
    p1_ = MatrixX::Ones(rows, 1);
    d1_ = MatrixX::Zero(rows, 1);
  }
  n0_ = tensor_ ? p0_.rows() : rule_.size();
  n1_ = tensor_ ? p1_.rows() : 1;

  inv_norm_.resize(k0, k1);
  for (Eigen::Index a = 0; a < k0; ++a) {
    for (Eigen::Index b = 0; b < k1; ++b) {
      const double lam = tables[0].lambda(a) + (n == 2 ? tables[1].lambda(b) : 0.0);
      inv_norm_(a, b) = 1.0 / std::sqrt(1.0 + lam);
    }
  }
  boundary_load_ = VectorX::Zero(k0 * k1);
}

int BoxBlock::mode_count() const {
  int c = 1;
  for (int k : counts_) c *= k;
  return c;
}

std::vector<ModeIndex> BoxBlock::modes() const { return mode_set(box_, counts_); }

MatrixX BoxBlock::contract(const MatrixX& grad_u, const VectorX* f) const {
  const Eigen::Index nq = rule_.size();
  const int n = box_.dim();
  const VectorX& w = rule_.weights;
  MatrixX R = MatrixX::Zero(inv_norm_.rows(), inv_norm_.cols());
  if (grad_u.size() > 0) {
    if (grad_u.rows() != n || grad_u.cols() != nq) throw std::invalid_argument("gradient batch size mismatch");
    const VectorX g0 = (unit_edges_.col(0).transpose() * grad_u).transpose().cwiseProduct(w);
    if (tensor_) {
      const Eigen::Map<const MatrixX> G0(g0.data(), n0_, n1_);
      R.noalias() += d0_.transpose() * (G0 * p1_);
    } else {
      R.noalias() += (d0_.array().colwise() * g0.array()).matrix().transpose() * p1_;
    }
    if (n == 2) {
      const VectorX g1 = (unit_edges_.col(1).transpose() * grad_u).transpose().cwiseProduct(w);
      if (tensor_) {
        const Eigen::Map<const MatrixX> G1(g1.data(), n0_, n1_);
        R.noalias() += p0_.transpose() * (G1 * d1_);
      } else {
        R.noalias() += (p0_.array().colwise() * g1.array()).matrix().transpose() * d1_;
      }
    }
  }
  if (f != nullptr) {
    if (f->size() != nq) throw std::invalid_argument("source batch size mismatch");
    const VectorX F = f->cwiseProduct(w);
    if (tensor_) {
      const Eigen::Map<const MatrixX> Fm(F.data(), n0_, n1_);
      R.noalias() -= p0_.transpose() * (Fm * p1_);
    } else {
      R.noalias() -= (p0_.array().colwise() * F.array()).matrix().transpose() * p1_;
    }
  }
  return R.cwiseProduct(inv_norm_);
}

VectorX BoxBlock::pair(const MatrixX& grad_u, const VectorX& f) const {
  const RowMajor R = contract(grad_u, &f);
  return Eigen::Map<const VectorX>(R.data(), R.size()) - boundary_load_;
}

VectorX BoxBlock::pair_gradient(const MatrixX& grad_u) const {
  const RowMajor R = contract(grad_u, nullptr);
  return Eigen::Map<const VectorX>(R.data(), R.size());
}

MatrixX BoxBlock::pair_gradient_columns(const std::vector<MatrixX>& grad_nodes) const {
  const int n = box_.dim();
  const Eigen::Index nq = rule_.size();
  if (static_cast<int>(grad_nodes.size()) != n) throw std::invalid_argument("gradient batch size mismatch");
  const Eigen::Index W = grad_nodes[0].cols();
  for (const auto& g : grad_nodes) {
    if (g.rows() != nq || g.cols() != W) throw std::invalid_argument("gradient batch size mismatch");
  }
  const Eigen::Index k0 = inv_norm_.rows();
  const Eigen::Index k1 = inv_norm_.cols();
  MatrixX out(k0 * k1, W);
  if (!tensor_) {
    MatrixX g(n, nq);
    for (Eigen::Index j = 0; j < W; ++j) {
      for (int d = 0; d < n; ++d) g.row(d) = grad_nodes[static_cast<std::size_t>(d)].col(j).transpose();
      out.col(j) = pair_gradient(g);
    }
    return out;
  }
  auto projected = [&](int axis) {
    MatrixX G = MatrixX::Zero(nq, W);
    for (int d = 0; d < n; ++d) {
      const double e = unit_edges_(d, axis);
      if (e == 0.0) continue;
      G.noalias() += (e * rule_.weights).asDiagonal() * grad_nodes[static_cast<std::size_t>(d)];
    }
    return G;
  };
  // Contract the first grid axis for all fields in one product.
  const MatrixX G0 = projected(0);
  const MatrixX T0 = d0_.transpose() * Eigen::Map<const MatrixX>(G0.data(), n0_, n1_ * W);
  MatrixX T1;
  if (n == 2) {
    const MatrixX G1 = projected(1);
    T1 = p0_.transpose() * Eigen::Map<const MatrixX>(G1.data(), n0_, n1_ * W);
  }
  RowMajor R(k0, k1);
  for (Eigen::Index j = 0; j < W; ++j) {
    R.noalias() = T0.middleCols(j * n1_, n1_) * p1_;
    if (n == 2) R.noalias() += T1.middleCols(j * n1_, n1_) * d1_;
    R.array() *= inv_norm_.array();
    out.col(j) = Eigen::Map<const VectorX>(R.data(), R.size());
  }
  return out;
}

VectorX BoxBlock::load(const VectorX& f) const {
  const RowMajor R = -contract(MatrixX(), &f);
  return Eigen::Map<const VectorX>(R.data(), R.size()) + boundary_load_;
}

MatrixX BoxBlock::pair_adjoint(const VectorX& r_bar) const {
  const Eigen::Index k0 = inv_norm_.rows();
  const Eigen::Index k1 = inv_norm_.cols();
  if (r_bar.size() != k0 * k1) throw std::invalid_argument("adjoint size mismatch");
  const MatrixX Rb = Eigen::Map<const RowMajor>(r_bar.data(), k0, k1).cwiseProduct(inv_norm_);
  const int n = box_.dim();
  const Eigen::Index nq = rule_.size();
  VectorX g0(nq);
  VectorX g1 = VectorX::Zero(nq);
  if (tensor_) {
    Eigen::Map<MatrixX>(g0.data(), n0_, n1_) = d0_ * Rb * p1_.transpose();
    if (n == 2) Eigen::Map<MatrixX>(g1.data(), n0_, n1_) = p0_ * Rb * d1_.transpose();
  } else {
    g0 = ((d0_ * Rb).array() * p1_.array()).rowwise().sum().matrix();
    if (n == 2) g1 = ((p0_ * Rb).array() * d1_.array()).rowwise().sum().matrix();
  }
  g0.array() *= rule_.weights.array();
  g1.array() *= rule_.weights.array();
  MatrixX out = unit_edges_.col(0) * g0.transpose();
  if (n == 2) out.noalias() += unit_edges_.col(1) * g1.transpose();
  return out;
}

void BoxBlock::add_neumann_load(int face, const ScalarField& g, int cells) {
  const int n = box_.dim();
  if (face < 0 || face >= 2 * n) throw std::invalid_argument("face index out of range");
  if (box_.face_bc[static_cast<std::size_t>(face)] != FaceBc::Free)
    throw std::invalid_argument("Neumann data on a Dirichlet face");
  const int axis = face / 2;
  VectorX base = box_.corner;
  if (face % 2 == 1) base += box_.edges.col(axis);
  MatrixX pts;
  VectorX w;
  if (n == 1) {
    pts = base;
    w = VectorX::Ones(1);
  } else {
    if (cells < 1) throw std::invalid_argument("face quadrature needs at least one cell");
    const int other = 1 - axis;
    const Rule1d r = build_rule_1d(0.0, box_.side_length(other), GradingKind::Uniform, cells);
    pts = (box_.unit_edge(other) * r.nodes.transpose()).colwise() + base;
    w = r.weights;
  }
  const VectorX gv = g(pts);
  const auto ms = modes();
  for (std::size_t k = 0; k < ms.size(); ++k) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < pts.cols(); ++q) acc += w(q) * gv(q) * eval_mode(ms[k], box_, pts.col(q)).value;
    boundary_load_(static_cast<Eigen::Index>(k)) += acc;
  }
}

PairingVector pairings(const std::vector<BoxBlock>& blocks, const FieldFunction& u, const ScalarField& f) {
  PairingVector out;
  for (const auto& b : blocks) {
    const FieldSample s = u(b.rule().nodes);
    out.box_ids.push_back(b.box().id);
    out.values.push_back(b.pair(s.grad, f(b.rule().nodes)));
  }
  return out;
}

double pairwise_sum(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

LossBreakdown loss(const PairingVector& r, LossRole role) {
  LossBreakdown out;
  out.role = role;
  for (std::size_t i = 0; i < r.box_ids.size(); ++i) {
    const VectorX sq = r.values[i].array().square().matrix();
    out.per_box[r.box_ids[i]] += pairwise_sum(sq.data(), static_cast<std::size_t>(sq.size()));
  }
  std::vector<double> parts;
  for (const auto& [id, v] : out.per_box) parts.push_back(v);
  out.total = pairwise_sum(parts.data(), parts.size());
  return out;
}

std::string loss_to_json(const LossBreakdown& l, int indent) {
  nlohmann::ordered_json j;
  j["role"] = l.role == LossRole::Training ? "training" : "validation";
  nlohmann::ordered_json boxes = nlohmann::ordered_json::object();
  for (const auto& [id, v] : l.per_box) boxes[std::to_string(id)] = v;
  j["per_box"] = boxes;
  j["total"] = l.total;
  return j.dump(indent);
}

NodePool build_pool(const std::vector<BoxBlock>& blocks) {
  struct KeyHash {
    std::size_t operator()(const std::array<std::uint64_t, 2>& k) const {
      return std::hash<std::uint64_t>{}(k[0] * 0x9E3779B97F4A7C15ULL ^ k[1]);
    }
  };
  NodePool pool;
  if (blocks.empty()) return pool;
  const int n = blocks.front().box().dim();
  std::unordered_map<std::array<std::uint64_t, 2>, Eigen::Index, KeyHash> seen;
  std::vector<double> coords;
  Eigen::Index count = 0;
  for (const auto& b : blocks) {
    const MatrixX& nodes = b.rule().nodes;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(nodes.cols()));
    for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
      std::array<std::uint64_t, 2> key{0, 0};
      // +0.0 folds negative zero onto positive zero.
      for (int j = 0; j < n; ++j) key[j] = std::bit_cast<std::uint64_t>(nodes(j, q) + 0.0);
      auto [it, inserted] = seen.try_emplace(key, count);
      if (inserted) {
        for (int j = 0; j < n; ++j) coords.push_back(nodes(j, q));
        ++count;
      }
      idx[static_cast<std::size_t>(q)] = it->second;
    }
    pool.index.push_back(std::move(idx));
  }
  pool.nodes = Eigen::Map<MatrixX>(coords.data(), n, count);
  return pool;
}

MatrixX gram_matrix(const BoxBlock& block) {
  const auto ms = block.modes();
  const auto K = static_cast<Eigen::Index>(ms.size());
  const int n = block.box().dim();
  const auto& rule = block.rule();
  MatrixX G = MatrixX::Zero(K, K);
  MatrixX val(K, 1);
  MatrixX grad(n, K);
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const ModeEval e = eval_mode(ms[static_cast<std::size_t>(k)], block.box(), rule.nodes.col(q));
      val(k, 0) = e.value;
      grad.col(k) = e.gradient;
    }
    G.noalias() += rule.weights(q) * (val * val.transpose() + grad.transpose() * grad);
  }
  return G;
}

}  // namespace dfrdd
