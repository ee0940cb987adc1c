#include "doctest.h"
#include "dfrdd/residual.hpp"

#include <cmath>
#include <numbers>

using namespace dfrdd;
using doctest::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

QuadratureRule fine_rule(const BoxDomain& box, int cells) {
  GradingSpec s;
  s.count.assign(static_cast<std::size_t>(box.dim()), cells);
  return build_rule(box, s, RuleRole::Overkill);
}

ScalarField constant(double c) {
  return [c](const MatrixX& p) { return VectorX::Constant(p.cols(), c); };
}

FieldFunction zero_field() {
  return [](const MatrixX& p) { return FieldSample{VectorX::Zero(p.cols()), MatrixX::Zero(p.rows(), p.cols())}; };
}
}  // namespace

TEST_CASE("pairing of the zero field with a constant source") {
  const BoxDomain box = interval(0, 0.0, kPi);
  const std::vector<BoxBlock> blocks{BoxBlock(box, {3}, fine_rule(box, 4000))};
  const PairingVector r = pairings(blocks, zero_field(), constant(1.0));
  REQUIRE(r.values.size() == 1);
  // r = b(u, Phi) - l(Phi), so the load enters with a negative sign.
  CHECK(r.values[0](0) == Approx(-2.0 / std::sqrt(kPi)).epsilon(1e-6));
  CHECK(std::abs(r.values[0](1)) < 1e-10);
}

TEST_CASE("pairing of a mode with itself") {
  const BoxDomain box = interval(0, 0.0, kPi);
  const std::vector<BoxBlock> blocks{BoxBlock(box, {4}, fine_rule(box, 4000))};
  const ModeIndex m1 = mode_set(box, {1})[0];
  const FieldFunction phi = [&](const MatrixX& p) {
    FieldSample s{VectorX(p.cols()), MatrixX(1, p.cols())};
    for (Eigen::Index q = 0; q < p.cols(); ++q) {
      const ModeEval e = eval_mode(m1, box, p.col(q));
      s.u(q) = e.value;
      s.grad(0, q) = e.gradient(0);
    }
    return s;
  };
  const VectorX r = pairings(blocks, phi, constant(0.0)).values[0];
  CHECK(r(0) == Approx(0.5).epsilon(1e-6));
  CHECK(r.tail(3).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("loss arithmetic") {
  PairingVector r;
  r.box_ids = {0};
  r.values = {VectorX::Zero(3)};
  CHECK(loss(r).total == 0.0);
  r.values[0] = VectorX(2);
  r.values[0] << 0.5, 0.0;
  const LossBreakdown one = loss(r);
  CHECK(one.per_box.at(0) == Approx(0.25));
  CHECK(one.total == Approx(0.25));

  PairingVector two;
  two.box_ids = {3, 7};
  two.values = {VectorX::Constant(1, std::sqrt(0.1)), VectorX::Constant(1, std::sqrt(0.3))};
  CHECK(loss(two).total == Approx(0.4));

  const std::vector<double> tenths(1000000, 0.1);
  CHECK(std::abs(pairwise_sum(tenths.data(), tenths.size()) - 1e5) < 1e-8);
}

TEST_CASE("sum factorisation agrees with the per-node path") {
  MatrixX e(2, 2);
  e << 1.0, 1.0, -1.0, 1.0;
  const BoxDomain rot = make_box(0, VectorX::Zero(2), e);
  const QuadratureRule tensor = fine_rule(rot, 30);
  // Drop the layout to force the scattered path on the same nodes.
  QuadratureRule scattered = tensor;
  scattered.layout.reset();
  const BoxBlock a(rot, {4, 3}, tensor);
  const BoxBlock b(rot, {4, 3}, scattered);
  CHECK(a.tensor());
  CHECK_FALSE(b.tensor());
  MatrixX g = MatrixX::Random(2, tensor.size());
  const VectorX f = VectorX::Random(tensor.size());
  CHECK((a.pair(g, f) - b.pair(g, f)).norm() < 1e-12 * (1.0 + a.pair(g, f).norm()));

  const std::vector<MatrixX> cols{MatrixX::Random(tensor.size(), 3), MatrixX::Random(tensor.size(), 3)};
  const MatrixX batch = a.pair_gradient_columns(cols);
  const MatrixX batch_b = b.pair_gradient_columns(cols);
  for (Eigen::Index j = 0; j < 3; ++j) {
    MatrixX gj(2, tensor.size());
    gj.row(0) = cols[0].col(j).transpose();
    gj.row(1) = cols[1].col(j).transpose();
    CHECK((batch.col(j) - a.pair_gradient(gj)).norm() < 1e-12 * (1.0 + batch.col(j).norm()));
    CHECK((batch_b.col(j) - a.pair_gradient(gj)).norm() < 1e-12 * (1.0 + batch.col(j).norm()));
  }
}

TEST_CASE("adjoint of the pairing") {
  const BoxDomain box = axis_box(0, VectorX::Zero(2), VectorX::Constant(2, 1.0));
  const BoxBlock blk(box, {3, 5}, fine_rule(box, 17));
  const MatrixX g = MatrixX::Random(2, blk.node_count());
  const VectorX rb = VectorX::Random(blk.mode_count());
  const double lhs = rb.dot(blk.pair_gradient(g));
  const double rhs = (blk.pair_adjoint(rb).array() * g.array()).sum();
  CHECK(lhs == Approx(rhs).epsilon(1e-12));
}

TEST_CASE("gram matrix is the identity") {
  const BoxDomain box = axis_box(0, VectorX::Zero(2), (VectorX(2) << 2.0, 1.0).finished());
  const BoxBlock blk(box, {4, 3}, fine_rule(box, 400));
  const MatrixX G = gram_matrix(blk);
  CHECK((G - MatrixX::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("node pool deduplicates shared nodes") {
  const BoxDomain whole = interval(0, 0.0, 1.0);
  GradingSpec s;
  s.count = {8};
  const QuadratureRule r = build_rule(whole, s);
  std::vector<BoxBlock> blocks{BoxBlock(interval(0, 0.0, 0.75), {2}, restrict_rule(r, interval(0, 0.0, 0.75))),
                               BoxBlock(interval(1, 0.25, 1.0), {2}, restrict_rule(r, interval(1, 0.25, 1.0)))};
  const NodePool pool = build_pool(blocks);
  CHECK(pool.nodes.cols() == 8);
  CHECK(pool.index[0].size() == 6);
  CHECK(pool.index[1].size() == 6);
}

TEST_CASE("Neumann loads only on free faces") {
  BoxDomain box = make_box(0, VectorX::Zero(1), MatrixX::Constant(1, 1, 1.0), {FaceBc::Dirichlet, FaceBc::Free});
  BoxBlock blk(box, {2}, fine_rule(box, 100));
  CHECK_THROWS(blk.add_neumann_load(0, constant(1.0), 1));
  blk.add_neumann_load(1, constant(1.0), 1);
  // g Phi_k(1) with Phi_k the D0 modes normalised in H1.
  const auto modes = blk.modes();
  for (int k = 0; k < 2; ++k) {
    const double v = eval_mode(modes[static_cast<std::size_t>(k)], box, VectorX::Constant(1, 1.0)).value;
    CHECK(blk.boundary_load()(k) == Approx(v));
  }
}
