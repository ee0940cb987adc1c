#include "doctest.h"
#include "dfrdd/optimizer.hpp"
#include "dfrdd/problems.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace dfrdd;
using doctest::Approx;

namespace {
Discretization case4_disc() {
  const CaseSpec s = case4();
  return Discretization(make_blocks(s.cover, s.modes, RuleRole::Training, block_factory(s)), s.cutoff, s.exact.f);
}

LsSystem sys_of(MatrixX A, VectorX b) {
  LsSystem s;
  s.A = std::move(A);
  s.b = std::move(b);
  s.row_offsets = {0};
  return s;
}
}  // namespace

TEST_CASE("least squares examples") {
  CHECK((ls_solve(sys_of(MatrixX::Identity(2, 2), (VectorX(2) << 3, -1).finished()), 0.0) -
         (VectorX(2) << 3, -1).finished())
            .norm() < 1e-14);
  CHECK(ls_solve(sys_of(MatrixX::Ones(2, 1), (VectorX(2) << 1, 3).finished()), 0.0)(0) == Approx(2.0));
  CHECK(ls_solve(sys_of(MatrixX::Zero(3, 2), VectorX::Ones(3)), 1e-8).norm() == 0.0);
  CHECK_THROWS_WITH(ls_solve(sys_of(MatrixX::Ones(3, 2), VectorX::Ones(3)), 0.0),
                    "rank-deficient feature matrix; increase ridge");
  CHECK_THROWS(ls_solve(sys_of(MatrixX::Identity(2, 2), VectorX::Ones(2)), -1.0));
}

TEST_CASE("ridge solution satisfies the regularised normal equations") {
  const MatrixX A = MatrixX::Random(30, 6);
  const VectorX b = VectorX::Random(30);
  const double ridge = 0.3;
  const VectorX w = ls_solve(sys_of(A, b), ridge);
  const VectorX res = A.transpose() * (A * w - b) + ridge * w;
  CHECK(res.norm() < 1e-12 * (A.transpose() * b).norm());
  CHECK(default_ridge(sys_of(A, b)) == Approx(1e-10 * A.squaredNorm() / 6));
}

TEST_CASE("adam") {
  AdamState s = AdamState::zeros(3, 0.01);
  VectorX theta = (VectorX(3) << 1.0, -2.0, 0.5).finished();
  const VectorX start = theta;
  adam_step(s, theta, VectorX::Zero(3));
  CHECK(theta == start);

  AdamState one = AdamState::zeros(1, 0.01);
  VectorX x = VectorX::Zero(1);
  adam_step(one, x, VectorX::Ones(1));
  CHECK(x(0) == Approx(-0.01 / (1.0 + 1e-8)));

  AdamState mixed = AdamState::zeros(3, 0.01);
  VectorX y = VectorX::Zero(3);
  const VectorX g = (VectorX(3) << 2.0, -0.5, 1e-3).finished();
  adam_step(mixed, y, g);
  for (int i = 0; i < 3; ++i) CHECK(y(i) * g(i) < 0.0);
}

TEST_CASE("assembled residuals agree with direct pairing of the field") {
  const CaseSpec s = case4();
  const Discretization disc = case4_disc();
  Network net = init_params(s.arch, 3);
  const LsSystem sys = disc.assemble(disc.features(net));
  net.set_output_weights(ls_solve(sys, default_ridge(sys)));
  const PairingVector a = disc.residuals(sys, net.output_weights());
  const FieldEval field = forward_with_grad(net, s.cutoff, disc.pool().nodes);
  const PairingVector b = disc.residuals(field.grad);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK((a.values[i] - b.values[i]).norm() < 1e-9 * (1.0 + a.values[i].norm()));
  }
}

TEST_CASE("unit with zero outgoing weight gets no incoming gradient") {
  const Discretization disc = case4_disc();
  Network net = init_params(case4().arch, 1);
  VectorX w = net.output_weights();
  w(4) = 0.0;
  net.set_output_weights(w);
  const VectorX g = loss_gradient(net, disc).gradient;
  // Last hidden layer: 20 x 10 weights then 20 biases.
  Eigen::Index off = 0;
  for (int l = 0; l + 1 < static_cast<int>(net.biases.size()); ++l) off += net.weights[static_cast<std::size_t>(l)].size() + net.biases[static_cast<std::size_t>(l)].size();
  const auto& W = net.weights[net.biases.size() - 1];
  for (Eigen::Index c = 0; c < W.cols(); ++c) CHECK(g(off + 4 + c * W.rows()) == 0.0);
  CHECK(g(off + W.size() + 4) == 0.0);
}

TEST_CASE("loss gradient matches central differences") {
  const Discretization disc = case4_disc();
  Network net = init_params(case4().arch, 2);
  const LsSystem sys = disc.assemble(disc.features(net));
  net.set_output_weights(ls_solve(sys, default_ridge(sys)));
  const LossAndGradient lg = loss_gradient(net, disc);
  CHECK(lg.loss == Approx(loss_value(net, disc)));
  const VectorX theta = net.flatten();
  std::mt19937_64 rng(5);
  VectorX fd(10), an(10);
  for (int k = 0; k < 10; ++k) {
    const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(lg.gradient.size()));
    const double h = 1e-4;
    auto at = [&](double step) {
      Network p = net;
      VectorX t = theta;
      t(i) += step;
      p.unflatten(t);
      return loss_value(p, disc);
    };
    fd(k) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    an(k) = lg.gradient(i);
  }
  CHECK((fd - an).norm() <= 1e-5 * an.norm());
}

TEST_CASE("trainer history") {
  const CaseSpec s = case4();
  TrainOptions o;
  o.lr = s.lr;
  o.error_every = 0;
  auto make = [&] {
    Trainer t(init_params(s.arch, 0), s.cutoff, s.exact.f, o);
    t.set_blocks(make_blocks(s.cover, s.modes, RuleRole::Training, block_factory(s)),
                 make_blocks(s.cover, s.modes, RuleRole::Validation, block_factory(s)));
    return t;
  };
  Trainer zero = make();
  const auto rows0 = zero.train(0);
  REQUIRE(rows0.size() == 1);
  CHECK(rows0[0].iteration == 0);
  CHECK(std::isfinite(rows0[0].val_loss));

  Trainer a = make();
  Trainer b = make();
  const auto ra = a.train(5);
  const auto rb = b.train(5);
  REQUIRE(ra.size() == 6);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].iteration == static_cast<long>(i));
    CHECK(ra[i].train_loss == rb[i].train_loss);
  }
  const auto more = a.train(2, false);
  REQUIRE(more.size() == 2);
  CHECK(more[0].iteration == 6);
  CHECK(a.iteration() == 7);
  CHECK_THROWS(a.train(-1));
}

TEST_CASE("history csv") {
  std::ostringstream os;
  HistoryRow r;
  r.iteration = 3;
  r.train_loss = 0.5;
  write_history_csv({r}, os);
  CHECK(os.str() == "iteration,train_loss,val_loss,rel_h1_error_pct\n3,0.5,,\n");
}
