#include "doctest.h"
#include "dfrdd/model.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace dfrdd;
using doctest::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

Cutoff bubble_1d() {
  return {[](const MatrixX& p) { return VectorX((p.row(0).array() * (kPi - p.row(0).array())).transpose()); },
          [](const MatrixX& p) { return MatrixX(kPi - 2.0 * p.array()); }};
}

Cutoff bubble_2d() {
  return {[](const MatrixX& p) {
            return VectorX((p.row(0).array() * (1 - p.row(0).array()) * p.row(1).array() * (1 - p.row(1).array()))
                               .transpose());
          },
          [](const MatrixX& p) {
            MatrixX g(2, p.cols());
            const auto x = p.row(0).array();
            const auto y = p.row(1).array();
            g.row(0) = ((1 - 2 * x) * y * (1 - y)).matrix();
            g.row(1) = (x * (1 - x) * (1 - 2 * y)).matrix();
            return g;
          }};
}

Architecture arch(int n) {
  Architecture a;
  a.input_dim = n;
  return a;
}
}  // namespace

TEST_CASE("parameter layout") {
  const Network net = init_params(arch(2), 3);
  CHECK(net.parameter_count() == 2 * 10 + 10 + 10 * 10 + 10 + 20 * 10 + 20 + 20);
  CHECK(net.trainable_count() == net.parameter_count() - 20);
  Network copy = Network::zeros(net.arch);
  copy.unflatten(net.flatten());
  CHECK(copy.flatten() == net.flatten());
  CHECK_THROWS(copy.unflatten(VectorX::Zero(3)));
}

TEST_CASE("initialisation") {
  const Network a = init_params(arch(1), 5);
  const Network b = init_params(arch(1), 5);
  const Network c = init_params(arch(1), 6);
  CHECK(a.flatten() == b.flatten());
  CHECK((a.flatten() - c.flatten()).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.weights[1].cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 20.0));
  for (const auto& bias : a.biases) CHECK(bias.norm() == 0.0);
}

TEST_CASE("zero network and constant network") {
  MatrixX x(1, 5);
  x << 0.1, 0.7, 1.5, 2.2, 3.0;
  const Network zero = Network::zeros(arch(1));
  const FieldEval z = forward_with_grad(zero, bubble_1d(), x);
  CHECK(z.u.norm() == 0.0);
  CHECK(z.grad.norm() == 0.0);

  // Hidden weights zero, last biases chosen so every unit equals 1/2.
  Network one = Network::zeros(arch(1));
  one.biases.back().setConstant(std::atanh(0.5));
  one.set_output_weights(VectorX::Constant(20, 2.0 / 20.0));
  const FieldEval u = forward_with_grad(one, bubble_1d(), x);
  for (Eigen::Index q = 0; q < x.cols(); ++q) {
    CHECK(u.u(q) == Approx(x(0, q) * (kPi - x(0, q))));
    CHECK(u.grad(0, q) == Approx(kPi - 2 * x(0, q)));
  }

  const FeatureEval f = hidden_features(one, bubble_1d(), x);
  Eigen::ColPivHouseholderQR<MatrixX> qr(f.value);
  CHECK(qr.rank() == 1);

  Network nan = one;
  nan.weights[0](0, 0) = std::nan("");
  CHECK_THROWS_WITH(forward_hidden(nan, x), "diverged parameters");
}

TEST_CASE("features vanish on the Dirichlet boundary") {
  MatrixX edge(2, 4);
  edge << 0.0, 1.0, 0.3, 0.6, 0.5, 0.2, 0.0, 1.0;
  const FeatureEval f = hidden_features(init_params(arch(2), 1), bubble_2d(), edge);
  CHECK(f.value.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("input gradient matches finite differences") {
  const Network net = init_params(arch(2), 11);
  MatrixX x(2, 3);
  x << 0.2, 0.5, 0.9, 0.7, 0.4, 0.1;
  const FieldEval e = forward_with_grad(net, bubble_2d(), x);
  const double h = 1e-6;
  for (int d = 0; d < 2; ++d) {
    MatrixX xp = x, xm = x;
    xp.row(d).array() += h;
    xm.row(d).array() -= h;
    const VectorX fd = (forward_with_grad(net, bubble_2d(), xp).u - forward_with_grad(net, bubble_2d(), xm).u) / (2 * h);
    for (Eigen::Index q = 0; q < 3; ++q) CHECK(e.grad(d, q) == Approx(fd(q)).epsilon(1e-6));
  }
}

TEST_CASE("backward pass matches finite differences across chunks") {
  Network net = init_params(arch(2), 2);
  for (auto& b : net.biases) b.setRandom();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Eigen::Index N = 2500;
  MatrixX x(2, N);
  for (Eigen::Index q = 0; q < N; ++q) x.col(q) << U(rng), U(rng);
  // J = sum a .* h + sum b_d .* tangent_d on the last hidden layer.
  const MatrixX a = MatrixX::Random(20, N);
  const std::vector<MatrixX> b{MatrixX::Random(20, N), MatrixX::Random(20, N)};
  auto J = [&](const Network& n) {
    const ForwardPass p = forward_hidden(n, x);
    const auto& last = p.layers.back();
    return (a.array() * last.h.array()).sum() + (b[0].array() * last.tangent[0].array()).sum() +
           (b[1].array() * last.tangent[1].array()).sum();
  };
  const VectorX g = backward_hidden(net, x, forward_hidden(net, x), a, b);
  REQUIRE(g.size() == net.trainable_count());
  const VectorX theta = net.flatten();
  std::mt19937_64 pick(9);
  for (int trial = 0; trial < 15; ++trial) {
    const auto i = static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(g.size()));
    const double h = 1e-5;
    Network p = net, m = net;
    VectorX tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    p.unflatten(tp);
    m.unflatten(tm);
    const double fd = (J(p) - J(m)) / (2 * h);
    CHECK(g(i) == Approx(fd).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("output pull-back is the adjoint of combine") {
  const Network net = init_params(arch(2), 8);
  MatrixX x(2, 6);
  x.setRandom();
  x = (x.array() + 1.0) / 2.0;
  const CutoffValues chi = evaluate_cutoff(bubble_2d(), x);
  const VectorX w = net.output_weights();
  const VectorX ub = VectorX::Random(6);
  const MatrixX gb = MatrixX::Random(2, 6);
  const HiddenAdjoint adj = pull_back_output(w, chi, ub, gb);
  // <u_bar, du> + <g_bar, dgrad> = <h_bar, dh> + sum <t_bar, dt> for random feature perturbations.
  FeatureEval dr;
  dr.value = MatrixX::Random(20, 6);
  dr.grad = {MatrixX::Random(20, 6), MatrixX::Random(20, 6)};
  const FieldEval du = combine(apply_cutoff(dr, chi), w);
  const double lhs = ub.dot(du.u) + (gb.array() * du.grad.array()).sum();
  const double rhs = (adj.h_bar.array() * dr.value.array()).sum() +
                     (adj.tangent_bar[0].array() * dr.grad[0].array()).sum() +
                     (adj.tangent_bar[1].array() * dr.grad[1].array()).sum();
  CHECK(lhs == Approx(rhs).epsilon(1e-12));
}

TEST_CASE("parameter files round trip") {
  const Network net = init_params(arch(2), 21);
  const auto dir = std::filesystem::temp_directory_path() / "dfrdd_params_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "params").string();
  save_params(net, prefix);
  const Network back = load_params(prefix);
  CHECK(back.flatten() == net.flatten());
  std::filesystem::remove_all(dir);
}
