#include "doctest.h"
#include "dfrdd/basis.hpp"

#include <cmath>
#include <numbers>

using namespace dfrdd;
using doctest::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

// Composite Simpson on (a, b) with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}
}  // namespace

TEST_CASE("axis eigenfunctions") {
  const auto e1 = eval_axis(AxisVariant::DD, 1, 0.0, kPi, kPi / 2);
  CHECK(e1.phi == Approx(std::sqrt(2.0 / kPi)));
  CHECK(e1.dphi == Approx(0.0).epsilon(1e-12));
  CHECK(e1.lambda == Approx(1.0));

  const auto e2 = eval_axis(AxisVariant::DD, 2, 0.0, kPi, kPi / 2);
  CHECK(std::abs(e2.phi) < 1e-12);
  CHECK(e2.lambda == Approx(4.0));

  const auto c = eval_axis(AxisVariant::Free, 1, 0.0, 1.0, 0.3);
  CHECK(c.phi == Approx(1.0));
  CHECK(c.dphi == 0.0);
  CHECK(c.lambda == 0.0);

  CHECK_THROWS(eval_axis(AxisVariant::DD, 0, 0.0, 1.0, 0.5));
  CHECK_THROWS(eval_axis(AxisVariant::DD, 1, 1.0, 1.0, 0.5));
}

TEST_CASE("axis eigenfunctions are L2 orthonormal with matching eigenvalues") {
  for (auto v : {AxisVariant::DD, AxisVariant::D0, AxisVariant::ZeroD, AxisVariant::Free}) {
    for (int j = 1; j <= 3; ++j) {
      for (int k = 1; k <= 3; ++k) {
        const double m = simpson(
            [&](double x) { return eval_axis(v, j, 0.5, 2.0, x).phi * eval_axis(v, k, 0.5, 2.0, x).phi; }, 0.5, 2.0);
        CHECK(m == Approx(j == k ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
      }
      const double s = simpson([&](double x) { return std::pow(eval_axis(v, j, 0.5, 2.0, x).dphi, 2); }, 0.5, 2.0);
      CHECK(s == Approx(eval_axis(v, j, 0.5, 2.0, 1.0).lambda).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("boundary variants vanish on Dirichlet ends") {
  CHECK(std::abs(eval_axis(AxisVariant::D0, 3, 0.0, 1.0, 0.0).phi) < 1e-10);
  CHECK(std::abs(eval_axis(AxisVariant::ZeroD, 3, 0.0, 1.0, 1.0).phi) < 1e-10);
  CHECK(std::abs(eval_axis(AxisVariant::DD, 4, 0.0, 1.0, 1.0).phi) < 1e-10);
  CHECK(axis_variant(FaceBc::Dirichlet, FaceBc::Free) == AxisVariant::D0);
  CHECK(axis_variant(FaceBc::Free, FaceBc::Free) == AxisVariant::Free);
}

TEST_CASE("tensor modes") {
  VectorX lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << kPi, 2.0;
  const BoxDomain box = axis_box(0, lo, hi);
  const auto modes = mode_set(box, {3, 2});
  REQUIRE(modes.size() == 6);
  CHECK(modes[1].k[0] == 1);
  CHECK(modes[1].k[1] == 2);
  CHECK(modes[2].k[0] == 2);

  const double lam = 4.0 + kPi * kPi;
  CHECK(mode_norm(modes[3], box) == Approx(std::sqrt(1.0 + lam)));

  VectorX out(2);
  out << 4.0, 1.0;
  const ModeEval far = eval_mode(modes[0], box, out);
  CHECK(far.value == 0.0);
  CHECK(far.gradient.norm() == 0.0);

  VectorX edge(2);
  edge << 0.0, 1.3;
  CHECK(std::abs(eval_mode(modes[4], box, edge).value) < 1e-10);
}

TEST_CASE("mode gradient matches finite differences on a rotated box") {
  MatrixX e(2, 2);
  e << 1.0, 1.0, -1.0, 1.0;
  VectorX corner = VectorX::Zero(2);
  const BoxDomain box = make_box(0, corner, e);
  const auto modes = mode_set(box, {2, 3});
  VectorX x(2);
  x << 0.9, 0.2;
  const double h = 1e-6;
  for (const auto& m : modes) {
    const ModeEval ev = eval_mode(m, box, x);
    for (int d = 0; d < 2; ++d) {
      VectorX xp = x, xm = x;
      xp(d) += h;
      xm(d) -= h;
      const double fd = (eval_mode(m, box, xp).value - eval_mode(m, box, xm).value) / (2 * h);
      CHECK(ev.gradient(d) == Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}
