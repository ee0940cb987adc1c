#include "doctest.h"
#include "dfrdd/quadrature.hpp"

#include <cmath>
#include <numbers>

using namespace dfrdd;
using doctest::Approx;

TEST_CASE("midpoint rules") {
  const Rule1d u = build_rule_1d(0.0, 1.0, GradingKind::Uniform, 2);
  REQUIRE(u.nodes.size() == 2);
  CHECK(u.nodes(0) == Approx(0.25));
  CHECK(u.nodes(1) == Approx(0.75));
  CHECK(u.weights(0) == Approx(0.5));

  const Rule1d g = build_rule_1d(0.0, 1.0, GradingKind::Geometric, 3, 0.5, 0.0);
  REQUIRE(g.nodes.size() == 3);
  CHECK(g.weights(0) == Approx(1.0 / 7));
  CHECK(g.weights(1) == Approx(2.0 / 7));
  CHECK(g.weights(2) == Approx(4.0 / 7));
  CHECK(g.nodes(0) == Approx(1.0 / 14));
  CHECK(g.nodes(1) == Approx(2.0 / 7));
  CHECK(g.nodes(2) == Approx(5.0 / 7));
  CHECK(g.weights.sum() == Approx(1.0));

  CHECK_THROWS(build_rule_1d(0.0, 1.0, GradingKind::Uniform, 0));
  CHECK_THROWS(build_rule_1d(0.0, 1.0, GradingKind::Geometric, 4, 1.0, 0.0));
}

TEST_CASE("interior focus grades both sides towards it") {
  const double c = std::numbers::pi / 2;
  const Rule1d g = build_rule_1d(0.0, std::numbers::pi, GradingKind::Geometric, 100, 0.9, c);
  CHECK(g.weights.sum() == Approx(std::numbers::pi));
  Eigen::Index closest = 0;
  (g.nodes.array() - c).abs().minCoeff(&closest);
  CHECK(g.weights(closest) == Approx(g.weights.minCoeff()));
  CHECK(g.weights(0) > g.weights(closest));
  CHECK(g.weights(g.nodes.size() - 1) > g.weights(closest));
}

TEST_CASE("tensor rule and restriction") {
  VectorX lo = VectorX::Zero(2), hi = VectorX::Ones(2);
  GradingSpec s;
  s.count = {2, 2};
  const QuadratureRule r = build_rule(axis_box(0, lo, hi), s);
  REQUIRE(r.size() == 4);
  for (Eigen::Index q = 0; q < 4; ++q) CHECK(r.weights(q) == Approx(0.25));

  GradingSpec s1;
  s1.count = {4};
  const QuadratureRule line = build_rule(interval(0, 0.0, 1.0), s1);
  const QuadratureRule half = restrict_rule(line, interval(1, 0.0, 0.5));
  REQUIRE(half.size() == 2);
  CHECK(half.nodes(0, 0) == Approx(0.125));
  CHECK(half.nodes(0, 1) == Approx(0.375));
  CHECK_THROWS_WITH(restrict_rule(line, interval(2, 2.0, 3.0)), "subdomain contains no integration points");
}

TEST_CASE("validation counts") {
  GradingSpec s;
  s.count = {100};
  CHECK(validation_counterpart(s).count[0] == 217);
  s.count = {1};
  CHECK(validation_counterpart(s).count[0] == 3);
  s.count = {500, 250};
  const auto v = validation_counterpart(s).count;
  CHECK(v[0] == 1085);
  CHECK(v[1] == 543);
}

TEST_CASE("rotated rule integrates the box measure") {
  MatrixX e(2, 2);
  e << 1.0, 1.0, -1.0, 1.0;
  const BoxDomain box = make_box(0, VectorX::Zero(2), e);
  GradingSpec s;
  s.count = {10, 10};
  const QuadratureRule r = build_rule(box, s);
  CHECK(r.total_weight() == Approx(2.0));
  for (Eigen::Index q = 0; q < r.size(); ++q) CHECK(contains(box, r.nodes.col(q)));
}
