#include "doctest.h"
#include "dfrdd/adaptivity.hpp"
#include "dfrdd/problems.hpp"

#include <cmath>
#include <numbers>

using namespace dfrdd;
using doctest::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

IndicatorTable table_of(std::vector<double> eps) {
  IndicatorTable t;
  for (double e : eps) {
    IndicatorEntry entry;
    entry.epsilon = e;
    t.entries.push_back(entry);
  }
  return t;
}

FieldFunction exact_field(const ManufacturedSolution& m) {
  return [m](const MatrixX& p) { return FieldSample{m.u(p), m.grad(p)}; };
}

BlockFactory overkill_factory(const QuadratureRule& rule) {
  return [rule](const BoxDomain& box, const std::vector<int>& modes, RuleRole) {
    return BoxBlock(box, modes, restrict_rule(rule, box));
  };
}
}  // namespace

TEST_CASE("marking") {
  const auto m = mark(table_of({1.0, 0.5, 0.7}), 0.66);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == 0);
  CHECK(m[1] == 2);
  CHECK(mark(table_of({1.0, 0.5, 0.7}), 1.0).empty());
  CHECK(mark(table_of({0.2, 0.2, 0.2}), 0.5).size() == 3);
}

TEST_CASE("candidate children are deduplicated") {
  const Cover c = make_hat_cover({0.0, kPi / 4, kPi / 2, 3 * kPi / 4, kPi});
  const auto kids = candidate_children(c);
  // Adjacent hats share halves: (pi/4, pi/2) is a child of both box 0 and box 1.
  CHECK(kids.size() < 9);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    for (std::size_t j = i + 1; j < kids.size(); ++j) CHECK_FALSE(same_region(kids[i].child, kids[j].child));
    for (const auto& b : c.boxes) CHECK_FALSE(same_region(kids[i].child, b));
  }
}

TEST_CASE("indicators vanish for the exact solution") {
  const CaseSpec s = case5();
  RefinementConfig cfg = *s.refinement;
  const IndicatorTable t = indicators(exact_field(s.exact), s.exact.f, s.cover, cfg, overkill_factory(s.overkill));
  REQUIRE(!t.entries.empty());
  CHECK(t.max() <= 1e-8);
}

TEST_CASE("a localised source dominates the child that contains it") {
  const CaseSpec s = case5();
  RefinementConfig cfg = *s.refinement;
  const FieldFunction zero = [](const MatrixX& p) {
    return FieldSample{VectorX::Zero(p.cols()), MatrixX::Zero(1, p.cols())};
  };
  const IndicatorTable t = indicators(zero, s.exact.f, s.cover, cfg, overkill_factory(s.overkill));
  // Children of (pi/4, 3pi/4); shared halves may be listed under a neighbouring parent.
  auto eps_of = [&](double lo, double hi) {
    for (const auto& e : t.entries) {
      const auto v = vertices(e.child);
      if (std::abs(v[0](0) - lo) < 1e-12 && std::abs(v[1](0) - hi) < 1e-12) return e.epsilon;
    }
    return -1.0;
  };
  const double centre = eps_of(3 * kPi / 8, 5 * kPi / 8);
  const std::vector<double> siblings{eps_of(kPi / 4, kPi / 2), eps_of(kPi / 2, 3 * kPi / 4)};
  // Reference values from trapezoidal sums with 2e5 panels per child.
  CHECK(centre == Approx(68.16718).epsilon(1e-4));
  for (double e : siblings) {
    CHECK(e == Approx(26.39404).epsilon(1e-4));
    CHECK(centre > e);
  }
}

TEST_CASE("indicator equals the child loss") {
  const CaseSpec s = case4();
  RefinementConfig cfg = *s.refinement;
  const Network net = init_params(s.arch, 4);
  const FieldFunction u = [&](const MatrixX& p) {
    const FieldEval e = forward_with_grad(net, s.cutoff, p);
    return FieldSample{e.u, e.grad};
  };
  const BlockFactory f = block_factory(s);
  const IndicatorTable t = indicators(u, s.exact.f, s.cover, cfg, f);
  for (const auto& e : t.entries) {
    const std::vector<BoxBlock> blk{f(e.child, cfg.modes_per_child, RuleRole::Training)};
    CHECK(loss(pairings(blk, u, s.exact.f)).total == e.epsilon);
  }
}

TEST_CASE("refinement loop") {
  const CaseSpec s = case4();
  TrainOptions o;
  o.lr = s.lr;
  o.val_every = 0;
  o.error_every = 0;

  RefinementConfig none = *s.refinement;
  none.max_ref = 0;
  none.final_iterations = 2;
  Trainer t0(init_params(s.arch, 0), s.cutoff, s.exact.f, o);
  const RefinementResult r0 = refine_loop(t0, s.cover, s.modes, none, block_factory(s));
  CHECK(r0.cover.boxes.size() == s.cover.boxes.size());
  CHECK(r0.history.size() == 3);

  RefinementConfig two = *s.refinement;
  two.max_ref = 2;
  two.iterations = 3;
  two.final_iterations = 2;
  Trainer t1(init_params(s.arch, 0), s.cutoff, s.exact.f, o);
  const RefinementResult r1 = refine_loop(t1, s.cover, s.modes, two, block_factory(s));
  CHECK(r1.history.size() == 2 * 3 + 2 + 1);
  CHECK(r1.tables.size() == 2);
  CHECK(r1.snapshots.size() == 3);
  for (std::size_t q = 1; q < r1.snapshots.size(); ++q) {
    CHECK(r1.snapshots[q].boxes.size() >= r1.snapshots[q - 1].boxes.size());
  }
  CHECK(r1.level_start == std::vector<long>{0, 3, 6});

  none.tau = 0.0;
  CHECK_THROWS(none.validate());
}
