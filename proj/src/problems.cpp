#include "dfrdd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace dfrdd {

namespace {

constexpr double kPi = std::numbers::pi;

// Value, gradient and Laplacian of a scalar function at one point.
struct Jet {
  double v = 0.0;
  double gx = 0.0;
  double gy = 0.0;
  double lap = 0.0;
};

Jet operator*(const Jet& a, const Jet& b) {
  return {a.v * b.v, a.v * b.gx + b.v * a.gx, a.v * b.gy + b.v * a.gy,
          a.v * b.lap + b.v * a.lap + 2.0 * (a.gx * b.gx + a.gy * b.gy)};
}

using JetFn = std::function<Jet(const VectorX&)>;

ManufacturedSolution from_jet(JetFn jet, std::string notes) {
  auto shared = std::make_shared<JetFn>(std::move(jet));
  ManufacturedSolution m;
  m.u = [shared](const MatrixX& p) {
    VectorX out(p.cols());
    for (Eigen::Index q = 0; q < p.cols(); ++q) out(q) = (*shared)(p.col(q)).v;
    return out;
  };
  m.grad = [shared](const MatrixX& p) {
    MatrixX out(p.rows(), p.cols());
    for (Eigen::Index q = 0; q < p.cols(); ++q) {
      const Jet j = (*shared)(p.col(q));
      out(0, q) = j.gx;
      if (p.rows() > 1) out(1, q) = j.gy;
    }
    return out;
  };
  m.f = [shared](const MatrixX& p) {
    VectorX out(p.cols());
    for (Eigen::Index q = 0; q < p.cols(); ++q) out(q) = -(*shared)(p.col(q)).lap;
    return out;
  };
  m.notes = std::move(notes);
  return m;
}

Cutoff cutoff_from_jet(JetFn jet) {
  auto shared = std::make_shared<JetFn>(std::move(jet));
  const ManufacturedSolution m = from_jet(
      [shared](const VectorX& x) { return (*shared)(x); }, "");
  return {m.u, m.grad};
}

// Pentagon cutoff s(x,y) = (x+1)(1-y^2)(x-y-2)(x+y-2).
Jet pentagon_s(const VectorX& p) {
  const double x = p(0);
  const double y = p(1);
  const Jet a{x + 1.0, 1.0, 0.0, 0.0};
  const Jet b{1.0 - y * y, 0.0, -2.0 * y, -2.0};
  const Jet c{x - y - 2.0, 1.0, -1.0, 0.0};
  const Jet d{x + y - 2.0, 1.0, 1.0, 0.0};
  return a * b * c * d;
}

Jet lshape_poly(const VectorX& p) {
  const double x = p(0);
  const double y = p(1);
  return Jet{x * x - 1.0, 2.0 * x, 0.0, 2.0} * Jet{y * y - 1.0, 0.0, 2.0 * y, 2.0};
}

// r^a sin(2/3 (theta - pi)); harmonic away from the origin when a = 2/3.
Jet corner_power(const VectorX& p, double a) {
  const double x = p(0);
  const double y = p(1);
  const double r = std::hypot(x, y);
  if (r == 0.0) return {};
  const double th = std::atan2(y, x);
  const double phi = 2.0 / 3.0 * (th - kPi);
  const double ra = std::pow(r, a);
  const double g_r = a * ra / r * std::sin(phi);
  const double g_t = 2.0 / 3.0 * ra / r * std::cos(phi);  // (1/r) dg/dtheta
  const double c = std::cos(th);
  const double s = std::sin(th);
  const double lap = (a * a - 4.0 / 9.0) * ra / (r * r) * std::sin(phi);
  return {ra * std::sin(phi), g_r * c - g_t * s, g_r * s + g_t * c, lap};
}

Jet lshape_singular(const VectorX& p) { return corner_power(p, 2.0 / 3.0); }

Cutoff interval_cutoff() {
  return cutoff_from_jet([](const VectorX& p) {
    const double x = p(0);
    return Jet{x * (kPi - x), kPi - 2.0 * x, 0.0, -2.0};
  });
}

QuadratureRule masked(const QuadratureRule& rule, const Cover& cover) {
  const auto mask = cover.domain_mask(rule.nodes);
  const auto keep = static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), true));
  QuadratureRule out;
  out.role = rule.role;
  out.nodes.resize(rule.dim(), keep);
  out.weights.resize(keep);
  Eigen::Index k = 0;
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    if (!mask[static_cast<std::size_t>(q)]) continue;
    out.nodes.col(k) = rule.nodes.col(q);
    out.weights(k) = rule.weights(q);
    ++k;
  }
  return out;
}

GradingSpec geometric(VectorX focus, double ratio, std::vector<int> count) {
  GradingSpec g;
  g.kind = GradingKind::Geometric;
  g.focus = std::move(focus);
  g.ratio = ratio;
  g.count = std::move(count);
  return g;
}

GradingSpec uniform(std::vector<int> count) {
  GradingSpec g;
  g.count = std::move(count);
  return g;
}

VectorX vec(std::initializer_list<double> v) {
  VectorX out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

BoxDomain box2(int id, double x0, double x1, double y0, double y1, int level = 0,
               std::optional<int> parent = std::nullopt) {
  MatrixX e = MatrixX::Zero(2, 2);
  e(0, 0) = x1 - x0;
  e(1, 1) = y1 - y0;
  return make_box(id, vec({x0, y0}), e, {}, level, parent);
}

// Cells per axis for a box: the longer side receives the larger count.
std::vector<int> oriented(const BoxDomain& box, const std::vector<int>& counts) {
  if (box.dim() == 1) return {counts.at(0)};
  const int a = counts.at(0);
  const int b = counts.size() > 1 ? counts[1] : counts[0];
  const double l0 = box.side_length(0);
  const double l1 = box.side_length(1);
  if (std::abs(l0 - l1) <= 1e-12 * std::max(l0, l1)) return {a, b};
  return l0 > l1 ? std::vector<int>{std::max(a, b), std::min(a, b)}
                 : std::vector<int>{std::min(a, b), std::max(a, b)};
}

ManufacturedSolution lshape_solution() {
  return from_jet([](const VectorX& p) { return lshape_poly(p) * lshape_singular(p); },
                  "gradient singular at the re-entrant corner (0,0)");
}

Cutoff lshape_cutoff() {
  // The r^{1/3} factor keeps chi * N in H^1 when N(0) != 0; N still has to
  // supply the remaining r^{1/3}.
  return cutoff_from_jet([](const VectorX& p) { return lshape_poly(p) * corner_power(p, 1.0 / 3.0); });
}

Cover lshape_cover() {
  Cover c;
  c.boxes = {box2(0, -1.0, 1.0, 0.0, 1.0), box2(1, 0.0, 1.0, -1.0, 1.0)};
  c.base = {0, 1};
  return c;
}

QuadratureRule lshape_overkill(const Cover& cover) {
  const BoxDomain square = box2(0, -1.0, 1.0, -1.0, 1.0);
  return masked(build_rule(square, geometric(vec({0.0, 0.0}), 0.97, {500, 500}), RuleRole::Overkill), cover);
}

ManufacturedSolution case4_solution() {
  constexpr double a = 0.7;
  return from_jet(
      [](const VectorX& p) {
        const double x = p(0);
        const double xa = std::pow(x, a);
        const double d1 = a * std::pow(x, a - 1.0) * (kPi - x) - xa;
        const double d2 = a * (a - 1.0) * std::pow(x, a - 2.0) * (kPi - x) - 2.0 * a * std::pow(x, a - 1.0);
        return Jet{xa * (kPi - x), d1, 0.0, d2};
      },
      "u* = x^0.7 (pi - x); derivative infinite at x = 0");
}

ManufacturedSolution case5_solution() {
  return from_jet(
      [](const VectorX& p) {
        const double x = p(0);
        const double t = x - kPi / 2.0;
        const double g = std::exp(-120.0 * t * t);
        const Jet poly{x * (x - kPi), 2.0 * x - kPi, 0.0, 2.0};
        const Jet bump{g, -240.0 * t * g, 0.0, (-240.0 + 57600.0 * t * t) * g};
        return poly * bump;
      },
      "sharp peak at pi/2");
}

CaseSpec interval_case(int id, std::string name, ManufacturedSolution exact, double focus, double ratio,
                       double overkill_ratio) {
  CaseSpec s;
  s.id = id;
  s.name = std::move(name);
  s.arch.input_dim = 1;
  s.cover = make_hat_cover({0.0, kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0, kPi});
  for (const auto& b : s.cover.boxes) s.modes[b.id] = {5};
  s.cutoff = interval_cutoff();
  s.exact = std::move(exact);
  const BoxDomain whole = interval(0, 0.0, kPi);
  s.rules.push_back({whole, geometric(vec({focus}), ratio, {500})});
  s.overkill = build_rule(whole, geometric(vec({focus}), overkill_ratio, {5000}), RuleRole::Overkill);
  s.lr = std::pow(10.0, -3.5);
  RefinementConfig rc;
  rc.tau = 0.66;
  rc.max_ref = 5;
  rc.modes_per_child = {5};
  rc.iterations = 500;
  rc.final_iterations = 1000;
  s.refinement = rc;
  s.iterations = rc.iterations;
  return s;
}

CaseSpec as_reference(CaseSpec s, int modes) {
  if (modes < 1) throw std::invalid_argument("mode count must be >= 1");
  const int budget = s.total_iterations();
  s.cover.boxes = {interval(0, 0.0, kPi)};
  s.cover.base = {0};
  s.modes = {{0, {modes}}};
  s.refinement.reset();
  s.iterations = budget;
  s.name += "_reference_" + std::to_string(modes);
  return s;
}

}  // namespace

int CaseSpec::total_iterations() const {
  if (refinement) return refinement->max_ref * refinement->iterations + refinement->final_iterations;
  return iterations;
}

CaseSpec case1() {
  CaseSpec s;
  s.id = 1;
  s.name = "pentagon";
  s.arch.input_dim = 2;
  MatrixX e(2, 2);
  e << 1.0, 1.0, -1.0, 1.0;
  s.cover.boxes = {box2(0, -1.0, 1.0, -1.0, 1.0), make_box(1, vec({0.0, 0.0}), e)};
  s.cover.base = {0, 1};
  s.modes = {{0, {10, 10}}, {1, {10, 10}}};
  s.cutoff = cutoff_from_jet(pentagon_s);
  s.exact = from_jet(
      [](const VectorX& p) {
        const Jet q{p(0) * p(0) + p(1) * p(1) - 0.25, 2.0 * p(0), 2.0 * p(1), 4.0};
        return q * pentagon_s(p);
      },
      "smooth");
  for (const auto& b : s.cover.boxes) s.rules.push_back({b, uniform({100, 100})});
  const BoxDomain grid = box2(0, -1.0, 2.0, -1.0, 1.0);
  s.overkill = masked(build_rule(grid, uniform({300, 300}), RuleRole::Overkill), s.cover);
  s.lr = 1e-2;
  s.iterations = 5000;
  return s;
}

CaseSpec case2(int long_modes) {
  if (long_modes < 2) throw std::invalid_argument("mode count must be >= 2");
  CaseSpec s;
  s.id = 2;
  s.name = long_modes == 20 ? "lshape" : "lshape_" + std::to_string(long_modes);
  s.arch.input_dim = 2;
  s.cover = lshape_cover();
  const int short_modes = long_modes / 2;
  s.modes = {{0, {long_modes, short_modes}}, {1, {short_modes, long_modes}}};
  s.cutoff = lshape_cutoff();
  s.exact = lshape_solution();
  const VectorX origin = vec({0.0, 0.0});
  s.rules.push_back({s.cover.boxes[0], geometric(origin, 0.97, {500, 250})});
  s.rules.push_back({s.cover.boxes[1], geometric(origin, 0.97, {250, 500})});
  s.overkill = lshape_overkill(s.cover);
  s.lr = 1e-2;
  s.iterations = 1000;
  return s;
}

CaseSpec case3() {
  CaseSpec s = case2(20);
  s.id = 3;
  s.name = "lshape_refined";
  s.iterations = 3000;
  StageAddition first;
  first.at_iteration = 1000;
  first.boxes = {box2(2, -0.6, 0.6, 0.0, 0.6, 1, 0), box2(3, 0.0, 0.6, -0.6, 0.6, 1, 1)};
  StageAddition second;
  second.at_iteration = 2000;
  second.boxes = {box2(4, -0.2, 0.2, 0.0, 0.2, 2, 2), box2(5, 0.0, 0.2, -0.2, 0.2, 2, 3)};
  for (const auto* stage : {&first, &second}) {
    for (const auto& b : stage->boxes) s.modes[b.id] = oriented(b, {20, 10});
  }
  s.stages = {first, second};
  return s;
}

CaseSpec case4() { return interval_case(4, "singular_1d", case4_solution(), 0.0, 0.997, 0.998); }

CaseSpec case5() {
  CaseSpec s = interval_case(5, "peak_1d", case5_solution(), kPi / 2.0, 0.99, 0.999);
  s.refinement->final_iterations = 500;
  return s;
}

CaseSpec case4_reference(int modes) { return as_reference(case4(), modes); }
CaseSpec case5_reference(int modes) { return as_reference(case5(), modes); }

CaseSpec case_by_id(int id) {
  switch (id) {
    case 1: return case1();
    case 2: return case2();
    case 3: return case3();
    case 4: return case4();
    case 5: return case5();
    default: throw std::invalid_argument("unknown case " + std::to_string(id));
  }
}

void override_modes(CaseSpec& spec, std::vector<int> counts) {
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("mode count must be >= 1");
  }
  auto find_box = [&](int id) -> const BoxDomain& {
    if (spec.cover.has(id)) return spec.cover.box(id);
    for (const auto& st : spec.stages) {
      for (const auto& b : st.boxes) {
        if (b.id == id) return b;
      }
    }
    throw std::invalid_argument("box " + std::to_string(id) + " not found");
  };
  for (auto& [id, m] : spec.modes) m = oriented(find_box(id), counts);
  if (spec.refinement) spec.refinement->modes_per_child = {counts.at(0)};
}

void override_quad_points(CaseSpec& spec, std::vector<int> counts) {
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("quadrature point count must be >= 1");
  }
  for (auto& src : spec.rules) src.spec.count = oriented(src.region, counts);
}

QuadratureRule rule_for(const CaseSpec& spec, const BoxDomain& box, RuleRole role) {
  for (const auto& src : spec.rules) {
    if (!is_subset(box, src.region)) continue;
    const GradingSpec g = role == RuleRole::Validation ? validation_counterpart(src.spec) : src.spec;
    QuadratureRule r = restrict_rule(build_rule(src.region, g, role), box);
    r.role = role;
    return r;
  }
  throw std::invalid_argument("no quadrature rule covers box " + std::to_string(box.id));
}

BlockFactory block_factory(const CaseSpec& spec) {
  auto shared = std::make_shared<const CaseSpec>(spec);
  return [shared](const BoxDomain& box, const std::vector<int>& modes, RuleRole role) {
    return BoxBlock(box, modes, rule_for(*shared, box, role));
  };
}

double relative_h1_error(const VectorX& u, const MatrixX& grad, const ManufacturedSolution& exact,
                         const QuadratureRule& rule, bool seminorm) {
  const VectorX us = exact.u(rule.nodes);
  const MatrixX gs = exact.grad(rule.nodes);
  const VectorX& w = rule.weights;
  const double zero = seminorm ? 0.0 : 1.0;
  const double num = (w.array() * ((grad - gs).colwise().squaredNorm().transpose().array() +
                                   zero * (u - us).array().square()))
                         .sum();
  const double den =
      (w.array() * (gs.colwise().squaredNorm().transpose().array() + zero * us.array().square())).sum();
  if (!(den > 0.0)) throw std::invalid_argument("exact solution has zero norm on the error rule");
  return 100.0 * std::sqrt(num / den);
}

ErrorMetric make_error_metric(const CaseSpec& spec, bool seminorm) {
  struct Data {
    QuadratureRule rule;
    VectorX us;
    MatrixX gs;
    double den = 0.0;
    Cutoff cutoff;
  };
  auto d = std::make_shared<Data>();
  d->rule = spec.overkill;
  d->us = spec.exact.u(d->rule.nodes);
  d->gs = spec.exact.grad(d->rule.nodes);
  d->cutoff = spec.cutoff;
  const double zero = seminorm ? 0.0 : 1.0;
  d->den = (d->rule.weights.array() *
            (d->gs.colwise().squaredNorm().transpose().array() + zero * d->us.array().square()))
               .sum();
  if (!(d->den > 0.0)) throw std::invalid_argument("exact solution has zero norm on the error rule");
  return [d, zero](const Network& net) {
    const FieldEval e = evaluate_field(net, d->cutoff, d->rule.nodes);
    const double num = (d->rule.weights.array() * ((e.grad - d->gs).colwise().squaredNorm().transpose().array() +
                                                   zero * (e.u - d->us).array().square()))
                           .sum();
    return 100.0 * std::sqrt(num / d->den);
  };
}

void write_solution_csv(const CaseSpec& spec, const Network& net, std::ostream& os) {
  const auto& nodes = spec.overkill.nodes;
  const FieldEval e = evaluate_field(net, spec.cutoff, nodes);
  const VectorX us = spec.exact.u(nodes);
  const MatrixX gs = spec.exact.grad(nodes);
  os << (nodes.rows() == 1 ? "x" : "x,y") << ",u,u_star,grad_err\n" << std::setprecision(12);
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
    for (Eigen::Index j = 0; j < nodes.rows(); ++j) os << nodes(j, q) << ',';
    os << e.u(q) << ',' << us(q) << ',' << (e.grad.col(q) - gs.col(q)).norm() << '\n';
  }
}

RunResult run_case(const CaseSpec& spec, const RunSettings& settings) {
  TrainOptions opts = settings.train;
  opts.lr = spec.lr;
  Trainer trainer(init_params(spec.arch, settings.seed), spec.cutoff, spec.exact.f, opts);
  if (opts.error_every > 0) trainer.set_error_metric(make_error_metric(spec));
  const BlockFactory factory = block_factory(spec);
  RunResult result;

  if (spec.refinement) {
    RefinementResult r = refine_loop(trainer, spec.cover, spec.modes, *spec.refinement, factory);
    result.cover = std::move(r.cover);
    result.history = std::move(r.history);
    result.snapshots = std::move(r.snapshots);
    result.tables = std::move(r.tables);
    result.level_start = std::move(r.level_start);
  } else {
    Cover cover = spec.cover;
    auto install = [&] {
      trainer.set_blocks(make_blocks(cover, spec.modes, RuleRole::Training, factory),
                         make_blocks(cover, spec.modes, RuleRole::Validation, factory));
      result.snapshots.push_back(cover);
      result.level_start.push_back(trainer.iteration());
    };
    install();
    int done = 0;
    bool first = true;
    for (const auto& stage : spec.stages) {
      if (stage.at_iteration < done || stage.at_iteration > spec.iterations)
        throw std::invalid_argument("stage schedule out of order");
      const auto rows = trainer.train(stage.at_iteration - done, first);
      result.history.insert(result.history.end(), rows.begin(), rows.end());
      first = false;
      done = stage.at_iteration;
      for (const auto& b : stage.boxes) cover.boxes.push_back(b);
      install();
    }
    const auto rows = trainer.train(spec.iterations - done, first);
    result.history.insert(result.history.end(), rows.begin(), rows.end());
    result.cover = cover;
  }
  result.net = trainer.network();
  result.final_breakdown = trainer.last_breakdown();
  return result;
}

}  // namespace dfrdd
