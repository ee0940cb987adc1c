#include "dfrdd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace dfrdd {

namespace {

// Cell widths graded towards the left end: w_i proportional to r^(N-1-i).
VectorX graded_widths(double len, int cells, double ratio) {
  VectorX w(cells);
  const double scale = len * (1.0 - ratio) / (1.0 - std::pow(ratio, cells));
  for (int i = 0; i < cells; ++i) w(i) = scale * std::pow(ratio, cells - 1 - i);
  return w;
}

void append_cells(double start, const VectorX& widths, bool reversed, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  double left = start;
  const Eigen::Index n = widths.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = reversed ? widths(n - 1 - i) : widths(i);
    nodes.push_back(left + 0.5 * w);
    weights.push_back(w);
    left += w;
  }
}

}  // namespace

std::vector<Eigen::Index> TensorLayout::shape() const {
  std::vector<Eigen::Index> s;
  for (const auto& o : offsets) s.push_back(o.size());
  return s;
}

Rule1d build_rule_1d(double a, double b, GradingKind kind, int cells, double ratio,
                     std::optional<double> focus) {
  if (cells < 1) throw std::invalid_argument("quadrature needs at least one cell");
  if (!(a < b)) throw std::invalid_argument("empty interval");
  std::vector<double> nodes;
  std::vector<double> weights;
  if (kind == GradingKind::Uniform) {
    append_cells(a, VectorX::Constant(cells, (b - a) / cells), false, nodes, weights);
  } else {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("grading ratio must be in (0,1)");
    const double f = focus.value_or(a);
    if (f <= a) {
      append_cells(a, graded_widths(b - a, cells, ratio), false, nodes, weights);
    } else if (f >= b) {
      append_cells(a, graded_widths(b - a, cells, ratio), true, nodes, weights);
    } else {
      int left = static_cast<int>(std::lround(cells * (f - a) / (b - a)));
      left = std::clamp(left, 1, cells - 1);
      if (cells < 2) throw std::invalid_argument("interior focus needs at least two cells");
      const int right = cells - left;
      append_cells(a, graded_widths(f - a, left, ratio), true, nodes, weights);
      append_cells(f, graded_widths(b - f, right, ratio), false, nodes, weights);
    }
  }
  Rule1d r;
  r.nodes = Eigen::Map<VectorX>(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
  r.weights = Eigen::Map<VectorX>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return r;
}

namespace {

QuadratureRule assemble_from_layout(TensorLayout layout, RuleRole role) {
  const auto shape = layout.shape();
  const int n = static_cast<int>(shape.size());
  Eigen::Index total = 1;
  for (auto s : shape) total *= s;
  QuadratureRule rule;
  rule.role = role;
  rule.nodes.resize(n, total);
  rule.weights.resize(total);
  if (n == 1) {
    for (Eigen::Index i = 0; i < shape[0]; ++i) {
      rule.nodes.col(i) = layout.origin + layout.offsets[0](i) * layout.dirs.col(0);
      rule.weights(i) = layout.axis_weights[0](i);
    }
  } else {
    for (Eigen::Index i1 = 0; i1 < shape[1]; ++i1) {
      for (Eigen::Index i0 = 0; i0 < shape[0]; ++i0) {
        const Eigen::Index q = i0 + shape[0] * i1;
        rule.nodes.col(q) = layout.origin + layout.offsets[0](i0) * layout.dirs.col(0) +
                            layout.offsets[1](i1) * layout.dirs.col(1);
        rule.weights(q) = layout.axis_weights[0](i0) * layout.axis_weights[1](i1);
      }
    }
  }
  rule.layout = std::move(layout);
  return rule;
}

}  // namespace

QuadratureRule build_rule(const BoxDomain& box, const GradingSpec& spec, RuleRole role) {
  const int n = box.dim();
  if (static_cast<int>(spec.count.size()) != n)
    throw std::invalid_argument("one cell count per axis required");
  TensorLayout layout;
  layout.origin = box.corner;
  layout.dirs.resize(n, n);
  for (int j = 0; j < n; ++j) {
    layout.dirs.col(j) = box.unit_edge(j);
    const double len = box.side_length(j);
    std::optional<double> focus;
    if (spec.kind == GradingKind::Geometric) {
      if (spec.focus.size() != n) throw std::invalid_argument("geometric grading needs a focus");
      focus = (spec.focus - box.corner).dot(layout.dirs.col(j));
    }
    const Rule1d r = build_rule_1d(0.0, len, spec.kind, spec.count[j], spec.ratio, focus);
    layout.offsets.push_back(r.nodes);
    layout.axis_weights.push_back(r.weights);
  }
  return assemble_from_layout(std::move(layout), role);
}

QuadratureRule restrict_rule(const QuadratureRule& rule, const BoxDomain& box) {
  if (rule.dim() != box.dim()) throw std::invalid_argument("dimension mismatch");
  const int n = box.dim();

  bool aligned = rule.layout.has_value();
  if (aligned) {
    for (int j = 0; j < n && aligned; ++j) {
      aligned = rule.layout->dirs.col(j).dot(box.unit_edge(j)) > 1.0 - 1e-12;
    }
  }

  QuadratureRule out;
  if (aligned) {
    const auto& lay = *rule.layout;
    TensorLayout sub;
    sub.origin = lay.origin;
    sub.dirs = lay.dirs;
    for (int j = 0; j < n; ++j) {
      const double len = box.side_length(j);
      const double shift = (lay.origin - box.corner).dot(box.unit_edge(j));
      std::vector<double> offs;
      std::vector<double> ws;
      for (Eigen::Index i = 0; i < lay.offsets[j].size(); ++i) {
        const double t = (shift + lay.offsets[j](i)) / len;
        if (t > 0.0 && t < 1.0) {
          offs.push_back(lay.offsets[j](i));
          ws.push_back(lay.axis_weights[j](i));
        }
      }
      if (offs.empty()) throw std::runtime_error("subdomain contains no integration points");
      sub.offsets.push_back(Eigen::Map<VectorX>(offs.data(), static_cast<Eigen::Index>(offs.size())));
      sub.axis_weights.push_back(Eigen::Map<VectorX>(ws.data(), static_cast<Eigen::Index>(ws.size())));
    }
    out = assemble_from_layout(std::move(sub), rule.role);
    return out;
  }

  const MatrixX t = local_coords_batch(box, rule.nodes);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    if ((t.col(q).array() > 0.0).all() && (t.col(q).array() < 1.0).all()) keep.push_back(q);
  }
  if (keep.empty()) throw std::runtime_error("subdomain contains no integration points");
  out.role = rule.role;
  out.nodes.resize(n, static_cast<Eigen::Index>(keep.size()));
  out.weights.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.nodes.col(i) = rule.nodes.col(keep[i]);
    out.weights(i) = rule.weights(keep[i]);
  }
  return out;
}

GradingSpec validation_counterpart(const GradingSpec& spec) {
  GradingSpec v = spec;
  // ceil(2.17 n) in integer arithmetic, avoiding 2.17 * 100 = 217.00000000000003.
  for (auto& c : v.count) c = (217 * c + 99) / 100;
  return v;
}

void write_rule_csv(const QuadratureRule& rule, std::ostream& os) {
  os << (rule.dim() == 1 ? "x,weight\n" : "x,y,weight\n");
  os << std::setprecision(17);
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    for (int j = 0; j < rule.dim(); ++j) os << rule.nodes(j, q) << ',';
    os << rule.weights(q) << '\n';
  }
}

}  // namespace dfrdd
