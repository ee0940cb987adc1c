#include "dfrdd/basis.hpp"

namespace dfrdd {

std::string variant_name(AxisVariant v) {
  switch (v) {
    case AxisVariant::DD: return "DD";
    case AxisVariant::D0: return "D0";
    case AxisVariant::ZeroD: return "0D";
    case AxisVariant::Free: return "00";
  }
  return "?";
}

AxisVariant axis_variant(FaceBc low, FaceBc high) {
  const bool a = low == FaceBc::Dirichlet;
  const bool b = high == FaceBc::Dirichlet;
  if (a && b) return AxisVariant::DD;
  if (a) return AxisVariant::D0;
  if (b) return AxisVariant::ZeroD;
  return AxisVariant::Free;
}

AxisVariant axis_variant(const BoxDomain& box, int axis) {
  return axis_variant(box.face_bc[2 * axis], box.face_bc[2 * axis + 1]);
}

double mode_norm(const ModeIndex& mode, const BoxDomain& box) {
  double sq = 1.0;
  for (int j = 0; j < mode.dim; ++j) {
    const double len = box.side_length(j);
    const double omega = frequency_index(mode.variants[j], mode.k[j]) * std::numbers::pi / len;
    sq += omega * omega;
  }
  return std::sqrt(sq);
}

ModeEval eval_mode(const ModeIndex& mode, const BoxDomain& box, const VectorX& x) {
  ModeEval out;
  out.gradient = VectorX::Zero(box.dim());
  const auto lc = local_coords(box, x);
  if ((lc.t.array() < 0.0).any() || (lc.t.array() > 1.0).any()) return out;

  std::array<AxisEval<double>, 2> axes{};
  for (int j = 0; j < mode.dim; ++j) {
    const double len = box.side_length(j);
    axes[j] = eval_axis(mode.variants[j], mode.k[j], 0.0, len, lc.t(j) * len);
  }
  const double inv_norm = 1.0 / mode_norm(mode, box);
  double value = inv_norm;
  for (int j = 0; j < mode.dim; ++j) value *= axes[j].phi;
  out.value = value;
  for (int j = 0; j < mode.dim; ++j) {
    double partial = inv_norm * axes[j].dphi;
    for (int i = 0; i < mode.dim; ++i) {
      if (i != j) partial *= axes[i].phi;
    }
    out.gradient += partial * box.unit_edge(j);
  }
  return out;
}

std::vector<ModeIndex> mode_set(const BoxDomain& box, const std::vector<int>& counts) {
  if (static_cast<int>(counts.size()) != box.dim())
    throw std::invalid_argument("one mode count per axis required");
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("mode count must be >= 1");
  }
  std::vector<ModeIndex> modes;
  ModeIndex m;
  m.box_id = box.id;
  m.dim = box.dim();
  for (int j = 0; j < box.dim(); ++j) m.variants[j] = axis_variant(box, j);
  const int k2max = box.dim() == 2 ? counts[1] : 1;
  for (int k1 = 1; k1 <= counts[0]; ++k1) {
    for (int k2 = 1; k2 <= k2max; ++k2) {
      m.k = {k1, k2};
      modes.push_back(m);
    }
  }
  return modes;
}

AxisTable axis_table(AxisVariant v, int count, double len, const VectorX& s) {
  AxisTable table;
  table.value.resize(s.size(), count);
  table.deriv.resize(s.size(), count);
  table.lambda.resize(count);
  for (int k = 1; k <= count; ++k) {
    for (Eigen::Index q = 0; q < s.size(); ++q) {
      const auto e = eval_axis(v, k, 0.0, len, s(q));
      table.value(q, k - 1) = e.phi;
      table.deriv(q, k - 1) = e.dphi;
      table.lambda(k - 1) = e.lambda;
    }
  }
  return table;
}

}  // namespace dfrdd
