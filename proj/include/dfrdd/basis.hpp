#ifndef DFRDD_BASIS_HPP
#define DFRDD_BASIS_HPP

#include "dfrdd/geometry.hpp"
#include "dfrdd/types.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfrdd {

/// Which endpoints of an axis carry a Dirichlet condition:
/// DD = {a,b}, D0 = {a}, 0D = {b}, 00 = none.
enum class AxisVariant { DD, D0, ZeroD, Free };

std::string variant_name(AxisVariant v);
AxisVariant axis_variant(FaceBc low, FaceBc high);
AxisVariant axis_variant(const BoxDomain& box, int axis);

template <typename T>
struct AxisEval {
  T phi;
  T dphi;
  T lambda;  // squared frequency: int phi'^2 = lambda int phi^2
};

/// Multiplier c_k of pi/(b-a) in the k-th L2-normalized eigenfunction.
inline double frequency_index(AxisVariant v, int k) {
  switch (v) {
    case AxisVariant::DD: return k;
    case AxisVariant::D0:
    case AxisVariant::ZeroD: return k - 0.5;
    case AxisVariant::Free: return k - 1;
  }
  return 0.0;
}

/// L2-orthonormal 1D eigenfunction of -d^2/dx^2 on (a,b) for the given
/// boundary variant, its derivative, and its eigenvalue.
template <typename T>
AxisEval<T> eval_axis(AxisVariant v, int k, T a, T b, T x) {
  if (k < 1) throw std::invalid_argument("mode index must be >= 1");
  if (!(a < b)) throw std::invalid_argument("empty interval");
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T len = b - a;
  const T omega = T(frequency_index(v, k)) * T(std::numbers::pi) / len;
  const T arg = omega * (x - a);
  T amp = sqrt(T(2) / len);
  AxisEval<T> out{};
  out.lambda = omega * omega;
  switch (v) {
    case AxisVariant::DD:
    case AxisVariant::D0:
      out.phi = amp * sin(arg);
      out.dphi = amp * omega * cos(arg);
      break;
    case AxisVariant::ZeroD:
    case AxisVariant::Free:
      // The constant mode needs half weight to keep unit L2 norm.
      if (v == AxisVariant::Free && k == 1) amp = sqrt(T(1) / len);
      out.phi = amp * cos(arg);
      out.dphi = -amp * omega * sin(arg);
      break;
  }
  return out;
}

/// Identifies one test function on a box: the tensor product of per-axis
/// eigenfunctions, normalized in the full H1 norm.
struct ModeIndex {
  int box_id = 0;
  int dim = 1;
  std::array<int, 2> k{1, 1};
  std::array<AxisVariant, 2> variants{AxisVariant::DD, AxisVariant::DD};
};

struct ModeEval {
  double value = 0.0;
  VectorX gradient;
};

/// H1 norm of the unnormalized tensor product: sqrt(1 + sum_j lambda_j).
double mode_norm(const ModeIndex& mode, const BoxDomain& box);

/// Value and global gradient of the mode; zero outside the closed box.
ModeEval eval_mode(const ModeIndex& mode, const BoxDomain& box, const VectorX& x);

/// All k with 1 <= k_j <= counts[j], lexicographic with axis 0 outermost.
std::vector<ModeIndex> mode_set(const BoxDomain& box, const std::vector<int>& counts);

/// Per-axis tables for a batch of arc-length coordinates s in [0, len]:
/// values (n x K), derivatives d/ds (n x K) and eigenvalues (K).
struct AxisTable {
  MatrixX value;
  MatrixX deriv;
  VectorX lambda;
};
AxisTable axis_table(AxisVariant v, int count, double len, const VectorX& s);

}  // namespace dfrdd

#endif  // DFRDD_BASIS_HPP
