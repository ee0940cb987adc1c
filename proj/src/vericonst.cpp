#include "dfrdd/vericonst.hpp"

#include "json.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dfrdd {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

Polygon box_polygon(const BoxDomain& box) {
  if (box.dim() != 2) throw std::invalid_argument("unsupported dimension");
  Polygon poly;
  for (const auto& v : vertices(box)) poly.emplace_back(v(0), v(1));
  if (polygon_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((x - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (a + t * d - x).norm();
}

}  // namespace

Polygon clip_halfplane(const Polygon& poly, const Eigen::Vector2d& n, double c) {
  Polygon out;
  const std::size_t m = poly.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Eigen::Vector2d& a = poly[k];
    const Eigen::Vector2d& b = poly[(k + 1) % m];
    const double fa = n.dot(a) - c;
    const double fb = n.dot(b) - c;
    if (fa <= 0.0) out.push_back(a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) out.push_back(a + fa / (fa - fb) * (b - a));
  }
  return out;
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) a += cross(poly[k], poly[(k + 1) % poly.size()]);
  return 0.5 * a;
}

double convex_distance(const Polygon& poly, const Eigen::Vector2d& x) {
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Eigen::Vector2d& a = poly[k];
    const Eigen::Vector2d& b = poly[(k + 1) % poly.size()];
    if (cross(b - a, x - a) < 0.0) inside = false;
    best = std::min(best, segment_distance(a, b, x));
  }
  return inside ? 0.0 : best;
}

PartitionOfUnity::PartitionOfUnity(Cover cover) : cover_(std::move(cover)) {
  if (cover_.dim() != 2) throw std::invalid_argument("unsupported dimension");
  for (const auto& bi : cover_.boxes) {
    const Polygon pi = box_polygon(bi);
    std::vector<Polygon> pieces;
    for (int id : cover_.base) {
      Polygon rest = box_polygon(cover_.box(id));
      const double scale = std::abs(polygon_area(rest));
      for (std::size_t k = 0; k < pi.size() && !rest.empty(); ++k) {
        const Eigen::Vector2d e = pi[(k + 1) % pi.size()] - pi[k];
        const Eigen::Vector2d n(e.y(), -e.x());  // outward for counter-clockwise order
        const double c = n.dot(pi[k]);
        Polygon outside = clip_halfplane(rest, -n, -c);
        if (outside.size() >= 3 && std::abs(polygon_area(outside)) > 1e-14 * scale) pieces.push_back(outside);
        rest = clip_halfplane(rest, n, c);
      }
    }
    pieces_.push_back(std::move(pieces));
  }
}

double PartitionOfUnity::p(std::size_t i, const Eigen::Vector2d& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_.at(i)) best = std::min(best, convex_distance(piece, x));
  return best;
}

VectorX PartitionOfUnity::p_all(const Eigen::Vector2d& x) const {
  VectorX out(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) out(static_cast<Eigen::Index>(i)) = p(i, x);
  return out;
}

VectorX PartitionOfUnity::rho(const Eigen::Vector2d& x) const {
  const VectorX p = p_all(x);
  const auto infinite = (p.array() == std::numeric_limits<double>::infinity()).cast<double>();
  if (infinite.sum() > 0.0) return (infinite / infinite.sum()).matrix();
  return p / p.sum();
}

double p_dist(const Cover& cover, std::size_t i, const Eigen::Vector2d& x) {
  return PartitionOfUnity(cover).p(i, x);
}

std::vector<Eigen::Vector2d> find_singular_points(const Cover& cover, double delta) {
  if (cover.dim() != 2) throw std::invalid_argument("unsupported dimension");
  std::vector<Polygon> polys;
  for (const auto& b : cover.boxes) polys.push_back(box_polygon(b));

  std::vector<Eigen::Vector2d> candidates;
  for (const auto& p : polys) candidates.insert(candidates.end(), p.begin(), p.end());
  for (std::size_t a = 0; a < polys.size(); ++a) {
    for (std::size_t b = a + 1; b < polys.size(); ++b) {
      for (std::size_t k = 0; k < polys[a].size(); ++k) {
        for (std::size_t l = 0; l < polys[b].size(); ++l) {
          const Eigen::Vector2d p = polys[a][k];
          const Eigen::Vector2d r = polys[a][(k + 1) % polys[a].size()] - p;
          const Eigen::Vector2d q = polys[b][l];
          const Eigen::Vector2d s = polys[b][(l + 1) % polys[b].size()] - q;
          const double den = cross(r, s);
          if (std::abs(den) < 1e-14) continue;
          const double t = cross(q - p, s) / den;
          const double u = cross(q - p, r) / den;
          if (t >= -1e-12 && t <= 1 + 1e-12 && u >= -1e-12 && u <= 1 + 1e-12) candidates.push_back(p + t * r);
        }
      }
    }
  }

  // Sample directions with an irrational offset so no ray runs along an edge.
  const double offset = (std::sqrt(5.0) - 1.0) / 2.0;
  constexpr int kAngles = 96;
  const std::array<double, 3> radii{0.31, 0.67, 1.0};

  std::vector<Eigen::Vector2d> singular;
  for (const auto& c : candidates) {
    const bool duplicate = std::any_of(singular.begin(), singular.end(),
                                       [&](const Eigen::Vector2d& s) { return (s - c).norm() < 1e-9; });
    if (duplicate) continue;
    bool in_closure = false;
    for (int id : cover.base) in_closure = in_closure || contains_closed(cover.box(id), c, 1e-12);
    if (!in_closure) continue;

    std::vector<VectorX> samples;
    for (double r : radii) {
      for (int k = 0; k < kAngles; ++k) {
        const double a = 2.0 * kPi * (k + offset) / kAngles;
        samples.push_back(c + r * delta * Eigen::Vector2d(std::cos(a), std::sin(a)));
      }
    }
    bool regular = false;
    for (const auto& box : cover.boxes) {
      const bool match = std::all_of(samples.begin(), samples.end(),
                                     [&](const VectorX& x) { return cover.in_domain(x) == contains(box, x); });
      if (match) {
        regular = true;
        break;
      }
    }
    if (!regular) singular.push_back(c);
  }
  return singular;
}

MatrixX sample_domain(const Cover& cover, int count, std::mt19937_64& rng,
                      const std::vector<Eigen::Vector2d>& avoid, double min_dist) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (int id : cover.base) {
    for (const auto& v : vertices(cover.box(id))) {
      lo = lo.cwiseMin(Eigen::Vector2d(v(0), v(1)));
      hi = hi.cwiseMax(Eigen::Vector2d(v(0), v(1)));
    }
  }
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  MatrixX out(2, count);
  int filled = 0;
  while (filled < count) {
    const Eigen::Vector2d x(ux(rng), uy(rng));
    if (!cover.in_domain(x)) continue;
    const bool near = std::any_of(avoid.begin(), avoid.end(),
                                  [&](const Eigen::Vector2d& a) { return (a - x).norm() < min_dist; });
    if (near) continue;
    out.col(filled++) = x;
  }
  return out;
}

SampleReport partition_identity_check(const PartitionOfUnity& pou, const MatrixX& samples, double tol) {
  SampleReport rep;
  for (Eigen::Index q = 0; q < samples.cols(); ++q) {
    const Eigen::Vector2d x = samples.col(q);
    const VectorX rho = pou.rho(x);
    double err = std::abs(rho.sum() - 1.0);
    bool ok = err <= tol && (rho.array() >= 0.0).all();
    for (std::size_t i = 0; i < pou.size(); ++i) {
      if (!contains(pou.cover().boxes[i], x) && rho(static_cast<Eigen::Index>(i)) != 0.0) ok = false;
    }
    rep.max_violation = std::max(rep.max_violation, err);
    ++rep.samples;
    if (ok) ++rep.passed;
  }
  return rep;
}

SampleReport grad_bound_check(const PartitionOfUnity& pou, const MatrixX& samples, double slack, double step) {
  SampleReport rep;
  const double m = static_cast<double>(pou.size());
  for (Eigen::Index q = 0; q < samples.cols(); ++q) {
    const Eigen::Vector2d x = samples.col(q);
    const double bound = (m + 1.0) / pou.p_all(x).sum();
    MatrixX grad(static_cast<Eigen::Index>(pou.size()), 2);
    for (int d = 0; d < 2; ++d) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(d) = step;
      grad.col(d) = (pou.rho(x + e) - pou.rho(x - e)) / (2.0 * step);
    }
    const double worst = grad.rowwise().norm().maxCoeff() / bound;
    rep.max_violation = std::max(rep.max_violation, worst);
    ++rep.samples;
    if (worst <= 1.0 + slack) ++rep.passed;
  }
  return rep;
}

std::array<double, 2> local_polar_partition(CornerGeometry g, double theta) {
  double r1 = 0.0;
  if (g == CornerGeometry::LShape) {
    r1 = theta <= 0.0 ? 0.0 : theta >= kPi / 2.0 ? 1.0 : 2.0 * theta / kPi;
  } else {
    r1 = theta <= kPi / 4.0 ? 1.0 : theta >= 3.0 * kPi / 4.0 ? 0.0 : 1.5 - 2.0 * theta / kPi;
  }
  return {r1, 1.0 - r1};
}

double local_angle(CornerGeometry g, const Eigen::Vector2d& corner, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = x - corner;
  const double th = std::atan2(d.y(), d.x());
  if (g == CornerGeometry::LShape) {
    // Upper half-plane (Omega_1) maps to (-pi/2, pi/2), right half-plane to (0, pi).
    double t = kPi / 2.0 - th;
    if (t > kPi) t -= 2.0 * kPi;
    return t;
  }
  // Reflect so that both pentagon corners see Omega_1 in (pi/2, pi).
  return corner.y() > 0.0 ? -th : th;
}

std::array<double, 2> corner_partition(CornerGeometry g, const Eigen::Vector2d& corner, const Eigen::Vector2d& x) {
  const auto r = local_polar_partition(g, local_angle(g, corner, x));
  return {r[1], r[0]};
}

struct HarmonicSolver::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

HarmonicSolver::HarmonicSolver(int N) : N_(N) {
  if (N < 2) throw std::invalid_argument("grid needs at least two cells");
  const int n = N - 1;
  std::vector<Eigen::Triplet<double>> t;
  auto idx = [n](int i, int j) { return (i - 1) + n * (j - 1); };
  for (int j = 1; j < N; ++j) {
    for (int i = 1; i < N; ++i) {
      t.emplace_back(idx(i, j), idx(i, j), 4.0);
      if (i > 1) t.emplace_back(idx(i, j), idx(i - 1, j), -1.0);
      if (i < N - 1) t.emplace_back(idx(i, j), idx(i + 1, j), -1.0);
      if (j > 1) t.emplace_back(idx(i, j), idx(i, j - 1), -1.0);
      if (j < N - 1) t.emplace_back(idx(i, j), idx(i, j + 1), -1.0);
    }
  }
  Eigen::SparseMatrix<double> A(n * n, n * n);
  A.setFromTriplets(t.begin(), t.end());
  auto impl = std::make_shared<Impl>();
  impl->ldlt.compute(A);
  if (impl->ldlt.info() != Eigen::Success) throw std::runtime_error("Laplace factorization failed");
  impl_ = impl;
}

MatrixX HarmonicSolver::solve(const MatrixX& boundary) const {
  const int N = N_;
  const int n = N - 1;
  if (boundary.rows() != N + 1 || boundary.cols() != N + 1) throw std::invalid_argument("grid size mismatch");
  VectorX rhs = VectorX::Zero(n * n);
  for (int j = 1; j < N; ++j) {
    for (int i = 1; i < N; ++i) {
      double b = 0.0;
      if (i == 1) b += boundary(0, j);
      if (i == N - 1) b += boundary(N, j);
      if (j == 1) b += boundary(i, 0);
      if (j == N - 1) b += boundary(i, N);
      rhs((i - 1) + n * (j - 1)) = b;
    }
  }
  const VectorX sol = impl_->ldlt.solve(rhs);
  if (impl_->ldlt.info() != Eigen::Success) throw std::runtime_error("Laplace solve failed");
  MatrixX v = boundary;
  for (int j = 1; j < N; ++j) {
    for (int i = 1; i < N; ++i) v(i, j) = sol((i - 1) + n * (j - 1));
  }
  return v;
}

HarmonicPair HarmonicSolver::extensions(const VectorX& left, const VectorX& bottom) const {
  const int N = N_;
  if (left.size() != N + 1 || bottom.size() != N + 1) throw std::invalid_argument("boundary data size mismatch");
  const double tol = 1e-12;
  if (std::abs(left(0)) > tol || std::abs(left(N)) > tol || std::abs(bottom(0)) > tol || std::abs(bottom(N)) > tol)
    throw std::invalid_argument("boundary data must vanish on the outer boundary");
  MatrixX b1 = MatrixX::Zero(N + 1, N + 1);
  MatrixX b2 = MatrixX::Zero(N + 1, N + 1);
  b1.row(0) = left.transpose();
  b2.col(0) = bottom;
  return {N, solve(b1), solve(b2)};
}

HarmonicPair harmonic_extensions(const VectorX& left, const VectorX& bottom, int N) {
  return HarmonicSolver(N).extensions(left, bottom);
}

double grid_energy(const MatrixX& a, const MatrixX& b) {
  const Eigen::Index R = a.rows();
  const Eigen::Index C = a.cols();
  const double horiz =
      ((a.bottomRows(R - 1) - a.topRows(R - 1)).array() * (b.bottomRows(R - 1) - b.topRows(R - 1)).array()).sum();
  const double vert =
      ((a.rightCols(C - 1) - a.leftCols(C - 1)).array() * (b.rightCols(C - 1) - b.leftCols(C - 1)).array()).sum();
  return horiz + vert;
}

double grid_energy(const MatrixX& a) { return grid_energy(a, a); }

double interior_laplacian(const MatrixX& v) {
  double worst = 0.0;
  for (Eigen::Index j = 1; j + 1 < v.cols(); ++j) {
    for (Eigen::Index i = 1; i + 1 < v.rows(); ++i) {
      const double l = 4.0 * v(i, j) - v(i - 1, j) - v(i + 1, j) - v(i, j - 1) - v(i, j + 1);
      worst = std::max(worst, std::abs(l));
    }
  }
  return worst;
}

VectorX sine_series(const VectorX& coeffs, int N) {
  VectorX out = VectorX::Zero(N + 1);
  for (int j = 1; j < N; ++j) {
    const double s = static_cast<double>(j) / N;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) out(j) += coeffs(k) * std::sin((k + 1) * kPi * s);
  }
  return out;
}

XiReport xi_estimate(int N, int samples, std::uint64_t seed, int terms) {
  if (samples < 1) throw std::invalid_argument("need at least one boundary datum");
  const HarmonicSolver solver(N);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  XiReport rep;
  rep.N = N;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    VectorX c1(terms);
    VectorX c2(terms);
    for (int k = 0; k < terms; ++k) c1(k) = coef(rng);
    for (int k = 0; k < terms; ++k) c2(k) = coef(rng);
    const HarmonicPair h = solver.extensions(sine_series(c1, N), sine_series(c2, N));
    const double e = grid_energy(h.v1) + grid_energy(h.v2);
    const double r = e / (e + grid_energy(h.v1, h.v2));
    rep.ratios.push_back(r);
    rep.xi_sq = std::max(rep.xi_sq, r);
  }
  return rep;
}

double lshape_energy(const LShapeGrid& g) {
  const int M = 2 * g.N;
  double e = 0.0;
  for (int j = 0; j <= M; ++j) {
    for (int i = 0; i <= M; ++i) {
      if (!g.inside(i, j)) continue;
      if (i < M && g.inside(i + 1, j)) e += std::pow(g.v(i + 1, j) - g.v(i, j), 2);
      if (j < M && g.inside(i, j + 1)) e += std::pow(g.v(i, j + 1) - g.v(i, j), 2);
    }
  }
  return e;
}

Decomposition min_energy_decompose(const LShapeGrid& v) {
  const int N = v.N;
  if (v.v.rows() != 2 * N + 1 || v.v.cols() != 2 * N + 1) throw std::invalid_argument("grid size mismatch");
  const MatrixX local = v.v.bottomRightCorner(N + 1, N + 1);
  const VectorX left = local.row(0).transpose();
  const VectorX bottom = local.col(0);
  const HarmonicPair h = harmonic_extensions(left, bottom, N);
  const MatrixX d = h.v1 - h.v2;

  Decomposition out;
  out.v1 = {N, MatrixX::Zero(2 * N + 1, 2 * N + 1)};
  out.v2 = {N, MatrixX::Zero(2 * N + 1, 2 * N + 1)};
  for (int j = 0; j <= 2 * N; ++j) {
    for (int i = 0; i <= 2 * N; ++i) {
      if (!v.inside(i, j)) continue;
      if (i < N) {
        out.v1.v(i, j) = v.v(i, j);
      } else if (j < N) {
        out.v2.v(i, j) = v.v(i, j);
      } else {
        const double dd = d(i - N, j - N);
        out.v1.v(i, j) = 0.5 * (v.v(i, j) + dd);
        out.v2.v(i, j) = 0.5 * (v.v(i, j) - dd);
      }
    }
  }
  out.energy = lshape_energy(out.v1) + lshape_energy(out.v2);
  out.closed_form = lshape_energy(v) + 0.5 * (grid_energy(d) - grid_energy(local));
  return out;
}

std::string report_to_json(const VerificationReport& r, int indent) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : r.singular_points) pts.push_back({p.x(), p.y()});
  j["singular_points"] = pts;
  j["grad_bound_pass_rate"] = r.grad_bound_pass_rate;
  j["partition_pass_rate"] = r.partition_pass_rate;
  j["xi_sq_estimate"] = r.xi_sq_estimate;
  j["grid_N"] = r.grid_N;
  return j.dump(indent);
}

}  // namespace dfrdd
