#ifndef DFRDD_VERICONST_HPP
#define DFRDD_VERICONST_HPP

#include "dfrdd/geometry.hpp"
#include "dfrdd/types.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace dfrdd {

using Polygon = std::vector<Eigen::Vector2d>;

/// Convex polygon clipped to the half-plane { x : n . x <= c } (closed).
Polygon clip_halfplane(const Polygon& poly, const Eigen::Vector2d& n, double c);
double polygon_area(const Polygon& poly);
/// Euclidean distance from x to a closed convex polygon (0 inside).
double convex_distance(const Polygon& poly, const Eigen::Vector2d& x);

/// Distance-quotient partition of unity of a 2D cover:
/// p_i(x) = d(x, Omega \ Omega_i), rho_i = p_i / sum_j p_j.
class PartitionOfUnity {
 public:
  explicit PartitionOfUnity(Cover cover);

  const Cover& cover() const { return cover_; }
  std::size_t size() const { return cover_.boxes.size(); }
  /// Infinite when Omega \ Omega_i is empty.
  double p(std::size_t i, const Eigen::Vector2d& x) const;
  VectorX p_all(const Eigen::Vector2d& x) const;
  VectorX rho(const Eigen::Vector2d& x) const;
  /// Convex pieces whose union is the closure of Omega \ Omega_i.
  const std::vector<Polygon>& complement_pieces(std::size_t i) const { return pieces_[i]; }

 private:
  Cover cover_;
  std::vector<std::vector<Polygon>> pieces_;
};

double p_dist(const Cover& cover, std::size_t i, const Eigen::Vector2d& x);

/// Vertices of the boxes and pairwise edge intersections that fail the
/// local-ball test B(x) n Omega = B(x) n Omega_i for every i.
std::vector<Eigen::Vector2d> find_singular_points(const Cover& cover, double delta = 1e-3);

/// Uniform random points of the domain (rejection from the bounding box),
/// optionally at distance >= min_dist from the given points.
MatrixX sample_domain(const Cover& cover, int count, std::mt19937_64& rng,
                      const std::vector<Eigen::Vector2d>& avoid = {}, double min_dist = 0.0);

struct SampleReport {
  int samples = 0;
  int passed = 0;
  double max_violation = 0.0;
  double pass_rate() const { return samples == 0 ? 1.0 : static_cast<double>(passed) / samples; }
};

/// sum rho = 1 within tol, rho >= 0, and rho_i = 0 outside Omega_i.
SampleReport partition_identity_check(const PartitionOfUnity& pou, const MatrixX& samples, double tol = 1e-12);

/// Central-difference |grad rho_i| <= (1 + slack) (m + 1) / sum_j p_j, with m
/// the number of boxes. max_violation holds the largest observed ratio.
SampleReport grad_bound_check(const PartitionOfUnity& pou, const MatrixX& samples, double slack = 0.05,
                              double step = 1e-7);

enum class CornerGeometry { LShape, Pentagon };

/// Piecewise angular ramps in the local polar frame, as displayed for each
/// corner; returns (rho~_1, rho~_2 = 1 - rho~_1).
std::array<double, 2> local_polar_partition(CornerGeometry g, double theta);

/// Local polar angle of x around a singular corner: (0,0) for the L-shape,
/// (1,1) or (1,-1) for the pentagon.
double local_angle(CornerGeometry g, const Eigen::Vector2d& corner, const Eigen::Vector2d& x);

/// Weights of (Omega_1, Omega_2) near the corner. The displayed ramp is the
/// weight of the second box; this assigns it so that each weight vanishes
/// outside its own box.
std::array<double, 2> corner_partition(CornerGeometry g, const Eigen::Vector2d& corner,
                                       const Eigen::Vector2d& x);

/// Grid fields on U12 = (0,1)^2, N cells per side, node (i,j) at (i/N, j/N).
struct HarmonicPair {
  int N = 0;
  MatrixX v1;  // (N+1) x (N+1), data on the edge x = 0
  MatrixX v2;  // data on the edge y = 0
};

/// Five-point Laplace solves. left(j) is the value at (0, j/N), bottom(i) at
/// (i/N, 0); both must vanish at the corners on the outer boundary.
class HarmonicSolver {
 public:
  explicit HarmonicSolver(int N);
  int N() const { return N_; }
  MatrixX solve(const MatrixX& boundary) const;  // interior overwritten
  HarmonicPair extensions(const VectorX& left, const VectorX& bottom) const;

 private:
  struct Impl;
  int N_;
  std::shared_ptr<const Impl> impl_;
};

HarmonicPair harmonic_extensions(const VectorX& left, const VectorX& bottom, int N);

/// Sum over grid edges of the products of differences (discrete int grad a . grad b).
double grid_energy(const MatrixX& a, const MatrixX& b);
double grid_energy(const MatrixX& a);
/// Largest |discrete Laplacian| over interior nodes, scaled by h^2.
double interior_laplacian(const MatrixX& v);

/// Sine series sum_k c_k sin(k pi s) at the N+1 nodes s = j/N.
VectorX sine_series(const VectorX& coeffs, int N);

struct XiReport {
  int N = 0;
  int samples = 0;
  double xi_sq = 1.0;
  std::vector<double> ratios;
};

/// max(1, max over random data of (E1+E2)/(E1+E2+C12)).
XiReport xi_estimate(int N, int samples, std::uint64_t seed = 0, int terms = 8);

/// Field on the L-shape grid: node (i,j) at (-1 + i/N, -1 + j/N), i,j in
/// [0, 2N]; nodes with x < 0 and y < 0 are outside and ignored.
struct LShapeGrid {
  int N = 0;
  MatrixX v;
  bool inside(int i, int j) const { return i >= N || j >= N; }
};

struct Decomposition {
  LShapeGrid v1;
  LShapeGrid v2;
  double energy = 0.0;       // E(v1) + E(v2)
  double closed_form = 0.0;  // E(v) + (E_U12(v1h - v2h) - E_U12(v)) / 2
};

double lshape_energy(const LShapeGrid& g);
Decomposition min_energy_decompose(const LShapeGrid& v);

struct VerificationReport {
  std::vector<Eigen::Vector2d> singular_points;
  double grad_bound_pass_rate = 0.0;
  double partition_pass_rate = 0.0;
  double xi_sq_estimate = 0.0;
  int grid_N = 0;
};
std::string report_to_json(const VerificationReport& r, int indent = 2);

}  // namespace dfrdd

#endif  // DFRDD_VERICONST_HPP
