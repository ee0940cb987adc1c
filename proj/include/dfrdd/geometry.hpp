#ifndef DFRDD_GEOMETRY_HPP
#define DFRDD_GEOMETRY_HPP

#include "dfrdd/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace dfrdd {

enum class FaceBc { Dirichlet, Free };

/// An open n-rectangle (n = 1, 2), possibly rotated:
///   { corner + sum_j t_j edges.col(j) : t in (0,1)^n }.
/// Faces are numbered 2j (t_j = 0) and 2j+1 (t_j = 1).
struct BoxDomain {
  int id = 0;
  VectorX corner;
  MatrixX edges;  // n x n, column j is the j-th edge vector
  std::vector<FaceBc> face_bc;
  int level = 0;
  std::optional<int> parent;

  int dim() const { return static_cast<int>(corner.size()); }
  double side_length(int axis) const { return edges.col(axis).norm(); }
  VectorX unit_edge(int axis) const { return edges.col(axis) / side_length(axis); }
  double measure() const;
};

/// Validated constructor; throws std::invalid_argument on non-orthogonal or
/// degenerate edges.
BoxDomain make_box(int id, VectorX corner, MatrixX edges,
                   std::vector<FaceBc> face_bc = {}, int level = 0,
                   std::optional<int> parent = std::nullopt);

/// Axis-aligned box (lo, hi), all faces Dirichlet.
BoxDomain axis_box(int id, const VectorX& lo, const VectorX& hi);
BoxDomain interval(int id, double a, double b);

struct LocalCoords {
  VectorX t;
  bool inside = false;
};

/// x = corner + sum_j t_j edges_j; inside iff every t_j in (0,1).
LocalCoords local_coords(const BoxDomain& box, const VectorX& x);

/// Local coordinates of a batch of points (n x N), returned as n x N.
MatrixX local_coords_batch(const BoxDomain& box, const MatrixX& points);

bool contains(const BoxDomain& box, const VectorX& x);
bool contains_closed(const BoxDomain& box, const VectorX& x, double tol = 1e-12);

/// Vertices in counter-clockwise order for 2D boxes with a right-handed
/// frame, or the two endpoints in 1D.
std::vector<VectorX> vertices(const BoxDomain& box);

/// True when the closure of `inner` lies in the closure of `outer`.
bool is_subset(const BoxDomain& inner, const BoxDomain& outer, double tol = 1e-12);

/// Structural equality of the geometric part (corner + edges).
bool same_region(const BoxDomain& a, const BoxDomain& b, double tol = 1e-12);

/// Overlapping cover of a domain. The domain itself is the union of the
/// boxes listed in `base`; refinements add boxes without changing it.
struct Cover {
  std::vector<BoxDomain> boxes;
  std::vector<int> base;  // ids of the boxes whose union is the domain

  int dim() const { return boxes.empty() ? 0 : boxes.front().dim(); }
  const BoxDomain& box(int id) const;
  bool has(int id) const;
  int next_id() const;

  /// Open-set membership in the domain (ties on box boundaries are outside).
  bool in_domain(const VectorX& x) const;
  std::vector<bool> domain_mask(const MatrixX& points) const;

  /// max over sample points of card{i : x in box_i}.
  int overlap_count(const MatrixX& samples) const;
};

/// One box per interior knot: (x_{i-1}, x_{i+1}). Faces at the outer knots
/// receive the given tags; interior faces are always Dirichlet.
Cover make_hat_cover(const std::vector<double>& knots,
                     std::array<FaceBc, 2> end_bc = {FaceBc::Dirichlet, FaceBc::Dirichlet});

/// 1D refinement candidates (a,m), (q1,q3), (m,b), ids first_id.., level+1.
std::vector<BoxDomain> subdivide(const BoxDomain& box, int first_id);

std::string face_bc_name(FaceBc bc);
FaceBc face_bc_from_name(const std::string& name);

/// Cover serialization: [{id, level, parent, corner, edges, face_bc}, ...].
std::string cover_to_json(const Cover& cover, int indent = 2);
Cover cover_from_json(const std::string& text);

}  // namespace dfrdd

#endif  // DFRDD_GEOMETRY_HPP
