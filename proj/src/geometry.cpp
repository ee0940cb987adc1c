#include "dfrdd/geometry.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dfrdd {

using ordered_json = nlohmann::ordered_json;

double BoxDomain::measure() const {
  double m = 1.0;
  for (int j = 0; j < dim(); ++j) m *= side_length(j);
  return m;
}

BoxDomain make_box(int id, VectorX corner, MatrixX edges, std::vector<FaceBc> face_bc,
                   int level, std::optional<int> parent) {
  const auto n = corner.size();
  if (n < 1 || n > 2) throw std::invalid_argument("unsupported dimension");
  if (edges.rows() != n || edges.cols() != n)
    throw std::invalid_argument("edge matrix must be n x n");
  for (int j = 0; j < n; ++j) {
    if (!(edges.col(j).norm() > 0.0)) throw std::invalid_argument("degenerate box edge");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double tol = 1e-12 * edges.col(i).norm() * edges.col(j).norm();
      if (std::abs(edges.col(i).dot(edges.col(j))) > tol)
        throw std::invalid_argument("box edges must be orthogonal");
    }
  }
  if (face_bc.empty()) face_bc.assign(2 * n, FaceBc::Dirichlet);
  if (static_cast<Eigen::Index>(face_bc.size()) != 2 * n)
    throw std::invalid_argument("face_bc needs one tag per face");
  if (level < 0) throw std::invalid_argument("negative refinement level");
  return BoxDomain{id, std::move(corner), std::move(edges), std::move(face_bc), level, parent};
}

BoxDomain axis_box(int id, const VectorX& lo, const VectorX& hi) {
  const VectorX diag = hi - lo;
  return make_box(id, lo, MatrixX(diag.asDiagonal()));
}

BoxDomain interval(int id, double a, double b) {
  return axis_box(id, VectorX::Constant(1, a), VectorX::Constant(1, b));
}

LocalCoords local_coords(const BoxDomain& box, const VectorX& x) {
  LocalCoords lc;
  const VectorX d = x - box.corner;
  lc.t.resize(box.dim());
  lc.inside = true;
  for (int j = 0; j < box.dim(); ++j) {
    lc.t(j) = box.edges.col(j).dot(d) / box.edges.col(j).squaredNorm();
    if (!(lc.t(j) > 0.0 && lc.t(j) < 1.0)) lc.inside = false;
  }
  return lc;
}

MatrixX local_coords_batch(const BoxDomain& box, const MatrixX& points) {
  MatrixX scaled = box.edges;
  for (int j = 0; j < box.dim(); ++j) scaled.col(j) /= box.edges.col(j).squaredNorm();
  return scaled.transpose() * (points.colwise() - box.corner);
}

bool contains(const BoxDomain& box, const VectorX& x) { return local_coords(box, x).inside; }

bool contains_closed(const BoxDomain& box, const VectorX& x, double tol) {
  const auto lc = local_coords(box, x);
  return (lc.t.array() >= -tol).all() && (lc.t.array() <= 1.0 + tol).all();
}

std::vector<VectorX> vertices(const BoxDomain& box) {
  if (box.dim() == 1) return {box.corner, box.corner + box.edges.col(0)};
  const VectorX& c = box.corner;
  const VectorX e0 = box.edges.col(0);
  const VectorX e1 = box.edges.col(1);
  return {c, VectorX(c + e0), VectorX(c + e0 + e1), VectorX(c + e1)};
}

bool is_subset(const BoxDomain& inner, const BoxDomain& outer, double tol) {
  for (const auto& v : vertices(inner)) {
    if (!contains_closed(outer, v, tol)) return false;
  }
  return true;
}

bool same_region(const BoxDomain& a, const BoxDomain& b, double tol) {
  return is_subset(a, b, tol) && is_subset(b, a, tol);
}

const BoxDomain& Cover::box(int id) const {
  for (const auto& b : boxes) {
    if (b.id == id) return b;
  }
  throw std::out_of_range("no box with id " + std::to_string(id));
}

bool Cover::has(int id) const {
  return std::any_of(boxes.begin(), boxes.end(), [id](const BoxDomain& b) { return b.id == id; });
}

int Cover::next_id() const {
  int next = 0;
  for (const auto& b : boxes) next = std::max(next, b.id + 1);
  return next;
}

bool Cover::in_domain(const VectorX& x) const {
  for (int id : base) {
    if (contains(box(id), x)) return true;
  }
  return false;
}

std::vector<bool> Cover::domain_mask(const MatrixX& points) const {
  std::vector<bool> mask(points.cols(), false);
  for (int id : base) {
    const MatrixX t = local_coords_batch(box(id), points);
    for (Eigen::Index q = 0; q < points.cols(); ++q) {
      if (!mask[q] && (t.col(q).array() > 0.0).all() && (t.col(q).array() < 1.0).all())
        mask[q] = true;
    }
  }
  return mask;
}

int Cover::overlap_count(const MatrixX& samples) const {
  std::vector<int> count(samples.cols(), 0);
  for (const auto& b : boxes) {
    const MatrixX t = local_coords_batch(b, samples);
    for (Eigen::Index q = 0; q < samples.cols(); ++q) {
      if ((t.col(q).array() > 0.0).all() && (t.col(q).array() < 1.0).all()) ++count[q];
    }
  }
  return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
}

Cover make_hat_cover(const std::vector<double>& knots, std::array<FaceBc, 2> end_bc) {
  if (knots.size() < 3) throw std::invalid_argument("degenerate partition");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw std::invalid_argument("degenerate partition");
  }
  Cover cover;
  for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
    BoxDomain b = interval(static_cast<int>(i - 1), knots[i - 1], knots[i + 1]);
    if (i == 1) b.face_bc[0] = end_bc[0];
    if (i + 2 == knots.size()) b.face_bc[1] = end_bc[1];
    cover.base.push_back(b.id);
    cover.boxes.push_back(std::move(b));
  }
  return cover;
}

std::vector<BoxDomain> subdivide(const BoxDomain& box, int first_id) {
  if (box.dim() != 1) throw std::invalid_argument("unsupported dimension");
  const double a = box.corner(0);
  const double b = a + box.edges(0, 0);
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double mid = 0.5 * (lo + hi);
  const double q1 = 0.25 * (3.0 * lo + hi);
  const double q3 = 0.25 * (lo + 3.0 * hi);
  const std::array<std::pair<double, double>, 3> spans{{{lo, mid}, {q1, q3}, {mid, hi}}};
  std::vector<BoxDomain> children;
  for (int c = 0; c < 3; ++c) {
    BoxDomain child = interval(first_id + c, spans[c].first, spans[c].second);
    child.level = box.level + 1;
    child.parent = box.id;
    children.push_back(std::move(child));
  }
  return children;
}

std::string face_bc_name(FaceBc bc) { return bc == FaceBc::Dirichlet ? "Dirichlet" : "Free"; }

FaceBc face_bc_from_name(const std::string& name) {
  if (name == "Dirichlet") return FaceBc::Dirichlet;
  if (name == "Free") return FaceBc::Free;
  throw std::invalid_argument("unknown face tag: " + name);
}

std::string cover_to_json(const Cover& cover, int indent) {
  ordered_json arr = ordered_json::array();
  for (const auto& b : cover.boxes) {
    ordered_json j;
    j["id"] = b.id;
    j["level"] = b.level;
    j["parent"] = b.parent ? ordered_json(*b.parent) : ordered_json(nullptr);
    j["corner"] = std::vector<double>(b.corner.data(), b.corner.data() + b.corner.size());
    ordered_json edges = ordered_json::array();
    for (int c = 0; c < b.dim(); ++c) {
      const VectorX e = b.edges.col(c);
      edges.push_back(std::vector<double>(e.data(), e.data() + e.size()));
    }
    j["edges"] = edges;
    ordered_json tags = ordered_json::array();
    for (auto t : b.face_bc) tags.push_back(face_bc_name(t));
    j["face_bc"] = tags;
    arr.push_back(j);
  }
  return arr.dump(indent);
}

Cover cover_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::invalid_argument("cover JSON must be an array");
  Cover cover;
  for (const auto& j : arr) {
    const auto corner = j.at("corner").get<std::vector<double>>();
    const auto edges = j.at("edges").get<std::vector<std::vector<double>>>();
    const auto n = static_cast<Eigen::Index>(corner.size());
    MatrixX e(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) e(r, c) = edges.at(c).at(r);
    }
    std::vector<FaceBc> tags;
    for (const auto& t : j.at("face_bc")) tags.push_back(face_bc_from_name(t.get<std::string>()));
    std::optional<int> parent;
    if (!j.at("parent").is_null()) parent = j.at("parent").get<int>();
    BoxDomain b = make_box(j.at("id").get<int>(), Eigen::Map<const VectorX>(corner.data(), n), e,
                           tags, j.at("level").get<int>(), parent);
    if (b.level == 0 && !b.parent) cover.base.push_back(b.id);
    cover.boxes.push_back(std::move(b));
  }
  return cover;
}

}  // namespace dfrdd
