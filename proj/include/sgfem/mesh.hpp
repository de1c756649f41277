#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sgfem {

using Vec2 = std::array<double, 2>;

/// Triangle stored with a fixed convention: the refinement edge is (v[0], v[1])
/// and v[2] is the newest vertex (the peak). Orientation is positive.
struct Triangle {
  std::array<int, 3> v;
  int generation = 0;
};

struct Edge {
  int a = -1, b = -1;          // vertex ids with a < b
  std::array<int, 2> tri = {-1, -1};
  bool boundary = false;
};

/// Frame for evaluating normal jumps over an interior edge. The normal points
/// from tri_plus into tri_minus; its sign is fixed by the vertex enumeration.
struct EdgeFrame {
  int tri_plus = -1;
  int tri_minus = -1;
  Vec2 normal = {0.0, 0.0};
  double length = 0.0;
};

/// Bookkeeping produced by one bisect call.
struct RefinementMap {
  /// parents[v] = {a, b} for vertices created as edge midpoints; {v, v} otherwise.
  std::vector<std::array<int, 2>> vertex_parents;
  /// For each new-mesh triangle: the containing triangle id of the input mesh.
  std::vector<int> ancestor;
  /// Number of bisections separating each new triangle from its ancestor.
  std::vector<int> splits_from_ancestor;

  bool identity = false;
};

/// Conforming triangulation with edge topology. Immutable after construction;
/// refinement returns a new mesh.
class Mesh2D {
 public:
  Mesh2D() = default;
  Mesh2D(std::vector<Vec2> vertices, std::vector<Triangle> triangles);

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const Vec2& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const Triangle& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

  double area(int t) const { return areas_[static_cast<std::size_t>(t)]; }
  double h_t(int t) const { return h_t_[static_cast<std::size_t>(t)]; }
  double total_area() const;

  /// The three edge ids of triangle t in local order (v0,v1), (v1,v2), (v2,v0).
  const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[static_cast<std::size_t>(t)]; }

  int edge_id(int a, int b) const;  // -1 if absent
  bool vertex_on_boundary(int v) const { return boundary_vertex_[static_cast<std::size_t>(v)]; }

  EdgeFrame edge_jump_frame(int e) const;

  double min_angle() const;

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  void build_topology();

  std::vector<Vec2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> tri_edges_;
  std::vector<double> areas_;
  std::vector<double> h_t_;
  std::vector<bool> boundary_vertex_;
};

/// Newest-vertex bisection of the marked triangles with recursive closure.
std::pair<Mesh2D, RefinementMap> bisect(const Mesh2D& mesh, const std::vector<int>& marked);

Mesh2D uniform_refine(const Mesh2D& mesh, int levels);
std::pair<Mesh2D, RefinementMap> uniform_refine_mapped(const Mesh2D& mesh);

/// Structured triangulation of the L-shape (0,1)^2 \ [0.5,1]^2 with target mesh
/// size h0, compatibly marked for NVB (refinement edges on the square diagonals).
Mesh2D initial_lshape(double h0);

/// Structured triangulation of the unit square, compatibly marked.
Mesh2D initial_unit_square(double h0);

void write_mesh(const Mesh2D& mesh, std::ostream& out);
void write_mesh_file(const Mesh2D& mesh, const std::string& path);
Mesh2D read_mesh(std::istream& in);
Mesh2D read_mesh_file(const std::string& path);

}  // namespace sgfem
