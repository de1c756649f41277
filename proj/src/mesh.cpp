#include "sgfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "sgfem/errors.hpp"

namespace sgfem {

namespace {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

inline double dist(const Vec2& a, const Vec2& b) {
  return std::hypot(b[0] - a[0], b[1] - a[1]);
}

}  // namespace

Mesh2D::Mesh2D(std::vector<Vec2> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  build_topology();
}

void Mesh2D::build_topology() {
  const int nt = triangle_count();
  areas_.resize(static_cast<std::size_t>(nt));
  h_t_.resize(static_cast<std::size_t>(nt));
  tri_edges_.resize(static_cast<std::size_t>(nt));

  std::unordered_map<std::uint64_t, int> edge_ids;
  edge_ids.reserve(static_cast<std::size_t>(3 * nt));
  edges_.clear();

  for (int t = 0; t < nt; ++t) {
    const auto& v = triangles_[static_cast<std::size_t>(t)].v;
    const double area = signed_area(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]);
    if (!(area > 0.0)) throw Error("Mesh2D: triangle " + std::to_string(t) + " not positively oriented");
    areas_[static_cast<std::size_t>(t)] = area;
    double h = 0.0;
    for (int l = 0; l < 3; ++l) {
      const int a = v[l], b = v[(l + 1) % 3];
      h = std::max(h, dist(vertices_[a], vertices_[b]));
      const std::uint64_t key = edge_key(a, b);
      auto it = edge_ids.find(key);
      int e;
      if (it == edge_ids.end()) {
        e = static_cast<int>(edges_.size());
        edge_ids.emplace(key, e);
        Edge edge;
        edge.a = std::min(a, b);
        edge.b = std::max(a, b);
        edges_.push_back(edge);
      } else {
        e = it->second;
      }
      Edge& edge = edges_[static_cast<std::size_t>(e)];
      if (edge.tri[0] == -1) {
        edge.tri[0] = t;
      } else if (edge.tri[1] == -1) {
        edge.tri[1] = t;
      } else {
        throw Error("Mesh2D: edge shared by more than two triangles (non-conforming input)");
      }
      tri_edges_[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)] = e;
    }
    h_t_[static_cast<std::size_t>(t)] = h;
  }

  boundary_vertex_.assign(vertices_.size(), false);
  for (auto& edge : edges_) {
    edge.boundary = (edge.tri[1] == -1);
    if (edge.boundary) {
      boundary_vertex_[static_cast<std::size_t>(edge.a)] = true;
      boundary_vertex_[static_cast<std::size_t>(edge.b)] = true;
    }
  }
}

double Mesh2D::total_area() const {
  double s = 0.0;
  for (double a : areas_) s += a;
  return s;
}

int Mesh2D::edge_id(int a, int b) const {
  for (int e = 0; e < edge_count(); ++e) {
    const Edge& edge = edges_[static_cast<std::size_t>(e)];
    if (edge.a == std::min(a, b) && edge.b == std::max(a, b)) return e;
  }
  return -1;
}

EdgeFrame Mesh2D::edge_jump_frame(int e) const {
  const Edge& edge = edges_[static_cast<std::size_t>(e)];
  if (edge.boundary) throw BoundaryEdge("edge_jump_frame: edge " + std::to_string(e) + " lies on the boundary");
  EdgeFrame frame;
  const Vec2& pa = vertices_[static_cast<std::size_t>(edge.a)];
  const Vec2& pb = vertices_[static_cast<std::size_t>(edge.b)];
  frame.length = dist(pa, pb);
  // fixed sign: rotate the (low id -> high id) direction by -90 degrees
  frame.normal = {(pb[1] - pa[1]) / frame.length, -(pb[0] - pa[0]) / frame.length};
  const Vec2 mid = {0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])};
  // tri_plus is the triangle the normal points away from
  const auto side = [&](int t) {
    const auto& v = triangles_[static_cast<std::size_t>(t)].v;
    const Vec2 c = {(vertices_[v[0]][0] + vertices_[v[1]][0] + vertices_[v[2]][0]) / 3.0,
                    (vertices_[v[0]][1] + vertices_[v[1]][1] + vertices_[v[2]][1]) / 3.0};
    return frame.normal[0] * (c[0] - mid[0]) + frame.normal[1] * (c[1] - mid[1]);
  };
  if (side(edge.tri[0]) < 0.0) {
    frame.tri_plus = edge.tri[0];
    frame.tri_minus = edge.tri[1];
  } else {
    frame.tri_plus = edge.tri[1];
    frame.tri_minus = edge.tri[0];
  }
  return frame;
}

double Mesh2D::min_angle() const {
  double best = std::numeric_limits<double>::max();
  for (const auto& tri : triangles_) {
    for (int l = 0; l < 3; ++l) {
      const Vec2& o = vertices_[static_cast<std::size_t>(tri.v[l])];
      const Vec2& p = vertices_[static_cast<std::size_t>(tri.v[(l + 1) % 3])];
      const Vec2& q = vertices_[static_cast<std::size_t>(tri.v[(l + 2) % 3])];
      const double ux = p[0] - o[0], uy = p[1] - o[1];
      const double vx = q[0] - o[0], vy = q[1] - o[1];
      const double dot = ux * vx + uy * vy;
      const double cross = ux * vy - uy * vx;
      best = std::min(best, std::atan2(std::abs(cross), dot));
    }
  }
  return best;
}

namespace {

struct WorkMesh {
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> tri;  // refinement edge (v0,v1), peak v2
  std::vector<int> gen;
  std::vector<bool> alive;
  std::vector<int> ancestor;            // id in the input mesh
  std::vector<int> splits;              // bisections since the ancestor
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_tris;
  std::vector<std::array<int, 2>> vertex_parents;

  void edge_attach(int a, int b, int t) {
    auto [it, inserted] = edge_tris.try_emplace(edge_key(a, b), std::array<int, 2>{-1, -1});
    auto& slot = it->second;
    if (slot[0] == t || slot[1] == t) return;
    if (slot[0] == -1) {
      slot[0] = t;
    } else if (slot[1] == -1) {
      slot[1] = t;
    } else {
      throw Error("bisect: edge attached to more than two triangles");
    }
  }

  void edge_detach(int a, int b, int t) {
    auto it = edge_tris.find(edge_key(a, b));
    if (it == edge_tris.end()) return;
    if (it->second[0] == t) it->second[0] = -1;
    if (it->second[1] == t) it->second[1] = -1;
  }

  int neighbor_across(int a, int b, int t) const {
    auto it = edge_tris.find(edge_key(a, b));
    if (it == edge_tris.end()) return -1;
    if (it->second[0] == t) return it->second[1];
    if (it->second[1] == t) return it->second[0];
    return -1;
  }

  int add_triangle(std::array<int, 3> v, int g, int anc, int spl) {
    const int t = static_cast<int>(tri.size());
    tri.push_back(v);
    gen.push_back(g);
    alive.push_back(true);
    ancestor.push_back(anc);
    splits.push_back(spl);
    edge_attach(v[0], v[1], t);
    edge_attach(v[1], v[2], t);
    edge_attach(v[2], v[0], t);
    return t;
  }

  void remove_triangle(int t) {
    const auto& v = tri[static_cast<std::size_t>(t)];
    edge_detach(v[0], v[1], t);
    edge_detach(v[1], v[2], t);
    edge_detach(v[2], v[0], t);
    alive[static_cast<std::size_t>(t)] = false;
  }

  /// Splits t at the midpoint vertex w of its refinement edge.
  void split_at(int t, int w) {
    const auto v = tri[static_cast<std::size_t>(t)];
    const int g = gen[static_cast<std::size_t>(t)];
    const int anc = ancestor[static_cast<std::size_t>(t)];
    const int spl = splits[static_cast<std::size_t>(t)];
    remove_triangle(t);
    add_triangle({v[2], v[0], w}, g + 1, anc, spl + 1);
    add_triangle({v[1], v[2], w}, g + 1, anc, spl + 1);
  }
};

}  // namespace

std::pair<Mesh2D, RefinementMap> bisect(const Mesh2D& mesh, const std::vector<int>& marked) {
  RefinementMap map;
  map.vertex_parents.reserve(static_cast<std::size_t>(mesh.vertex_count()));
  for (int v = 0; v < mesh.vertex_count(); ++v) map.vertex_parents.push_back({v, v});
  if (marked.empty()) {
    map.identity = true;
    map.ancestor.resize(static_cast<std::size_t>(mesh.triangle_count()));
    map.splits_from_ancestor.assign(static_cast<std::size_t>(mesh.triangle_count()), 0);
    for (int t = 0; t < mesh.triangle_count(); ++t) map.ancestor[static_cast<std::size_t>(t)] = t;
    return {mesh, map};
  }

  WorkMesh work;
  work.verts = mesh.vertices();
  work.vertex_parents = map.vertex_parents;
  work.edge_tris.reserve(static_cast<std::size_t>(mesh.edge_count()) * 4);
  for (int t = 0; t < mesh.triangle_count(); ++t)
    work.add_triangle(mesh.triangle(t).v, mesh.triangle(t).generation, t, 0);

  std::size_t split_budget = 64 * work.tri.size() + (1u << 20);

  const auto ensure_split = [&](int root) {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int t = stack.back();
      if (!work.alive[static_cast<std::size_t>(t)]) {
        stack.pop_back();
        continue;
      }
      const auto v = work.tri[static_cast<std::size_t>(t)];
      const int n = work.neighbor_across(v[0], v[1], t);
      if (n != -1) {
        const auto nv = work.tri[static_cast<std::size_t>(n)];
        const bool compatible = edge_key(nv[0], nv[1]) == edge_key(v[0], v[1]);
        if (!compatible) {
          stack.push_back(n);
          continue;
        }
      }
      if (split_budget-- == 0) throw Error("bisect: refinement closure did not terminate (incompatible marking)");
      const int w = static_cast<int>(work.verts.size());
      const Vec2& pa = work.verts[static_cast<std::size_t>(v[0])];
      const Vec2& pb = work.verts[static_cast<std::size_t>(v[1])];
      work.verts.push_back({0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])});
      work.vertex_parents.push_back({std::min(v[0], v[1]), std::max(v[0], v[1])});
      work.split_at(t, w);
      if (n != -1) work.split_at(n, w);
      stack.pop_back();
    }
  };

  for (int t : marked) {
    if (t < 0 || t >= mesh.triangle_count()) throw IndexOutOfRange("bisect: marked triangle id out of range");
    if (work.alive[static_cast<std::size_t>(t)]) ensure_split(t);
  }

  std::vector<Triangle> out_tris;
  map.ancestor.clear();
  map.splits_from_ancestor.clear();
  for (std::size_t t = 0; t < work.tri.size(); ++t) {
    if (!work.alive[t]) continue;
    Triangle tri;
    tri.v = work.tri[t];
    tri.generation = work.gen[t];
    out_tris.push_back(tri);
    map.ancestor.push_back(work.ancestor[t]);
    map.splits_from_ancestor.push_back(work.splits[t]);
  }
  map.vertex_parents = std::move(work.vertex_parents);
  return {Mesh2D(std::move(work.verts), std::move(out_tris)), map};
}

std::pair<Mesh2D, RefinementMap> uniform_refine_mapped(const Mesh2D& mesh) {
  std::vector<int> all(static_cast<std::size_t>(mesh.triangle_count()));
  for (int t = 0; t < mesh.triangle_count(); ++t) all[static_cast<std::size_t>(t)] = t;
  return bisect(mesh, all);
}

Mesh2D uniform_refine(const Mesh2D& mesh, int levels) {
  if (levels < 0) throw Error("uniform_refine: levels must be nonnegative");
  Mesh2D out = mesh;
  for (int l = 0; l < levels; ++l) out = uniform_refine_mapped(out).first;
  return out;
}

namespace {

Mesh2D structured_mesh(double h0, bool lshape) {
  if (!(h0 > 0.0)) throw Error("initial mesh: h0 must be positive");
  int n = static_cast<int>(std::lround(1.0 / h0));
  if (n < 2) n = 2;
  if (n % 2 != 0) ++n;  // keep (0.5, 0.5) on the grid
  const double g = 1.0 / n;

  std::vector<int> vid(static_cast<std::size_t>((n + 1) * (n + 1)), -1);
  std::vector<Vec2> verts;
  std::vector<Triangle> tris;
  const auto vertex_at = [&](int i, int j) {
    int& id = vid[static_cast<std::size_t>(j * (n + 1) + i)];
    if (id == -1) {
      id = static_cast<int>(verts.size());
      verts.push_back({i * g, j * g});
    }
    return id;
  };

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (lshape && 2 * i >= n && 2 * j >= n) continue;  // inside [0.5,1]^2
      const int ll = vertex_at(i, j);
      const int lr = vertex_at(i + 1, j);
      const int ur = vertex_at(i + 1, j + 1);
      const int ul = vertex_at(i, j + 1);
      // both refinement edges on the diagonal: compatible NVB marking
      tris.push_back({{ll, ur, ul}, 0});
      tris.push_back({{ur, ll, lr}, 0});
    }
  }
  return Mesh2D(std::move(verts), std::move(tris));
}

}  // namespace

Mesh2D initial_lshape(double h0) { return structured_mesh(h0, true); }

Mesh2D initial_unit_square(double h0) { return structured_mesh(h0, false); }

void write_mesh(const Mesh2D& mesh, std::ostream& out) {
  out.precision(17);
  out << mesh.vertex_count() << "\n";
  for (const auto& v : mesh.vertices()) out << v[0] << " " << v[1] << "\n";
  out << mesh.triangle_count() << "\n";
  // refEdge is the local edge index; the storage convention pins it to 0
  for (const auto& t : mesh.triangles()) out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " 0\n";
}

void write_mesh_file(const Mesh2D& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_mesh_file: cannot open " + path);
  write_mesh(mesh, out);
}

Mesh2D read_mesh(std::istream& in) {
  int nv = 0;
  if (!(in >> nv) || nv < 3) throw Error("read_mesh: bad vertex count");
  std::vector<Vec2> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts)
    if (!(in >> v[0] >> v[1])) throw Error("read_mesh: bad vertex line");
  int nt = 0;
  if (!(in >> nt) || nt < 1) throw Error("read_mesh: bad triangle count");
  std::vector<Triangle> tris(static_cast<std::size_t>(nt));
  for (auto& t : tris) {
    int ref = 0;
    if (!(in >> t.v[0] >> t.v[1] >> t.v[2] >> ref)) throw Error("read_mesh: bad triangle line");
    if (ref < 0 || ref > 2) throw Error("read_mesh: refinement edge index out of range");
    // rotate so the refinement edge becomes (v0, v1)
    std::rotate(t.v.begin(), t.v.begin() + ref, t.v.end());
  }
  return Mesh2D(std::move(verts), std::move(tris));
}

Mesh2D read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_mesh_file: cannot open " + path);
  return read_mesh(in);
}

}  // namespace sgfem
