#include "lbcnn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>

#include "lbcnn/error.hpp"

namespace lbcnn {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int n = static_cast<int>(vertices_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& t = faces_[f];
    for (int v : t) {
      if (v < 0 || v >= n) {
        throw InputError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                         " out of range [0, " + std::to_string(n) + ")");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw InputError("face " + std::to_string(f) + " has repeated vertices");
    }
  }

  edges_.reserve(faces_.size() * 3);
  for (const Face& t : faces_) {
    for (int c = 0; c < 3; ++c) {
      int a = t[c];
      int b = t[(c + 1) % 3];
      edges_.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  neighbors_.assign(vertices_.size(), {});
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

double TriMesh::face_area(std::size_t f) const {
  const Face& t = faces_[f];
  const Vec3 e1 = vertices_[t[1]] - vertices_[t[0]];
  const Vec3 e2 = vertices_[t[2]] - vertices_[t[0]];
  return 0.5 * e1.cross(e2).norm();
}

double default_area_threshold(const TriMesh& mesh) {
  if (mesh.num_faces() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) total += mesh.face_area(f);
  return 1e-12 * total / static_cast<double>(mesh.num_faces());
}

ValidationReport validate(const TriMesh& mesh, double area_threshold) {
  ValidationReport report;

  std::map<Edge, int> edge_faces;
  for (const Face& t : mesh.faces()) {
    for (int c = 0; c < 3; ++c) {
      int a = t[c];
      int b = t[(c + 1) % 3];
      ++edge_faces[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, count] : edge_faces) {
    if (count == 1) ++report.boundary_edge_count;
    if (count > 2) ++report.nonmanifold_edges;
  }

  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face_area(f) <= area_threshold) report.degenerate_faces.push_back(f);
  }

  if (mesh.num_vertices() > 0) {
    const auto dist = ring_distances(mesh, 0);
    report.connected = std::none_of(dist.begin(), dist.end(), [](std::size_t d) { return d == kUnreachable; });
  }
  return report;
}

ValidationReport validate(const TriMesh& mesh) { return validate(mesh, default_area_threshold(mesh)); }

void require_valid(const TriMesh& mesh) {
  const ValidationReport r = validate(mesh);
  if (r.ok()) return;
  std::ostringstream msg;
  msg << "mesh failed validation:";
  if (r.nonmanifold_edges) msg << " " << r.nonmanifold_edges << " non-manifold edge(s);";
  if (!r.degenerate_faces.empty()) msg << " degenerate face " << r.degenerate_faces.front() << ";";
  if (!r.connected) msg << " not connected;";
  throw InputError(msg.str());
}

namespace {

// Returns the next non-blank, non-comment line; false at end of stream.
bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  throw InputError("OFF line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

TriMesh load_off(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_content_line(in, line, line_no)) parse_error(line_no, "missing OFF header");

  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") parse_error(line_no, "malformed header, expected 'OFF'");

  // Counts may share the header line ("OFF 12 20 30") or follow on their own line.
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_content_line(in, line, line_no)) parse_error(line_no, "missing counts line");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) parse_error(line_no, "malformed counts line");
    counts >> ne;
  } else if (!(header >> nf)) {
    parse_error(line_no, "malformed counts line");
  }
  if (nv < 0 || nf < 0) parse_error(line_no, "negative element count");

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nv));
  for (long v = 0; v < nv; ++v) {
    if (!next_content_line(in, line, line_no)) parse_error(line_no, "unexpected end of file in vertex list");
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) parse_error(line_no, "malformed vertex");
    vertices.push_back(p);
  }

  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(nf));
  for (long f = 0; f < nf; ++f) {
    if (!next_content_line(in, line, line_no)) parse_error(line_no, "unexpected end of file in face list");
    std::istringstream ls(line);
    long count = 0;
    if (!(ls >> count)) parse_error(line_no, "malformed face");
    if (count != 3) parse_error(line_no, "non-triangle face (" + std::to_string(count) + " vertices)");
    Face t{};
    for (int& idx : t) {
      long value = 0;
      if (!(ls >> value)) parse_error(line_no, "malformed face");
      if (value < 0 || value >= nv) parse_error(line_no, "face index " + std::to_string(value) + " out of range");
      idx = static_cast<int>(value);
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) parse_error(line_no, "face has repeated vertices");
    faces.push_back(t);
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

TriMesh load_off_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file " + path);
  return load_off(in);
}

void save_off(std::ostream& out, const TriMesh& mesh) {
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.edges().size() << '\n';
  out << std::setprecision(17);
  for (const Vec3& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Face& t : mesh.faces()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void save_off_file(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path);
  save_off(out, mesh);
}

TriMesh generate_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 7) throw InputError("icosphere subdivisions must be in [0, 7]");
  if (!(radius > 0.0)) throw InputError("icosphere radius must be positive");

  const double phi = std::numbers::phi;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (Vec3& v : verts) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<Edge, int> midpoint;
    auto mid = [&](int a, int b) {
      const Edge key{std::min(a, b), std::max(a, b)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& t : faces) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  for (Vec3& v : verts) v *= radius;
  return TriMesh(std::move(verts), std::move(faces));
}

TriMesh generate_torus(int rings, int segments, double major_radius, double minor_radius) {
  if (rings < 3 || segments < 3) throw InputError("torus needs at least 3 rings and 3 segments");
  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>(rings) * segments);
  for (int r = 0; r < rings; ++r) {
    const double u = 2.0 * std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double v = 2.0 * std::numbers::pi * s / segments;
      const double w = major_radius + minor_radius * std::cos(v);
      verts.emplace_back(w * std::cos(u), w * std::sin(u), minor_radius * std::sin(v));
    }
  }
  auto id = [&](int r, int s) { return ((r + rings) % rings) * segments + (s + segments) % segments; };
  std::vector<Face> faces;
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      faces.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
      faces.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
    }
  }
  return TriMesh(std::move(verts), std::move(faces));
}

TriMesh generate_grid(int nx, int ny, double spacing) {
  if (nx < 2 || ny < 2) throw InputError("grid needs at least 2 x 2 vertices");
  std::vector<Vec3> verts;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) verts.emplace_back(i * spacing, j * spacing, 0.0);
  std::vector<Face> faces;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int a = j * nx + i;
      faces.push_back({a, a + 1, a + nx + 1});
      faces.push_back({a, a + nx + 1, a + nx});
    }
  }
  return TriMesh(std::move(verts), std::move(faces));
}

std::vector<std::size_t> ring_distances(const TriMesh& mesh, int source) {
  if (source < 0 || static_cast<std::size_t>(source) >= mesh.num_vertices()) {
    throw InputError("vertex index " + std::to_string(source) + " out of range");
  }
  std::vector<std::size_t> dist(mesh.num_vertices(), kUnreachable);
  std::queue<int> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : mesh.neighbors()[v]) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        frontier.push(w);
      }
    }
  }
  return dist;
}

std::size_t ring_distance(const TriMesh& mesh, int i, int j) {
  if (j < 0 || static_cast<std::size_t>(j) >= mesh.num_vertices()) {
    throw InputError("vertex index " + std::to_string(j) + " out of range");
  }
  return ring_distances(mesh, i)[j];
}

}  // namespace lbcnn
