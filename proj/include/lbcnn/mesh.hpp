#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lbcnn {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;
/// Undirected edge stored canonically as (min, max).
using Edge = std::pair<int, int>;

/// Triangle mesh. Immutable after construction; the constructor rejects
/// out-of-range indices and faces with repeated vertices.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

  /// Sorted list of canonical undirected edges.
  const std::vector<Edge>& edges() const { return edges_; }
  /// Sorted neighbor lists of the 1-skeleton.
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  double face_area(std::size_t f) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

struct ValidationReport {
  std::size_t nonmanifold_edges = 0;
  std::vector<std::size_t> degenerate_faces;
  std::size_t boundary_edge_count = 0;
  bool connected = false;

  bool ok() const { return nonmanifold_edges == 0 && degenerate_faces.empty() && connected; }
};

/// 1e-12 times the mean face area.
double default_area_threshold(const TriMesh& mesh);

ValidationReport validate(const TriMesh& mesh, double area_threshold);
ValidationReport validate(const TriMesh& mesh);

/// Throws InputError with a summary when the mesh fails validation.
void require_valid(const TriMesh& mesh);

// OFF text format. Comment lines starting with '#' and blank lines are skipped.
TriMesh load_off(std::istream& in);
TriMesh load_off_file(const std::string& path);
void save_off(std::ostream& out, const TriMesh& mesh);
void save_off_file(const std::string& path, const TriMesh& mesh);

/// Subdivided icosahedron projected onto a sphere; subdivisions <= 7.
TriMesh generate_icosphere(int subdivisions, double radius = 1.0);

/// Closed torus with `rings` x `segments` vertices (both >= 3).
TriMesh generate_torus(int rings, int segments, double major_radius = 2.0, double minor_radius = 1.0);

/// Flat nx x ny vertex grid in the z = 0 plane (a mesh with boundary).
TriMesh generate_grid(int nx, int ny, double spacing = 1.0);

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Hop counts from `source` to every vertex; kUnreachable where no path exists.
std::vector<std::size_t> ring_distances(const TriMesh& mesh, int source);
std::size_t ring_distance(const TriMesh& mesh, int i, int j);

}  // namespace lbcnn
