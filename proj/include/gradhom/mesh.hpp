#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradhom/tensors.hpp"

namespace gradhom {

/// Axis-aligned periodic bounding box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
};

using Tet = std::array<int, 4>;

/// Linear tetrahedral mesh of the full RVE box (void regions included).
struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<Tet> tets;
  std::vector<int> region;  // phase tag per tet
  Box box;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_tets() const { return tets.size(); }

  /// Signed volume of one tet (positive for a valid mesh).
  double tet_volume(std::size_t e) const;
  Vec3 tet_centroid(std::size_t e) const;

  /// Checks positive orientation, region sizes and node containment.
  /// Throws MeshError.
  void validate() const;
};

/// Piecewise-constant microscale stiffness, keyed by region tag.
struct MaterialField {
  std::map<int, Stiffness4> by_region;

  const Stiffness4& at(int tag) const;
  /// Throws MeshError if a region present in the mesh has no stiffness.
  void validate(const TetMesh& mesh) const;
};

enum class GeometryKind { Homogeneous, Laminate, CubicInclusion, Honeycomb };

/// Hexagon orientation: which box axis the hexagon's vertices point along.
enum class HexOrientation { PointyY, PointyX };

struct RveGeometry {
  GeometryKind kind = GeometryKind::Homogeneous;
  Vec3 dimensions = Vec3::Ones();  // m
  double resolution = 0.25;        // target element edge length, m

  // laminate: layer fractions stacked along normal_axis; the first layer is
  // centred in the box and the last one wraps across the periodic boundary.
  std::vector<double> layer_fractions;
  int normal_axis = 0;

  // cubic inclusion: edge length of the centred inclusion over box edge.
  double inclusion_fraction = 0.5;

  // honeycomb: walls of one regular hexagon inscribed in the xy-footprint of
  // the box, extruded along axis 3. Exactly one of wall_thickness / infill.
  std::optional<double> wall_thickness;  // m
  std::optional<double> infill;          // solid volume fraction
  HexOrientation orientation = HexOrientation::PointyY;
  std::array<double, 2> offset{0.0, 0.0};  // in-plane shift of the pattern, m

  // Void stiffness relative to the solid when only one phase is given.
  double void_contrast = 1e-6;

  /// Throws ConfigError for non-positive sizes or fractions outside (0, 1).
  void validate() const;
};

struct GeneratedRve {
  TetMesh mesh;
  MaterialField materials;
  double solid_fraction = 1.0;           // volume fraction of the first phase
  std::optional<double> wall_thickness;  // honeycomb only
};

/// Builds a structured, interface-aligned tet mesh (six tets per grid hex)
/// and its material field. Phase i of `phases` is assigned to layer i
/// (laminate), matrix/inclusion (inclusion) or solid/void (honeycomb).
GeneratedRve generate(const RveGeometry& geom, std::span<const IsotropicPhase> phases);

/// Region tag used for the soft void phase when the honeycomb is given a
/// single phase.
int void_region_tag(std::span<const IsotropicPhase> phases);

// Geometric moments over the whole box domain. Throws MeshError for a
// degenerate (zero-volume) mesh.
double total_volume(const TetMesh& mesh);
Vec3 geometric_center(const TetMesh& mesh);
Vec3 first_moment(const TetMesh& mesh, const Vec3& center);
/// (1/V) * integral of (X - c)(X - c)^T, exact for linear tets.
Mat3 second_moment(const TetMesh& mesh, const Vec3& center);

struct AxisCongruence {
  int pairs = 0;               // min-face nodes matched with a max-face node
  double worst_mismatch = 0.;  // largest partner distance found
};

struct PeriodicityReport {
  std::array<AxisCongruence, 3> axes;
};

/// Node pairs (min face, max face) matched across one axis by translation.
struct FacePairing {
  std::vector<std::pair<int, int>> pairs;
  double worst_mismatch = 0.0;
};

/// Unique nearest-partner matching within `tolerance` (m). Throws
/// PeriodicityError naming the node and axis when a boundary node has no
/// partner or when two candidates lie within tolerance.
FacePairing pair_faces(const TetMesh& mesh, int axis, double tolerance);

/// Verifies that opposite boundary node sets coincide under translation.
/// Throws PeriodicityError with the worst mismatch when they do not.
PeriodicityReport check_face_congruence(const TetMesh& mesh, double tolerance);

struct ImportedMesh {
  TetMesh mesh;
  std::vector<int> region_tags;  // distinct physical tags in ascending order
  PeriodicityReport periodicity;
};

/// Reads an ASCII Gmsh 2.2 file with 4-node tetrahedra only.
ImportedMesh import_msh(const std::filesystem::path& path);
void export_msh(const TetMesh& mesh, const std::filesystem::path& path);

using PointField = std::pair<std::string, std::vector<Vec3>>;

/// Legacy VTK ASCII unstructured grid with per-tet region scalars and
/// optional nodal vector fields.
void write_vtk(const TetMesh& mesh, const std::filesystem::path& path,
               std::span<const PointField> point_fields = {});

}  // namespace gradhom
