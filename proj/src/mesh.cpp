#include "gradhom/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gradhom/error.hpp"

namespace gradhom {

double TetMesh::tet_volume(std::size_t e) const {
  const auto& t = tets[e];
  const Vec3 a = nodes[t[1]] - nodes[t[0]];
  const Vec3 b = nodes[t[2]] - nodes[t[0]];
  const Vec3 c = nodes[t[3]] - nodes[t[0]];
  return a.dot(b.cross(c)) / 6.0;
}

Vec3 TetMesh::tet_centroid(std::size_t e) const {
  const auto& t = tets[e];
  return 0.25 * (nodes[t[0]] + nodes[t[1]] + nodes[t[2]] + nodes[t[3]]);
}

void TetMesh::validate() const {
  if (tets.empty() || nodes.empty()) throw MeshError("mesh has no elements");
  if (region.size() != tets.size()) throw MeshError("region tag count differs from tet count");
  const int n = static_cast<int>(nodes.size());
  for (std::size_t e = 0; e < tets.size(); ++e) {
    for (int v : tets[e]) {
      if (v < 0 || v >= n) throw MeshError("tet " + std::to_string(e) + " references missing node " + std::to_string(v));
    }
    if (!(tet_volume(e) > 0.0)) {
      throw MeshError("tet " + std::to_string(e) + " has non-positive volume " + std::to_string(tet_volume(e)));
    }
  }
  const double tol = 1e-9 * box.diagonal();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (nodes[i][k] < box.lo[k] - tol || nodes[i][k] > box.hi[k] + tol) {
        throw MeshError("node " + std::to_string(i) + " lies outside the periodic box");
      }
    }
  }
}

const Stiffness4& MaterialField::at(int tag) const {
  const auto it = by_region.find(tag);
  if (it == by_region.end()) throw MeshError("no stiffness assigned to region " + std::to_string(tag));
  return it->second;
}

void MaterialField::validate(const TetMesh& mesh) const {
  std::set<int> tags(mesh.region.begin(), mesh.region.end());
  for (int tag : tags) (void)at(tag);
}

void RveGeometry::validate() const {
  for (int k = 0; k < 3; ++k) {
    if (!(dimensions[k] > 0.0)) throw ConfigError("geometry dimensions must be positive");
  }
  if (!(resolution > 0.0)) throw ConfigError("geometry resolution must be positive");
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  switch (kind) {
    case GeometryKind::Homogeneous:
      break;
    case GeometryKind::Laminate: {
      if (layer_fractions.size() < 2) throw ConfigError("laminate needs at least two layer fractions");
      double sum = 0.0;
      for (double f : layer_fractions) {
        if (!in_unit(f)) throw ConfigError("laminate layer fractions must lie in (0, 1)");
        sum += f;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("laminate layer fractions must sum to 1");
      if (normal_axis < 0 || normal_axis > 2) throw ConfigError("laminate normal axis must be 1, 2 or 3");
      break;
    }
    case GeometryKind::CubicInclusion:
      if (!in_unit(inclusion_fraction)) throw ConfigError("inclusion fraction must lie in (0, 1)");
      break;
    case GeometryKind::Honeycomb:
      if (wall_thickness.has_value() == infill.has_value()) {
        throw ConfigError("honeycomb needs exactly one of wall_thickness or infill");
      }
      if (infill && !in_unit(*infill)) throw ConfigError("honeycomb infill must lie in (0, 1)");
      if (wall_thickness && !(*wall_thickness > 0.0)) throw ConfigError("honeycomb wall thickness must be positive");
      if (!in_unit(void_contrast)) throw ConfigError("void contrast must lie in (0, 1)");
      break;
  }
}

namespace {

// Grid coordinates along one axis: every breakpoint is a grid plane, each
// interval is split uniformly with spacing no larger than h.
std::vector<double> axis_grid(double length, std::vector<double> breaks, double h) {
  breaks.push_back(0.0);
  breaks.push_back(length);
  for (double& b : breaks) b = std::clamp(b, 0.0, length);
  std::sort(breaks.begin(), breaks.end());
  const double merge = 1e-12 * length;
  std::vector<double> uniq;
  for (double b : breaks) {
    if (uniq.empty() || b - uniq.back() > merge) uniq.push_back(b);
  }
  uniq.back() = length;

  std::vector<double> grid{0.0};
  for (std::size_t s = 0; s + 1 < uniq.size(); ++s) {
    const double a = uniq[s];
    const double b = uniq[s + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
    for (int i = 1; i <= n; ++i) grid.push_back(i == n ? b : a + (b - a) * i / n);
  }
  return grid;
}

// Six tets per hex along the main diagonal (Kuhn split). The split is
// invariant under translation, so opposite faces carry congruent traces.
TetMesh structured_mesh(const std::array<std::vector<double>, 3>& grid) {
  TetMesh mesh;
  const int nx = static_cast<int>(grid[0].size());
  const int ny = static_cast<int>(grid[1].size());
  const int nz = static_cast<int>(grid[2].size());
  mesh.nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) mesh.nodes.emplace_back(grid[0][i], grid[1][j], grid[2][k]);

  auto node = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  static constexpr std::array<std::array<int, 3>, 6> kPerms{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

  mesh.tets.reserve(static_cast<std::size_t>(nx - 1) * (ny - 1) * (nz - 1) * 6);
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        auto corner = [&](int bits) { return node(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1)); };
        for (const auto& p : kPerms) {
          const int b1 = 1 << p[0];
          const int b2 = b1 | (1 << p[1]);
          Tet t{corner(0), corner(b1), corner(b2), corner(7)};
          const Vec3 a = mesh.nodes[t[1]] - mesh.nodes[t[0]];
          const Vec3 b = mesh.nodes[t[2]] - mesh.nodes[t[0]];
          const Vec3 c = mesh.nodes[t[3]] - mesh.nodes[t[0]];
          if (a.dot(b.cross(c)) < 0.0) std::swap(t[2], t[3]);
          mesh.tets.push_back(t);
        }
      }
  mesh.box.lo = Vec3(grid[0].front(), grid[1].front(), grid[2].front());
  mesh.box.hi = Vec3(grid[0].back(), grid[1].back(), grid[2].back());
  mesh.region.assign(mesh.tets.size(), 0);
  return mesh;
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Distance from an in-plane point to the periodic network of hexagon walls.
class HexagonWalls {
 public:
  HexagonWalls(const RveGeometry& g) : lx_(g.dimensions.x()), ly_(g.dimensions.y()) {
    const Eigen::Vector2d c(0.5 * lx_ + g.offset[0], 0.5 * ly_ + g.offset[1]);
    center_ = c;
    if (g.orientation == HexOrientation::PointyY) {
      verts_ = {{0.0, 0.5 * ly_}, {-0.5 * lx_, 0.25 * ly_}, {-0.5 * lx_, -0.25 * ly_},
                {0.0, -0.5 * ly_}, {0.5 * lx_, -0.25 * ly_}, {0.5 * lx_, 0.25 * ly_}};
    } else {
      verts_ = {{0.5 * lx_, 0.0}, {0.25 * lx_, 0.5 * ly_}, {-0.25 * lx_, 0.5 * ly_},
                {-0.5 * lx_, 0.0}, {-0.25 * lx_, -0.5 * ly_}, {0.25 * lx_, -0.5 * ly_}};
    }
  }

  double distance(double x, double y) const {
    Eigen::Vector2d p(x - center_.x(), y - center_.y());
    p.x() -= lx_ * std::floor(p.x() / lx_ + 0.5);
    p.y() -= ly_ * std::floor(p.y() / ly_ + 0.5);
    double best = INFINITY;
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = -1; sy <= 1; ++sy) {
        const Eigen::Vector2d q(p.x() + sx * lx_, p.y() + sy * ly_);
        for (std::size_t v = 0; v < verts_.size(); ++v) {
          best = std::min(best, segment_distance(q, verts_[v], verts_[(v + 1) % verts_.size()]));
        }
      }
    return best;
  }

 private:
  double lx_, ly_;
  Eigen::Vector2d center_;
  std::vector<Eigen::Vector2d> verts_;
};

void require_phases(std::span<const IsotropicPhase> phases, std::size_t lo, std::size_t hi, const char* what) {
  if (phases.size() < lo || phases.size() > hi) {
    std::ostringstream os;
    os << what << " geometry needs " << lo;
    if (hi != lo) os << " to " << hi;
    os << " phases, got " << phases.size();
    throw ConfigError(os.str());
  }
}

double region_fraction(const TetMesh& mesh, int tag) {
  double solid = 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const double v = mesh.tet_volume(e);
    total += v;
    if (mesh.region[e] == tag) solid += v;
  }
  return solid / total;
}

}  // namespace

int void_region_tag(std::span<const IsotropicPhase> phases) {
  int tag = 0;
  for (const auto& p : phases) tag = std::max(tag, p.phase_id);
  return tag + 1;
}

GeneratedRve generate(const RveGeometry& geom, std::span<const IsotropicPhase> phases) {
  geom.validate();
  const Vec3 L = geom.dimensions;
  const double h = geom.resolution;
  std::array<std::vector<double>, 3> breaks;
  GeneratedRve out;

  switch (geom.kind) {
    case GeometryKind::Homogeneous: {
      require_phases(phases, 1, 1, "homogeneous");
      out.mesh = structured_mesh({axis_grid(L[0], {}, h), axis_grid(L[1], {}, h), axis_grid(L[2], {}, h)});
      std::fill(out.mesh.region.begin(), out.mesh.region.end(), phases[0].phase_id);
      break;
    }
    case GeometryKind::Laminate: {
      const auto& f = geom.layer_fractions;
      require_phases(phases, f.size(), f.size(), "laminate");
      const int ax = geom.normal_axis;
      const double len = L[ax];
      const double start = 0.5 * len * (1.0 - f[0]);
      std::vector<double> cuts;
      double s = start;
      for (double fi : f) {
        cuts.push_back(std::fmod(s, len));
        s += fi * len;
      }
      breaks[ax] = cuts;
      out.mesh = structured_mesh({axis_grid(L[0], breaks[0], h), axis_grid(L[1], breaks[1], h),
                                  axis_grid(L[2], breaks[2], h)});
      for (std::size_t e = 0; e < out.mesh.num_tets(); ++e) {
        double t = out.mesh.tet_centroid(e)[ax] - start;
        t -= len * std::floor(t / len);
        std::size_t layer = 0;
        double acc = f[0] * len;
        while (layer + 1 < f.size() && t >= acc) acc += f[++layer] * len;
        out.mesh.region[e] = phases[layer].phase_id;
      }
      break;
    }
    case GeometryKind::CubicInclusion: {
      require_phases(phases, 2, 2, "inclusion");
      for (int k = 0; k < 3; ++k) {
        breaks[k] = {0.5 * L[k] * (1.0 - geom.inclusion_fraction), 0.5 * L[k] * (1.0 + geom.inclusion_fraction)};
      }
      out.mesh = structured_mesh({axis_grid(L[0], breaks[0], h), axis_grid(L[1], breaks[1], h),
                                  axis_grid(L[2], breaks[2], h)});
      for (std::size_t e = 0; e < out.mesh.num_tets(); ++e) {
        const Vec3 c = out.mesh.tet_centroid(e);
        bool inside = true;
        for (int k = 0; k < 3; ++k) inside = inside && std::abs(c[k] - 0.5 * L[k]) < 0.5 * L[k] * geom.inclusion_fraction;
        out.mesh.region[e] = inside ? phases[1].phase_id : phases[0].phase_id;
      }
      break;
    }
    case GeometryKind::Honeycomb: {
      require_phases(phases, 1, 2, "honeycomb");
      out.mesh = structured_mesh({axis_grid(L[0], {}, h), axis_grid(L[1], {}, h), axis_grid(L[2], {}, h)});
      const HexagonWalls walls(geom);
      const std::size_t nt = out.mesh.num_tets();
      std::vector<double> dist(nt);
      std::vector<double> vol(nt);
      const double snap = 1e-9 * h;
      for (std::size_t e = 0; e < nt; ++e) {
        const Vec3 c = out.mesh.tet_centroid(e);
        // snap so symmetric centroids tie exactly despite rounding
        dist[e] = std::round(walls.distance(c.x(), c.y()) / snap) * snap;
        vol[e] = out.mesh.tet_volume(e);
      }
      const double total = std::accumulate(vol.begin(), vol.end(), 0.0);

      double half_width = 0.0;
      if (geom.wall_thickness) {
        half_width = 0.5 * *geom.wall_thickness;
      } else {
        // Sort by wall distance; the best threshold is the prefix whose
        // volume is closest to the target fraction.
        std::vector<std::size_t> order(nt);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
        });
        const double target = *geom.infill * total;
        double acc = 0.0;
        std::size_t best = 0;
        double best_err = target;
        for (std::size_t i = 0; i < nt; ++i) {
          acc += vol[order[i]];
          // only cut between distinct distances
          if (i + 1 < nt && dist[order[i + 1]] == dist[order[i]]) continue;
          const double err = std::abs(acc - target);
          if (err < best_err) {
            best_err = err;
            best = i + 1;
          }
        }
        if (best == 0) {
          half_width = 0.0;
        } else if (best == nt) {
          half_width = dist[order[nt - 1]];
        } else {
          half_width = 0.5 * (dist[order[best - 1]] + dist[order[best]]);
        }
      }

      const double wall = 2.0 * half_width;
      const double wall_max = 0.5 * std::min(L[0], L[1]);
      if (wall > wall_max) {
        std::ostringstream os;
        os << "honeycomb wall thickness " << wall << " m exceeds the admissible maximum " << wall_max
           << " m for this box";
        throw GeometryError(os.str());
      }
      if (wall < h) {
        std::ostringstream os;
        os << "honeycomb wall thickness " << wall << " m is below the mesh resolution " << h
           << " m; refine the mesh";
        throw GeometryError(os.str());
      }

      const int solid_tag = phases[0].phase_id;
      const int void_tag = phases.size() == 2 ? phases[1].phase_id : void_region_tag(phases);
      for (std::size_t e = 0; e < nt; ++e) out.mesh.region[e] = dist[e] <= half_width ? solid_tag : void_tag;
      out.wall_thickness = wall;

      if (geom.infill) {
        const double f = region_fraction(out.mesh, solid_tag);
        if (std::abs(f - *geom.infill) > 0.01) {
          std::ostringstream os;
          os << "honeycomb infill " << *geom.infill << " is unreachable on this mesh (closest " << f << ")";
          throw GeometryError(os.str());
        }
      }
      break;
    }
  }

  for (const auto& p : phases) out.materials.by_region[p.phase_id] = isotropic_stiffness(p);
  if (geom.kind == GeometryKind::Honeycomb && phases.size() == 1) {
    IsotropicPhase soft{phases[0].young_modulus * geom.void_contrast, 0.35, void_region_tag(phases)};
    out.materials.by_region[soft.phase_id] = isotropic_stiffness(soft);
  }
  out.solid_fraction = region_fraction(out.mesh, phases[0].phase_id);
  out.mesh.validate();
  out.materials.validate(out.mesh);
  return out;
}

double total_volume(const TetMesh& mesh) {
  double v = 0.0;
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) v += mesh.tet_volume(e);
  if (!(v > 0.0)) throw MeshError("degenerate mesh: total volume is " + std::to_string(v));
  return v;
}

Vec3 geometric_center(const TetMesh& mesh) {
  const double V = total_volume(mesh);
  // Accumulate relative to the box corner to limit cancellation.
  Vec3 m = Vec3::Zero();
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) m += mesh.tet_volume(e) * (mesh.tet_centroid(e) - mesh.box.lo);
  return mesh.box.lo + m / V;
}

Vec3 first_moment(const TetMesh& mesh, const Vec3& center) {
  const double V = total_volume(mesh);
  Vec3 m = Vec3::Zero();
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) m += mesh.tet_volume(e) * (mesh.tet_centroid(e) - center);
  return m / V;
}

Mat3 second_moment(const TetMesh& mesh, const Vec3& center) {
  const double V = total_volume(mesh);
  Mat3 I = Mat3::Zero();
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const auto& t = mesh.tets[e];
    Mat3 outer = Mat3::Zero();
    Vec3 sum = Vec3::Zero();
    for (int a = 0; a < 4; ++a) {
      const Vec3 v = mesh.nodes[t[a]] - center;
      outer += v * v.transpose();
      sum += v;
    }
    I += mesh.tet_volume(e) / 20.0 * (outer + sum * sum.transpose());
  }
  return I / V;
}

namespace {

const char* axis_name(int axis) {
  static constexpr const char* kNames[3] = {"x1", "x2", "x3"};
  return kNames[axis];
}

double nearest_on_face(const TetMesh& mesh, const std::vector<int>& face, const Vec3& p, int axis) {
  double best = INFINITY;
  for (int n : face) {
    Vec3 d = mesh.nodes[n] - p;
    d[axis] = 0.0;
    best = std::min(best, d.norm());
  }
  return best;
}

}  // namespace

FacePairing pair_faces(const TetMesh& mesh, int axis, double tolerance) {
  if (!(tolerance > 0.0)) throw ConfigError("node matching tolerance must be positive");
  const int u = (axis + 1) % 3;
  const int v = (axis + 2) % 3;
  std::vector<int> lo_face;
  std::vector<int> hi_face;
  for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
    const double x = mesh.nodes[n][axis];
    if (std::abs(x - mesh.box.lo[axis]) <= tolerance) lo_face.push_back(static_cast<int>(n));
    if (std::abs(x - mesh.box.hi[axis]) <= tolerance) hi_face.push_back(static_cast<int>(n));
  }

  auto cell = [&](const Vec3& p) {
    return std::pair<std::int64_t, std::int64_t>(std::llround(std::floor((p[u] - mesh.box.lo[u]) / tolerance)),
                                                 std::llround(std::floor((p[v] - mesh.box.lo[v]) / tolerance)));
  };
  struct PairHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
      return std::hash<std::int64_t>()(k.first * 0x9E3779B97F4A7C15LL ^ k.second);
    }
  };
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<int>, PairHash> grid;
  for (int n : hi_face) grid[cell(mesh.nodes[n])].push_back(n);

  FacePairing out;
  std::vector<int> hits(mesh.num_nodes(), 0);
  for (int n : lo_face) {
    const Vec3& p = mesh.nodes[n];
    const auto c = cell(p);
    int partner = -1;
    double partner_dist = 0.0;
    for (std::int64_t di = -1; di <= 1; ++di)
      for (std::int64_t dj = -1; dj <= 1; ++dj) {
        const auto it = grid.find({c.first + di, c.second + dj});
        if (it == grid.end()) continue;
        for (int m : it->second) {
          Vec3 d = mesh.nodes[m] - p;
          d[axis] = 0.0;
          const double dist = d.norm();
          if (dist > tolerance) continue;
          if (partner >= 0) {
            std::ostringstream os;
            os << "ambiguous periodic match along " << axis_name(axis) << ": node " << n << " has partners "
               << partner << " and " << m << " within tolerance " << tolerance;
            throw PeriodicityError(os.str());
          }
          partner = m;
          partner_dist = dist;
        }
      }
    if (partner < 0) {
      std::ostringstream os;
      os << "node " << n << " on face " << axis_name(axis) << " = min has no periodic partner on the opposite face"
         << " (nearest candidate at " << nearest_on_face(mesh, hi_face, p, axis) << " m, tolerance "
         << tolerance << " m)";
      throw PeriodicityError(os.str());
    }
    if (++hits[partner] > 1) {
      std::ostringstream os;
      os << "ambiguous periodic match along " << axis_name(axis) << ": node " << partner
         << " is the partner of more than one node";
      throw PeriodicityError(os.str());
    }
    out.pairs.emplace_back(n, partner);
    out.worst_mismatch = std::max(out.worst_mismatch, partner_dist);
  }
  for (int m : hi_face) {
    if (hits[m] == 0) {
      std::ostringstream os;
      os << "node " << m << " on face " << axis_name(axis) << " = max has no periodic partner on the opposite face"
         << " (nearest candidate at " << nearest_on_face(mesh, lo_face, mesh.nodes[m], axis) << " m, tolerance "
         << tolerance << " m)";
      throw PeriodicityError(os.str());
    }
  }
  return out;
}

PeriodicityReport check_face_congruence(const TetMesh& mesh, double tolerance) {
  PeriodicityReport report;
  for (int axis = 0; axis < 3; ++axis) {
    const FacePairing pairing = pair_faces(mesh, axis, tolerance);
    report.axes[axis].pairs = static_cast<int>(pairing.pairs.size());
    report.axes[axis].worst_mismatch = pairing.worst_mismatch;
  }
  return report;
}

}  // namespace gradhom
