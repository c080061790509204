#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gradhom/error.hpp"
#include "gradhom/mesh.hpp"

namespace gradhom {
namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw ImportError("cannot open mesh file " + path.string());
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string expect(const char* what) {
    std::string line;
    if (!next(line)) throw ImportError(where(path_, line_no_) + "unexpected end of file while reading " + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ImportError(where(path_, line_no_) + msg); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

std::size_t parse_count(LineReader& r, const char* what) {
  std::istringstream is(r.expect(what));
  long long n = -1;
  if (!(is >> n) || n < 0) r.fail(std::string("bad ") + what + " count");
  return static_cast<std::size_t>(n);
}

}  // namespace

ImportedMesh import_msh(const std::filesystem::path& path) {
  LineReader r(path);
  std::vector<Vec3> nodes;
  std::unordered_map<long long, int> node_index;
  std::vector<std::array<long long, 4>> raw_tets;
  std::vector<int> tags;
  std::set<int> bad_types;
  bool have_format = false;
  bool have_nodes = false;
  bool have_elements = false;

  std::string line;
  while (r.next(line)) {
    if (line == "$MeshFormat") {
      std::istringstream is(r.expect("format header"));
      std::string version;
      int file_type = -1;
      is >> version >> file_type;
      if (version.rfind("2.", 0) != 0) r.fail("unsupported Gmsh version " + version + " (need 2.2)");
      if (file_type != 0) r.fail("binary Gmsh files are not supported");
      have_format = true;
    } else if (line == "$Nodes") {
      const std::size_t n = parse_count(r, "node");
      nodes.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::istringstream is(r.expect("nodes"));
        long long id;
        double x, y, z;
        if (!(is >> id >> x >> y >> z)) r.fail("malformed node record");
        if (!node_index.emplace(id, static_cast<int>(nodes.size())).second) {
          r.fail("duplicate node id " + std::to_string(id));
        }
        nodes.emplace_back(x, y, z);
      }
      have_nodes = true;
    } else if (line == "$Elements") {
      const std::size_t n = parse_count(r, "element");
      for (std::size_t i = 0; i < n; ++i) {
        std::istringstream is(r.expect("elements"));
        long long id;
        int type, ntags;
        if (!(is >> id >> type >> ntags) || ntags < 0) r.fail("malformed element record");
        std::vector<int> etags(ntags);
        for (int& t : etags) is >> t;
        if (type != 4) {
          bad_types.insert(type);
          continue;
        }
        std::array<long long, 4> v{};
        for (auto& x : v) is >> x;
        if (!is) r.fail("malformed tetrahedron record " + std::to_string(id));
        raw_tets.push_back(v);
        tags.push_back(ntags > 0 ? etags[0] : 0);
      }
      have_elements = true;
    } else if (line.size() > 1 && line[0] == '$' && line.rfind("$End", 0) != 0) {
      // Unknown section: skip to its end marker.
      const std::string end = "$End" + line.substr(1);
      std::string body;
      while (r.next(body) && body != end) {
      }
    }
  }
  if (!have_format || !have_nodes || !have_elements) {
    throw ImportError(path.string() + ": missing $MeshFormat, $Nodes or $Elements section");
  }
  if (!bad_types.empty()) {
    std::ostringstream os;
    os << path.string() << ": unsupported element type(s)";
    for (int t : bad_types) os << ' ' << t;
    os << "; only 4-node tetrahedra (type 4) are accepted";
    throw ImportError(os.str());
  }
  if (raw_tets.empty()) throw ImportError(path.string() + ": no tetrahedra found");

  // Keep only nodes referenced by tets, in file order.
  std::vector<int> used(nodes.size(), -1);
  ImportedMesh out;
  TetMesh& mesh = out.mesh;
  for (const auto& rt : raw_tets) {
    for (long long id : rt) {
      const auto it = node_index.find(id);
      if (it == node_index.end()) throw ImportError(path.string() + ": tet references unknown node " + std::to_string(id));
      used[it->second] = 0;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (used[i] == 0) {
      used[i] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(nodes[i]);
    }
  }
  for (std::size_t e = 0; e < raw_tets.size(); ++e) {
    Tet t;
    for (int a = 0; a < 4; ++a) t[a] = used[node_index.at(raw_tets[e][a])];
    mesh.tets.push_back(t);
    if (mesh.tet_volume(e) < 0.0) std::swap(mesh.tets[e][2], mesh.tets[e][3]);
  }
  mesh.region = tags;

  mesh.box.lo = mesh.box.hi = mesh.nodes.front();
  for (const Vec3& p : mesh.nodes) {
    mesh.box.lo = mesh.box.lo.cwiseMin(p);
    mesh.box.hi = mesh.box.hi.cwiseMax(p);
  }
  mesh.validate();

  const std::set<int> distinct(tags.begin(), tags.end());
  out.region_tags.assign(distinct.begin(), distinct.end());
  out.periodicity = check_face_congruence(mesh, 1e-8 * mesh.box.diagonal());
  return out;
}

void export_msh(const TetMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ImportError("cannot write mesh file " + path.string());
  out << std::setprecision(17);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_nodes() << '\n';
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3& p = mesh.nodes[i];
    out << i + 1 << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  out << "$EndNodes\n$Elements\n" << mesh.num_tets() << '\n';
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const auto& t = mesh.tets[e];
    out << e + 1 << " 4 2 " << mesh.region[e] << ' ' << mesh.region[e];
    for (int v : t) out << ' ' << v + 1;
    out << '\n';
  }
  out << "$EndElements\n";
  if (!out) throw ImportError("failed while writing " + path.string());
}

void write_vtk(const TetMesh& mesh, const std::filesystem::path& path, std::span<const PointField> point_fields) {
  std::ofstream out(path);
  if (!out) throw ImportError("cannot write VTK file " + path.string());
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\ngradhom RVE\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const Vec3& p : mesh.nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) out << "10\n";
  out << "CELL_DATA " << mesh.num_tets() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int r : mesh.region) out << r << '\n';
  if (!point_fields.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << '\n';
    for (const auto& [name, values] : point_fields) {
      if (values.size() != mesh.num_nodes()) {
        throw MeshError("point field " + name + " has " + std::to_string(values.size()) + " values for " +
                        std::to_string(mesh.num_nodes()) + " nodes");
      }
      out << "VECTORS " << name << " double\n";
      for (const Vec3& v : values) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
  }
  if (!out) throw ImportError("failed while writing " + path.string());
}

}  // namespace gradhom
