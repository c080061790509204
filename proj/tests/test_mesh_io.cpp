#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradhom/error.hpp"
#include "gradhom/mesh.hpp"
#include "support.hpp"

using namespace gradhom;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path data(const char* name) { return fs::path(GRADHOM_TEST_DATA) / name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gradhom_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(ImportMsh, FiveTetCube) {
  const ImportedMesh imp = import_msh(data("cube5.msh"));
  // the unreferenced node is dropped
  EXPECT_EQ(imp.mesh.num_nodes(), 8u);
  EXPECT_EQ(imp.mesh.num_tets(), 5u);
  EXPECT_EQ(imp.region_tags, (std::vector<int>{7, 9}));
  for (std::size_t e = 0; e < 5; ++e) EXPECT_GT(imp.mesh.tet_volume(e), 0.0);
  EXPECT_NEAR(imp.mesh.tet_volume(4), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(total_volume(imp.mesh), 1.0, 1e-15);
  EXPECT_EQ(imp.mesh.box.hi, Vec3(1, 1, 1));
  for (const auto& a : imp.periodicity.axes) EXPECT_EQ(a.pairs, 4);
}

TEST(ImportMsh, NonPeriodicMeshNamesNodeAndAxis) {
  try {
    import_msh(data("two_tets.msh"));
    FAIL();
  } catch (const PeriodicityError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("node"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x1"), std::string::npos) << msg;
    EXPECT_EQ(e.code(), ExitCode::Mesh);
  }
}

TEST(ImportMsh, TrianglesAreRejectedWithTheirType) {
  const auto p = scratch("triangles.msh");
  write(p,
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
        "$Elements\n2\n1 2 2 1 1 1 2 3\n2 4 2 1 1 1 2 3 4\n$EndElements\n");
  try {
    import_msh(p);
    FAIL();
  } catch (const ImportError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("type(s) 2"), std::string::npos) << msg;
  }
}

TEST(ImportMsh, MalformedFilesAreImportErrors) {
  EXPECT_THROW(import_msh(scratch("does_not_exist.msh")), ImportError);
  const auto p = scratch("bad.msh");
  write(p, "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
  EXPECT_THROW(import_msh(p), ImportError);
  write(p, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n1 1 1 1\n$EndNodes\n");
  EXPECT_THROW(import_msh(p), ImportError);  // duplicate id
  write(p, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 0\n$EndNodes\n"
           "$Elements\n1\n1 4 2 1 1 1 2 3 4\n$EndElements\n");
  EXPECT_THROW(import_msh(p), ImportError);  // unknown node
  write(p, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0\n");
  EXPECT_THROW(import_msh(p), ImportError);  // truncated
}

TEST(ImportMsh, DeletedBoundaryNodeBreaksPeriodicity) {
  // Export a periodic mesh, then drop every tet touching one max-face node so
  // that node disappears from the import.
  auto rve = generate(cube(0.25), std::vector{phase(1, 0.3)});
  TetMesh& m = rve.mesh;
  int victim = -1;
  for (std::size_t n = 0; n < m.num_nodes(); ++n)
    if (m.nodes[n] == Vec3(1.0, 0.5, 0.5)) victim = static_cast<int>(n);
  ASSERT_GE(victim, 0);
  TetMesh cut = m;
  cut.tets.clear();
  cut.region.clear();
  for (std::size_t e = 0; e < m.num_tets(); ++e) {
    const auto& t = m.tets[e];
    if (std::find(t.begin(), t.end(), victim) != t.end()) continue;
    cut.tets.push_back(t);
    cut.region.push_back(m.region[e]);
  }
  const auto p = scratch("cut.msh");
  export_msh(cut, p);
  EXPECT_THROW(import_msh(p), PeriodicityError);
}

TEST(ExportMsh, RoundTripIsExact) {
  const auto rve = generate(laminate(0.1, {0.3, 0.7}, 2, Vec3(0.3, 0.2, 0.7)),
                            std::vector{phase(1, 0.2, 4), phase(2, 0.2, 8)});
  const auto p = scratch("roundtrip.msh");
  export_msh(rve.mesh, p);
  const ImportedMesh imp = import_msh(p);
  ASSERT_EQ(imp.mesh.num_nodes(), rve.mesh.num_nodes());
  ASSERT_EQ(imp.mesh.num_tets(), rve.mesh.num_tets());
  for (std::size_t n = 0; n < imp.mesh.num_nodes(); ++n) EXPECT_EQ(imp.mesh.nodes[n], rve.mesh.nodes[n]);
  EXPECT_EQ(imp.mesh.tets, rve.mesh.tets);
  EXPECT_EQ(imp.mesh.region, rve.mesh.region);
  EXPECT_EQ(imp.region_tags, (std::vector<int>{4, 8}));
}

TEST(WriteVtk, HeaderCountsAndFieldLength) {
  const auto rve = generate(cube(0.5), std::vector{phase(1, 0.3)});
  const auto p = scratch("cell.vtk");
  std::vector<Vec3> f(rve.mesh.num_nodes(), Vec3(1, 2, 3));
  std::vector<PointField> fields{{"phi_11", f}};
  write_vtk(rve.mesh, p, fields);
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  EXPECT_NE(text.find("POINTS 27 double"), std::string::npos);
  EXPECT_NE(text.find("CELLS 48 240"), std::string::npos);
  EXPECT_NE(text.find("VECTORS phi_11 double"), std::string::npos);
  f.pop_back();
  std::vector<PointField> bad{{"short", f}};
  EXPECT_THROW(write_vtk(rve.mesh, p, bad), MeshError);
}
