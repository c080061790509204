// Serial reference kernels against their OpenMP variants on a two-phase cube.
// The argument is the number of grid cells per edge.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>
#include <vector>

#include "gradhom/kernels.hpp"
#include "gradhom/mesh.hpp"
#include "gradhom/periodic_fem.hpp"

namespace {

using namespace gradhom;

struct Fixture {
  GeneratedRve rve;
  PeriodicMap map;
  ElementGeometry geom;
  DenseMaterials mats;
  AssemblyPattern pattern;
};

const Fixture& fixture(int n) {
  static std::map<int, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[n];
  if (!slot) {
    RveGeometry g;
    g.kind = GeometryKind::CubicInclusion;
    g.dimensions = Vec3::Ones();
    g.resolution = 1.0 / n;
    g.inclusion_fraction = 0.5;
    const std::vector phases{IsotropicPhase{10e9, 0.3, 1}, IsotropicPhase{100e9, 0.25, 2}};
    auto f = std::make_unique<Fixture>();
    f->rve = generate(g, phases);
    f->map = build_periodic_map(f->rve.mesh, default_match_tolerance(f->rve.mesh));
    f->geom = element_geometry(f->rve.mesh, Execution::Serial);
    f->mats = dense_materials(f->rve.mesh, f->rve.materials);
    f->pattern = assembly_pattern(f->rve.mesh, f->map);
    slot = std::move(f);
  }
  return *slot;
}

Execution mode(const benchmark::State& state) { return state.range(1) ? Execution::Parallel : Execution::Serial; }

void set_label(benchmark::State& state, std::size_t tets) {
  state.SetLabel(state.range(1) ? "openmp" : "serial");
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * tets));
}

void BM_ElementGeometry(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(element_geometry(f.rve.mesh, mode(state)));
  set_label(state, f.rve.mesh.num_tets());
}

void BM_AssembleValues(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  std::vector<double> values(f.pattern.matrix.nonZeros());
  for (auto _ : state) {
    std::fill(values.begin(), values.end(), 0.0);
    assemble_values(f.geom, f.mats, f.pattern.slot, values, mode(state));
    benchmark::ClobberMemory();
  }
  set_label(state, f.rve.mesh.num_tets());
}

void BM_ElementSum(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  // strain energy of a unit shear on every element
  auto term = [&](std::size_t e) {
    Eigen::Matrix<double, 6, 1> s = Eigen::Matrix<double, 6, 1>::Zero();
    const Rank4& C = f.mats.tables[f.mats.table_of_tet[e]];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s[i] += C[idx4(i, i, j, j)] * f.geom.volume[e];
    return s;
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        element_sum(f.rve.mesh.num_tets(), Eigen::Matrix<double, 6, 1>::Zero().eval(), term, mode(state)));
  }
  set_label(state, f.rve.mesh.num_tets());
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int n : {16, 32, 48})
    for (int parallel : {0, 1}) b->Args({n, parallel});
  b->ArgNames({"cells", "omp"})->Unit(benchmark::kMillisecond)->UseRealTime();
}

BENCHMARK(BM_ElementGeometry)->Apply(sizes);
BENCHMARK(BM_AssembleValues)->Apply(sizes);
BENCHMARK(BM_ElementSum)->Apply(sizes);

}  // namespace

BENCHMARK_MAIN();
