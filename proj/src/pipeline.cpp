#include "gradhom/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gradhom/error.hpp"

namespace gradhom {
namespace {

using nlohmann::json;

// ---- configuration parsing ------------------------------------------------

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

double get_number(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

template <class T>
std::optional<T> optional_value(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

GeometryKind parse_kind(const std::string& s) {
  if (s == "homogeneous") return GeometryKind::Homogeneous;
  if (s == "laminate") return GeometryKind::Laminate;
  if (s == "cubic_inclusion") return GeometryKind::CubicInclusion;
  if (s == "honeycomb") return GeometryKind::Honeycomb;
  throw ConfigError("geometry.kind: unknown kind \"" + s + "\"");
}

const char* kind_name(GeometryKind k) {
  switch (k) {
    case GeometryKind::Homogeneous: return "homogeneous";
    case GeometryKind::Laminate: return "laminate";
    case GeometryKind::CubicInclusion: return "cubic_inclusion";
    case GeometryKind::Honeycomb: return "honeycomb";
  }
  return "?";
}

RveGeometry parse_geometry(const json& g) {
  const std::string where = "geometry";
  require_object(g, where);
  reject_unknown(g, where, {"kind", "dimensions", "resolution", "layer_fractions", "normal_axis",
                            "inclusion_fraction", "wall_thickness", "infill", "orientation", "offset"});
  RveGeometry geom;
  if (!g.contains("kind")) throw ConfigError("geometry.kind is required");
  geom.kind = parse_kind(g.at("kind").get<std::string>());
  if (!g.contains("dimensions") || !g.at("dimensions").is_array() || g.at("dimensions").size() != 3) {
    throw ConfigError("geometry.dimensions must be an array of three lengths (m)");
  }
  for (int k = 0; k < 3; ++k) {
    if (!g.at("dimensions")[k].is_number()) throw ConfigError("geometry.dimensions must be numbers");
    geom.dimensions[k] = g.at("dimensions")[k].get<double>();
  }
  if (g.contains("resolution")) geom.resolution = get_number(g, "resolution", where);
  if (auto f = optional_value<std::vector<double>>(g, "layer_fractions", where)) geom.layer_fractions = *f;
  if (auto a = optional_value<int>(g, "normal_axis", where)) {
    if (*a < 1 || *a > 3) throw ConfigError("geometry.normal_axis must be 1, 2 or 3");
    geom.normal_axis = *a - 1;
  }
  if (auto f = optional_value<double>(g, "inclusion_fraction", where)) geom.inclusion_fraction = *f;
  geom.wall_thickness = optional_value<double>(g, "wall_thickness", where);
  geom.infill = optional_value<double>(g, "infill", where);
  if (auto o = optional_value<std::string>(g, "orientation", where)) {
    if (*o == "pointy_y") {
      geom.orientation = HexOrientation::PointyY;
    } else if (*o == "pointy_x") {
      geom.orientation = HexOrientation::PointyX;
    } else {
      throw ConfigError("geometry.orientation must be \"pointy_y\" or \"pointy_x\"");
    }
  }
  if (auto o = optional_value<std::vector<double>>(g, "offset", where)) {
    if (o->size() != 2) throw ConfigError("geometry.offset must have two entries");
    geom.offset = {(*o)[0], (*o)[1]};
  }
  return geom;
}

json geometry_to_json(const RveGeometry& g) {
  json j;
  j["kind"] = kind_name(g.kind);
  j["dimensions"] = {g.dimensions.x(), g.dimensions.y(), g.dimensions.z()};
  j["resolution"] = g.resolution;
  switch (g.kind) {
    case GeometryKind::Homogeneous:
      break;
    case GeometryKind::Laminate:
      j["layer_fractions"] = g.layer_fractions;
      j["normal_axis"] = g.normal_axis + 1;
      break;
    case GeometryKind::CubicInclusion:
      j["inclusion_fraction"] = g.inclusion_fraction;
      break;
    case GeometryKind::Honeycomb:
      if (g.wall_thickness) j["wall_thickness"] = *g.wall_thickness;
      if (g.infill) j["infill"] = *g.infill;
      j["orientation"] = g.orientation == HexOrientation::PointyY ? "pointy_y" : "pointy_x";
      j["offset"] = {g.offset[0], g.offset[1]};
      break;
  }
  return j;
}

// ---- helpers --------------------------------------------------------------

class StageClock {
 public:
  explicit StageClock(RunReport& report) : report_(report) {}

  template <class Fn>
  auto operator()(const char* name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      report_.timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record();
      } else {
        auto r = fn();
        record();
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    }
  }

 private:
  RunReport& report_;
};

// Routes warnings into the report while a run is active.
class WarningCapture {
 public:
  explicit WarningCapture(std::vector<std::string>& sink) {
    previous_ = set_warning_handler([this, &sink](std::string_view msg) {
      sink.emplace_back(msg);
      if (previous_) previous_(msg);
    });
  }
  ~WarningCapture() { set_warning_handler(std::move(previous_)); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

 private:
  WarningHandler previous_;
};

double field_max_norm(const NodalField& f) {
  double m = 0.0;
  for (const Vec3& v : f) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

void add_check(RunReport& rep, std::string name, double value, double limit) {
  rep.checks.push_back({std::move(name), value, limit, value <= limit});
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed while writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

json matrix3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

}  // namespace

// ---- RunConfig ------------------------------------------------------------

void RunConfig::validate() const {
  if (geometry.has_value() == mesh_path.has_value()) {
    throw ConfigError("exactly one of \"geometry\" and \"mesh\" must be given");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    std::ostringstream os;
    os << "epsilon must be positive, got " << epsilon << " (epsilon = 0 describes a solid without substructure)";
    throw ConfigError(os.str());
  }
  if (phases.empty()) throw ConfigError("at least one phase is required");
  std::set<int> ids;
  for (const auto& p : phases) {
    if (!ids.insert(p.phase_id).second) throw ConfigError("duplicate phase_id " + std::to_string(p.phase_id));
    (void)isotropic_stiffness(p);
  }
  if (!(void_contrast > 0.0 && void_contrast < 1.0)) throw ConfigError("void_contrast must lie in (0, 1)");
  if (!(solver.cg_tolerance > 0.0 && solver.cg_tolerance < 1.0)) throw ConfigError("solver.tolerance must lie in (0, 1)");
  if (geometry) {
    RveGeometry g = *geometry;
    g.void_contrast = void_contrast;
    g.validate();
  }
}

RunConfig RunConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  require_object(doc, "configuration");
  reject_unknown(doc, "configuration",
                 {"geometry", "mesh", "phases", "void_contrast", "epsilon", "solver", "outputs", "determinism"});
  RunConfig cfg;
  try {
    if (doc.contains("geometry")) cfg.geometry = parse_geometry(doc.at("geometry"));
    if (doc.contains("mesh")) {
      const json& m = doc.at("mesh");
      require_object(m, "mesh");
      reject_unknown(m, "mesh", {"path"});
      if (!m.contains("path") || !m.at("path").is_string()) throw ConfigError("mesh.path must be a string");
      std::filesystem::path p = m.at("path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.mesh_path = p;
    }
    if (!doc.contains("phases") || !doc.at("phases").is_array()) throw ConfigError("\"phases\" must be an array");
    int index = 0;
    for (const json& p : doc.at("phases")) {
      const std::string where = "phases[" + std::to_string(index) + "]";
      require_object(p, where);
      reject_unknown(p, where, {"phase_id", "young_modulus", "poisson_ratio"});
      IsotropicPhase phase;
      phase.phase_id = optional_value<int>(p, "phase_id", where).value_or(index);
      if (!p.contains("young_modulus") || !p.contains("poisson_ratio")) {
        throw ConfigError(where + " needs young_modulus (Pa) and poisson_ratio");
      }
      phase.young_modulus = get_number(p, "young_modulus", where);
      phase.poisson_ratio = get_number(p, "poisson_ratio", where);
      cfg.phases.push_back(phase);
      ++index;
    }
    if (doc.contains("void_contrast")) cfg.void_contrast = get_number(doc, "void_contrast", "configuration");
    if (doc.contains("epsilon")) cfg.epsilon = get_number(doc, "epsilon", "configuration");
    if (doc.contains("solver")) {
      const json& s = doc.at("solver");
      require_object(s, "solver");
      reject_unknown(s, "solver", {"kind", "tolerance"});
      if (auto k = optional_value<std::string>(s, "kind", "solver")) {
        if (*k == "direct") {
          cfg.solver.kind = SolverKind::Direct;
        } else if (*k == "iterative") {
          cfg.solver.kind = SolverKind::Iterative;
        } else {
          throw ConfigError("solver.kind must be \"direct\" or \"iterative\"");
        }
      }
      if (s.contains("tolerance")) cfg.solver.cg_tolerance = get_number(s, "tolerance", "solver");
    }
    if (doc.contains("outputs")) {
      const json& o = doc.at("outputs");
      require_object(o, "outputs");
      reject_unknown(o, "outputs", {"result", "vtk_dir", "matrix_market"});
      if (auto r = optional_value<std::string>(o, "result", "outputs")) cfg.result_path = *r;
      if (auto v = optional_value<std::string>(o, "vtk_dir", "outputs")) cfg.vtk_dir = *v;
      if (auto m = optional_value<std::string>(o, "matrix_market", "outputs")) cfg.matrix_dump = *m;
    }
    if (auto d = optional_value<std::string>(doc, "determinism", "configuration")) {
      if (*d == "deterministic") {
        cfg.determinism = Determinism::Deterministic;
      } else if (*d == "parallel-fast") {
        cfg.determinism = Determinism::ParallelFast;
      } else {
        throw ConfigError("determinism must be \"deterministic\" or \"parallel-fast\"");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  return cfg;
}

json RunConfig::to_json() const {
  json j;
  if (geometry) j["geometry"] = geometry_to_json(*geometry);
  if (mesh_path) j["mesh"] = {{"path", mesh_path->string()}};
  j["phases"] = json::array();
  for (const auto& p : phases) {
    j["phases"].push_back({{"phase_id", p.phase_id}, {"young_modulus", p.young_modulus},
                           {"poisson_ratio", p.poisson_ratio}});
  }
  j["void_contrast"] = void_contrast;
  j["epsilon"] = epsilon;
  j["solver"] = {{"kind", solver.kind == SolverKind::Direct ? "direct" : "iterative"},
                 {"tolerance", solver.cg_tolerance}};
  json outputs = json::object();
  if (result_path) outputs["result"] = result_path->string();
  if (vtk_dir) outputs["vtk_dir"] = vtk_dir->string();
  if (matrix_dump) outputs["matrix_market"] = matrix_dump->string();
  j["outputs"] = outputs;
  j["determinism"] = determinism == Determinism::Deterministic ? "deterministic" : "parallel-fast";
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return RunConfig::from_json(doc, path.parent_path());
}

double RunReport::seconds(const std::string& stage) const {
  for (const auto& t : timings)
    if (t.stage == stage) return t.seconds;
  return 0.0;
}

// ---- run ------------------------------------------------------------------

RunOutput run(const RunConfig& config) {
  RunOutput out;
  RunReport& rep = out.report;
  HomogenizationResult& res = out.result;
  WarningCapture capture(rep.warnings);
  StageClock stage(rep);

  stage("config", [&] { config.validate(); });
  rep.config_echo = config.to_json();
  const Execution exec = config.determinism == Determinism::Deterministic ? Execution::Serial : Execution::Parallel;

  TetMesh mesh;
  MaterialField materials;
  json mesh_meta;
  stage("mesh", [&] {
    if (config.geometry) {
      RveGeometry g = *config.geometry;
      g.void_contrast = config.void_contrast;
      GeneratedRve rve = generate(g, config.phases);
      mesh = std::move(rve.mesh);
      materials = std::move(rve.materials);
      rep.solid_fraction = rve.solid_fraction;
      rep.wall_thickness = rve.wall_thickness;
      if (g.kind == GeometryKind::Honeycomb) {
        mesh_meta["void_phase"] = config.phases.size() == 2
                                      ? json{{"phase_id", config.phases[1].phase_id}, {"source", "configured"}}
                                      : json{{"phase_id", void_region_tag(config.phases)},
                                             {"young_modulus", config.phases[0].young_modulus * config.void_contrast},
                                             {"poisson_ratio", 0.35},
                                             {"source", "void_contrast"}};
        if (rve.wall_thickness) mesh_meta["wall_thickness"] = *rve.wall_thickness;
      }
    } else {
      ImportedMesh imp = import_msh(*config.mesh_path);
      mesh = std::move(imp.mesh);
      for (int tag : imp.region_tags) {
        bool found = false;
        for (const auto& p : config.phases) {
          if (p.phase_id == tag) {
            materials.by_region[tag] = isotropic_stiffness(p);
            found = true;
          }
        }
        if (!found) throw ConfigError("mesh region " + std::to_string(tag) + " has no phase with that phase_id");
      }
      rep.solid_fraction = 0.0;
      for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
        if (mesh.region[e] == config.phases[0].phase_id) rep.solid_fraction += mesh.tet_volume(e);
      }
      rep.solid_fraction /= total_volume(mesh);
    }
    rep.nodes = mesh.num_nodes();
    rep.tets = mesh.num_tets();
  });

  PeriodicMap map;
  stage("periodic_map", [&] {
    map = build_periodic_map(mesh, default_match_tolerance(mesh));
    rep.periodic_pairs = map.pairs_per_axis;
    rep.reduced_dofs = map.n_reduced;
  });

  std::unique_ptr<ReducedSystem> system;
  stage("assembly", [&] {
    system = std::make_unique<ReducedSystem>(mesh, materials, map, exec);
    if (config.matrix_dump) system->write_matrix_market(*config.matrix_dump);
  });
  stage("factorization", [&] { system->factorize(config.solver); });

  std::unique_ptr<CellContext> ctx;
  stage("geometry", [&] { ctx = std::make_unique<CellContext>(mesh, materials, exec); });

  PhiStage phi;
  stage("phi_solves", [&] { phi = solve_phi(*ctx, *system); });
  const int columns_after_phi = system->stats().columns_solved;

  ElementGradientFields fields;
  stage("C_M", [&] {
    fields = gradient_fields(*ctx, phi, nullptr);
    res.C_M = compute_C(*ctx, fields, &res.C_asymmetry);
  });

  PsiStage psi;
  stage("psi_solves", [&] { psi = solve_psi(*ctx, *system, phi, res.C_M); });

  stage("G_M", [&] {
    fields.N = psi.N;
    res.G_M_per_eps = compute_G(*ctx, fields);
  });

  stage("D_M", [&] {
    res.I_bar = second_moment(mesh, ctx->center);
    DOutcome d = compute_D(*ctx, fields, res.C_M, res.I_bar);
    res.D_M_per_eps2 = d.D_M;
    res.D_bar = d.D_bar;
    res.D_asymmetry = d.asymmetry;
  });

  res.volume = ctx->volume;
  res.center = ctx->center;
  res.diagonal = mesh.box.diagonal();
  res.epsilon = config.epsilon;

  const SolverStats stats = system->stats();
  rep.factorizations = stats.factorizations;
  rep.phi_solves = columns_after_phi;
  rep.psi_solves = stats.columns_solved - columns_after_phi;
  rep.factor_seconds = stats.factor_seconds;
  rep.phi_solve_seconds = phi.solve_seconds;
  rep.psi_solve_seconds = psi.solve_seconds;
  rep.max_residual = stats.max_relative_residual;
  rep.max_backward_error = stats.max_backward_error;

  double energy_mismatch = 0.0;
  stage("checks", [&] {
    const double diag = res.diagonal;
    add_check(rep, "box volume closure", std::abs(ctx->volume - mesh.box.volume()) / mesh.box.volume(), 1e-10);
    add_check(rep, "first moment about centre / diagonal", first_moment(mesh, ctx->center).norm() / diag, 1e-12);

    double worst_mean = 0.0;
    auto mean_ratio = [&](const NodalField& f) {
      const double m = field_max_norm(f);
      return m > 0.0 ? field_mean(f, ctx->nodal_weights).cwiseAbs().maxCoeff() / m : 0.0;
    };
    for (const auto& f : phi.phi) worst_mean = std::max(worst_mean, mean_ratio(f));
    for (const auto& f : psi.psi) worst_mean = std::max(worst_mean, mean_ratio(f));
    add_check(rep, "corrector zero mean", worst_mean, 1e-10);

    double L_dev = 0.0, N_dev = 0.0;
    for (int A = 0; A < 6; ++A) {
      Mat3 avg = Mat3::Zero();
      for (std::size_t e = 0; e < mesh.num_tets(); ++e) avg += ctx->geom.volume[e] * fields.L[e][A];
      avg /= ctx->volume;
      const auto ab = voigt::pair(A);
      avg(ab[0], ab[1]) -= 1.0;
      L_dev = std::max(L_dev, avg.cwiseAbs().maxCoeff());
    }
    for (int b = 0; b < 18; ++b) {
      Mat3 avg = Mat3::Zero();
      for (std::size_t e = 0; e < mesh.num_tets(); ++e) avg += ctx->geom.volume[e] * fields.N[e][b];
      N_dev = std::max(N_dev, avg.cwiseAbs().maxCoeff() / ctx->volume / diag);
    }
    add_check(rep, "volume average of L is the identity map", L_dev, 1e-9);
    add_check(rep, "volume average of N vanishes (/ diagonal)", N_dev, 1e-9);
    add_check(rep, "C^M major symmetry (relative)", res.C_asymmetry, 1e-10);

    const auto spec = check_spectrum(res.C_M);
    add_check(rep, "C^M positive definite (-min eig / max eig)", -spec[0] / spec[5], 0.0);
    add_check(rep, "second-order load compatibility", psi.worst_compatibility, kCompatibilityTolerance);
    add_check(rep, "D^M asymmetry before symmetrisation", res.D_asymmetry, kDAsymmetryLimit);
    if (rep.max_residual <= config.solver.residual_limit) {
      add_check(rep, "linear solve residual", rep.max_residual, config.solver.residual_limit);
    } else {
      // The solver only returns above the limit when refinement stalled at
      // the rounding floor, so the backward error is the meaningful measure.
      add_check(rep, "linear solve backward error (rounding floor)", rep.max_backward_error, kBackwardErrorLimit);
      std::ostringstream os;
      os << "relative residual " << rep.max_residual << " is above " << config.solver.residual_limit
         << " because refinement reached the rounding floor (backward error " << rep.max_backward_error << ")";
      warn(os.str());
    }

    const auto samples = random_macro_samples(10, 0x5eedULL, diag);
    energy_mismatch = energy_consistency_check(*ctx, fields, res.C_M, res.G_M_per_eps, res.D_bar, samples);
    add_check(rep, "energy consistency (10 samples)", energy_mismatch, 1e-8);

    if (rep.factorizations != 1 || rep.phi_solves != 6 || rep.psi_solves != 18) {
      std::ostringstream os;
      os << "solve schedule violated: " << rep.factorizations << " factorizations, " << rep.phi_solves
         << " first-order and " << rep.psi_solves << " second-order solves";
      throw ConsistencyError(os.str());
    }
    if (energy_mismatch > 1e-8) {
      std::ostringstream os;
      os << "micro and macro energies disagree by " << energy_mismatch << " (relative)";
      throw ConsistencyError(os.str());
    }
    for (const auto& c : rep.checks) {
      if (!c.passed) {
        std::ostringstream os;
        os << "invariant check \"" << c.name << "\" failed: " << c.value << " > " << c.limit;
        warn(os.str());
      }
    }
  });

  // Metadata is part of the serialised result and must stay free of
  // timings and paths that change between identical runs.
  json meta;
  meta["tool_version"] = kToolVersion;
  meta["gauge"] = "phi and psi shifted to zero volume mean";
  meta["rigid_mode"] = "three dofs of the master node nearest the geometric centre fixed during the solve";
  meta["I_bar"] = "volume-normalised second moment (1/V) int (X - Xc)(X - Xc)^T dV; epsilon^2 carried by D";
  meta["D_position_term"] = "the 2 eps y_k G term averages to zero about the geometric centre and is omitted";
  meta["epsilon_convention"] = "G is the coefficient of epsilon and D of epsilon^2; multiply by epsilon for display";
  meta["omega_p"] = "moment integrals run over the whole box including void elements";
  meta["mesh"] = {{"nodes", rep.nodes},
                  {"tets", rep.tets},
                  {"reduced_dofs", rep.reduced_dofs},
                  {"periodic_pairs", rep.periodic_pairs},
                  {"solid_fraction", rep.solid_fraction}};
  for (const auto& [k, v] : mesh_meta.items()) meta["mesh"][k] = v;
  meta["solves"] = {{"factorizations", rep.factorizations}, {"phi", rep.phi_solves}, {"psi", rep.psi_solves}};
  json checks = json::object();
  for (const auto& c : rep.checks) checks[c.name] = {{"value", c.value}, {"limit", c.limit}, {"passed", c.passed}};
  meta["checks"] = checks;
  {
    Eigen::SelfAdjointEigenSolver<Matrix18> es(res.D_M_per_eps2.voigt(), Eigen::EigenvaluesOnly);
    meta["D_M_eigenvalue_range"] = {es.eigenvalues()(0), es.eigenvalues()(17)};
    meta["D_M_definite"] = es.eigenvalues()(0) > 0.0 ? "positive definite" : "indefinite or semidefinite";
  }
  res.metadata = meta;

  stage("outputs", [&] {
    if (config.vtk_dir) {
      std::filesystem::create_directories(*config.vtk_dir);
      write_vtk(mesh, *config.vtk_dir / "mesh.vtk");
      for (int A = 0; A < 6; ++A) {
        const PointField f{"phi_" + voigt::pair_label(A), phi.phi[A]};
        write_vtk(mesh, *config.vtk_dir / ("phi_" + voigt::pair_label(A) + ".vtk"), std::span(&f, 1));
      }
      for (int b = 0; b < 18; ++b) {
        const PointField f{"psi_" + voigt::triple_label(b), psi.psi[b]};
        write_vtk(mesh, *config.vtk_dir / ("psi_" + voigt::triple_label(b) + ".vtk"), std::span(&f, 1));
      }
    }
    if (config.result_path) write_atomically(*config.result_path, result_to_json(res).dump(2) + "\n");
  });
  return out;
}

json result_to_json(const HomogenizationResult& r) {
  json doc = tensors_to_json(r.C_M, r.G_M_per_eps, r.D_M_per_eps2);
  doc["I_bar"] = matrix3_to_json(r.I_bar);
  doc["volume"] = r.volume;
  doc["center"] = {r.center.x(), r.center.y(), r.center.z()};
  doc["box_diagonal"] = r.diagonal;
  doc["epsilon"] = r.epsilon;
  doc["asymmetry"] = {{"C", r.C_asymmetry}, {"D", r.D_asymmetry}};
  doc["metadata"] = r.metadata;
  return doc;
}

// ---- report ---------------------------------------------------------------

DisplayScales display_scales(const HomogenizationResult& r) {
  const double c = r.C_M.max_abs();
  return {c, c * r.diagonal, c * r.diagonal * r.diagonal};
}

namespace {

template <class M>
void print_matrix(std::ostream& os, const M& m, double factor, double flush_below, const std::vector<std::string>& rows,
                  const std::vector<std::string>& cols) {
  char buf[64];
  os << "      ";
  for (const auto& c : cols) {
    std::snprintf(buf, sizeof buf, "%11s", c.c_str());
    os << buf;
  }
  os << '\n';
  for (int r = 0; r < m.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "%6s", rows[r].c_str());
    os << buf;
    for (int c = 0; c < m.cols(); ++c) {
      const double v = std::abs(m(r, c)) < flush_below ? 0.0 : m(r, c) * factor;
      std::snprintf(buf, sizeof buf, "%11.4g", v);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace

std::string render_report(const HomogenizationResult& r, const RunReport* report, ReportOptions options) {
  std::ostringstream os;
  const DisplayScales s = display_scales(r);
  const double eps = r.epsilon;
  std::vector<std::string> pairs, triples;
  for (int A = 0; A < 6; ++A) pairs.push_back(voigt::pair_label(A));
  for (int a = 0; a < 18; ++a) triples.push_back(voigt::triple_label(a));

  const double fc = options.si_units ? 1.0 : 1e-9;
  const double fg = (options.si_units ? 1.0 : 1e-6) * eps;
  const double fd = (options.si_units ? 1.0 : 1e-12) * eps * eps;
  const char* uc = options.si_units ? "Pa" : "GPa";
  const char* ug = options.si_units ? "N/m" : "kN/mm";
  const char* ud = options.si_units ? "N" : "TN";

  os << kToolVersion << "\n";
  os << "epsilon = " << eps << ", volume = " << r.volume << " m^3, centre = (" << r.center.x() << ", "
     << r.center.y() << ", " << r.center.z() << ") m\n\n";
  os << "C^M [" << uc << "]\n";
  print_matrix(os, r.C_M.voigt(), fc, 1e-9 * s.C, pairs, pairs);
  os << "\nG^M [" << ug << "], scaled by epsilon = " << eps << "\n";
  print_matrix(os, r.G_M_per_eps.voigt(), fg, 1e-9 * s.G, pairs, triples);
  os << "\nD^M [" << ud << "], scaled by epsilon^2 = " << eps * eps << "\n";
  print_matrix(os, r.D_M_per_eps2.voigt(), fd, 1e-9 * s.D, triples, triples);
  os << "\nI_bar [m^2]\n";
  for (int i = 0; i < 3; ++i) os << "  " << r.I_bar(i, 0) << ' ' << r.I_bar(i, 1) << ' ' << r.I_bar(i, 2) << '\n';
  if (r.metadata.contains("D_M_definite")) os << "D^M is " << r.metadata["D_M_definite"].get<std::string>() << '\n';

  if (report) {
    os << "\nmesh: " << report->nodes << " nodes, " << report->tets << " tets, " << report->reduced_dofs
       << " reduced unknowns, periodic pairs " << report->periodic_pairs[0] << '/' << report->periodic_pairs[1]
       << '/' << report->periodic_pairs[2] << ", solid fraction " << report->solid_fraction;
    if (report->wall_thickness) os << ", wall thickness " << *report->wall_thickness << " m";
    os << '\n';
    os << "solves: " << report->factorizations << " factorization, " << report->phi_solves << " first-order + "
       << report->psi_solves << " second-order; max relative residual " << report->max_residual << '\n';
    os << "factorization " << report->factor_seconds << " s, first-order solves " << report->phi_solve_seconds
       << " s, second-order solves " << report->psi_solve_seconds << " s\n";
    os << "timings [s]:";
    for (const auto& t : report->timings) os << ' ' << t.stage << '=' << t.seconds;
    os << "\nchecks:\n";
    for (const auto& c : report->checks) {
      os << "  [" << (c.passed ? "ok" : "FAIL") << "] " << c.name << ": " << c.value << " (limit " << c.limit
         << ")\n";
    }
    for (const auto& w : report->warnings) os << "warning: " << w << '\n';
    os << "config: " << report->config_echo.dump() << '\n';
  }
  return os.str();
}

}  // namespace gradhom
