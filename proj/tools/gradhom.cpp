#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "gradhom/error.hpp"
#include "gradhom/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Strain-gradient homogenization of periodic tetrahedral RVEs"};
  app.require_subcommand(1);

  CLI::App* run_cmd = app.add_subcommand("run", "Run the homogenization pipeline from a JSON configuration");
  std::string config_path;
  std::string output_path;
  std::string fields_dir;
  std::string matrix_path;
  double epsilon = 0.0;
  bool deterministic = false;
  bool si = false;
  run_cmd->add_option("--config", config_path, "configuration file (JSON)")->required();
  run_cmd->add_option("--output", output_path, "result JSON path (overrides outputs.result)");
  run_cmd->add_option("--export-fields", fields_dir, "directory for VTK corrector fields");
  auto* eps_opt = run_cmd->add_option("--epsilon", epsilon, "homothetic ratio (overrides the configuration)");
  run_cmd->add_flag("--deterministic", deterministic, "serial accumulation order throughout");
  run_cmd->add_flag("--si", si, "report in Pa, N/m and N instead of GPa, kN/mm and TN");
  run_cmd->add_option("--dump-matrix", matrix_path, "write the reduced stiffness in Matrix Market format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(gradhom::ExitCode::Config);
  }

  try {
    gradhom::RunConfig config = gradhom::load_config(config_path);
    if (!output_path.empty()) config.result_path = output_path;
    if (!fields_dir.empty()) config.vtk_dir = fields_dir;
    if (!matrix_path.empty()) config.matrix_dump = matrix_path;
    if (eps_opt->count() > 0) config.epsilon = epsilon;
    if (deterministic) config.determinism = gradhom::Determinism::Deterministic;

    const gradhom::RunOutput out = gradhom::run(config);
    std::cout << gradhom::render_report(out.result, &out.report, {.si_units = si});
    return 0;
  } catch (const gradhom::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
