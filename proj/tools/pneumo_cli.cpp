// pneumo: run a pneumatic mechanism optimization from a JSON config or a
// built-in preset, or run the gradient self-check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/float128.hpp>
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pneumo/config.hpp"
#include "pneumo/export.hpp"
#include "pneumo/gradcheck.hpp"
#include "pneumo/history.hpp"
#include "pneumo/optimizer.hpp"

namespace fs = std::filesystem;
using namespace pneumo;

namespace {

std::vector<ExportFormat> parse_formats(const std::string& list) {
  std::vector<ExportFormat> out;
  if (list.empty() || list == "none") return out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_export_format(item));
  return out;
}

int fd_check(std::uint64_t seed, int trials) {
  const GradientCheckReport rep = random_gradient_check<boost::multiprecision::float128>(seed, trials);
  std::printf("fd-check: max relative error %.3e over %d components (%d below floor)\n", rep.max_relative_error,
              rep.compared, rep.skipped);
  std::printf("fd-check: worst %s\n", rep.worst.c_str());
  return rep.max_relative_error <= 1e-3 ? 0 : 1;
}

void dump_checkpoint(const RunAborted& err, const StructuredMesh& mesh, const fs::path& dir) {
  FieldSnapshot s;
  s.nelx = mesh.nelx();
  s.nely = mesh.nely();
  s.dx = mesh.dx();
  s.dy = mesh.dy();
  s.blueprint = err.design;
  s.eroded = err.design;
  s.pressure = Eigen::VectorXd::Zero(mesh.num_nodes());
  s.displacement = Eigen::VectorXd::Zero(mesh.num_displacement_dofs());
  write_csv(s, err.design, dir / "checkpoint_design.csv");
}

int run_job(JobConfig job, const std::string& formats, int print_every) {
  const std::vector<ExportFormat> exports = parse_formats(formats);
  const fs::path dir = job.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    std::ofstream cfg(dir / "config.json");
    if (!cfg) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
    cfg << to_json(job).dump(2) << '\n';
  }

  const RunConfig& c = job.run;
  HistoryWriter history(dir, c.num_materials());
  const auto observer = [&](const IterationRecord& r, const RobustEvaluation&) {
    history.append(r);
    if (print_every > 0 && (r.iteration == 1 || r.iteration % print_every == 0))
      std::printf("it %4d  u_out e/b = %+.4e / %+.4e m  SE/SE* = %.4f  V1 = %.4f  beta = %g  change = %.3g\n",
                  r.iteration, r.output_eroded, r.output_blueprint, r.se_ratio, r.volume[0], r.beta, r.max_change);
    std::fflush(stdout);
  };

  OptimizationResult res;
  try {
    res = run(c, observer);
  } catch (const RunAborted& err) {
    dump_checkpoint(err, make_benchmark(c).mesh, dir);
    std::fprintf(stderr, "error: %s; checkpoint written to %s\n", err.what(),
                 (dir / "checkpoint_design.csv").string().c_str());
    return 1;
  }
  for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  const Benchmark bench = make_benchmark(c);
  const FieldSnapshot snap = make_snapshot(bench.mesh, res.blueprint.physical, res.eroded.physical,
                                           res.blueprint.pressure.pressure, res.blueprint.displacement.displacement);
  export_fields(snap, exports, dir, "design");
  if (bench.symmetry.copies() > 1) export_fields(mirror_full_design(snap, bench.symmetry), exports, dir, "design_full");

  const IterationRecord& last = res.history[static_cast<std::size_t>(res.reported_iteration - 1)];
  nlohmann::json summary;
  summary["iterations"] = res.history.back().iteration;
  summary["reported_iteration"] = res.reported_iteration;
  summary["converged"] = res.converged;
  summary["output_eroded"] = last.output_eroded;
  summary["output_blueprint"] = last.output_blueprint;
  summary["strain_energy_eroded"] = last.strain_energy;
  summary["se_star"] = res.se_star.value;
  summary["se_ratio"] = last.se_ratio;
  summary["volume_ratio"] = last.volume;
  summary["warnings"] = res.warnings;
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';

  std::printf("final u_out: eroded %+.6e m, blueprint %+.6e m (iterate %d of %d, %s)\n", last.output_eroded,
              last.output_blueprint, last.iteration, res.history.back().iteration,
              res.converged ? "converged" : "iteration limit");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization of pneumatically actuated multi-material compliant mechanisms"};
  std::string config_path;
  std::string benchmark;
  std::optional<int> iterations;
  std::optional<int> nelx, nely;
  std::optional<std::string> out_dir;
  std::string formats = "vtk,csv,pgm";
  bool fd = false;
  int fd_trials = 12;
  std::optional<std::uint64_t> seed;
  int print_every = 10;

  std::string presets;
  for (const auto& p : preset_names()) presets += (presets.empty() ? "" : ", ") + p;
  app.add_option("config", config_path, "JSON run configuration");
  app.add_option("--benchmark", benchmark,
                 "preset to run without a config (" + presets +
                     "); with a config, replaces its benchmark geometry");
  app.add_option("--iterations", iterations, "maximum number of optimizer iterations");
  app.add_option("--nelx", nelx, "elements along x");
  app.add_option("--nely", nely, "elements along y");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--export", formats, "comma-separated field formats: vtk, csv, pgm, or none");
  app.add_flag("--fd-check", fd, "check adjoint gradients against finite differences on small random meshes and exit");
  app.add_option("--fd-trials", fd_trials, "random problems for --fd-check");
  app.add_option("--seed", seed, "seed for random initial designs and --fd-check");
  app.add_option("--print-every", print_every, "progress line period, 0 for none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fd) return fd_check(seed.value_or(1), fd_trials);
    if (config_path.empty() && benchmark.empty()) {
      std::cerr << "error: a config file or --benchmark is required\n\n" << app.help();
      return 2;
    }
    JobConfig job = config_path.empty() ? preset(benchmark) : parse_config(config_path);
    if (!config_path.empty() && !benchmark.empty()) job.run.benchmark = preset(benchmark).run.benchmark;
    if (iterations) job.run.max_iterations = *iterations;
    if (nelx) job.run.nelx = *nelx;
    if (nely) job.run.nely = *nely;
    if (seed) job.run.seed = *seed;
    if (out_dir) job.output_dir = *out_dir;
    job.run.validate();
    return run_job(std::move(job), formats, print_every);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
