#pragma once

// Robust min-max optimization loop:
//
//   min z  s.t.  s*u_out^e - z <= 0,  s*u_out^b - z <= 0,
//                blueprint volume constraints,  SE^e / SE* - 1 <= 0
//
// with z appended to the MMA variables, the projection sharpness continued on a
// doubling schedule and SE* frozen from the first eroded analysis.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pneumo/errors.hpp"
#include "pneumo/fields.hpp"
#include "pneumo/material.hpp"
#include "pneumo/mesh.hpp"
#include "pneumo/mma.hpp"
#include "pneumo/pressure.hpp"
#include "pneumo/sensitivity.hpp"

namespace pneumo {

struct FlowSettings {
  double void_flow = 1.0;
  double contrast = 1e-7;
  double beta = 10.0;              // shared by flow coefficient and drainage
  double eta = 0.1;
  double decay_ratio = 0.1;        // drainage: pressure fraction left after ...
  double penetration_elements = 2; // ... this many element edges of solid
  bool drainage = true;

  FlowParams resolve(double element_edge) const {
    FlowParams p = FlowParams::standard(element_edge, void_flow, contrast, decay_ratio, penetration_elements);
    p.beta_flow = p.beta_drain = beta;
    p.eta_flow = p.eta_drain = eta;
    if (!drainage) p.drainage = 0.0;
    return p;
  }
};

struct RunConfig {
  std::string benchmark = "gripper";
  std::optional<int> nelx;
  std::optional<int> nely;
  MaterialSet materials{{1e7, 1e8}};
  std::vector<double> volume_fractions{0.2, 0.1};
  double delta_eta = 0.05;
  int max_iterations = 400;
  BetaSchedule beta;
  double filter_radius_factor = 8.4;  // times the smaller element edge
  FlowSettings flow;
  double input_pressure = 1.0e5;
  double spring_stiffness = 5.0e4;
  double move_limit = 0.1;
  double objective_scale = 10.0;
  double z_bound = 100.0;             // |z| bound of the min-max variable, scaled units
  double change_tolerance = 1e-4;
  std::string initial = "uniform";    // or "random"
  double initial_noise = 0.0;         // half-width of the uniform perturbation for "random"
  std::uint64_t seed = 0;
  bool parallel_realizations = false;

  int num_materials() const { return materials.count(); }

  // Topology column limited to the total fraction, material column k to vf[k].
  std::vector<double> volume_limits() const {
    std::vector<double> limits(volume_fractions.size());
    double total = 0.0;
    for (double v : volume_fractions) total += v;
    limits[0] = total;
    for (std::size_t k = 1; k < volume_fractions.size(); ++k) limits[k] = volume_fractions[k];
    return limits;
  }

  void validate() const {
    materials.validate();
    if (static_cast<int>(volume_fractions.size()) != num_materials())
      throw ConfigError("volume_fractions: one fraction per material required");
    double total = 0.0;
    for (double v : volume_fractions) {
      if (!(v > 0.0)) throw ConfigError("volume_fractions: fractions must be positive");
      total += v;
    }
    if (total > 1.0 + 1e-12) throw ConfigError("volume_fractions: fractions sum to more than 1");
    if (!(delta_eta >= 0.0 && delta_eta < 0.5)) throw ConfigError("delta_eta: must lie in [0, 0.5)");
    if (max_iterations < 1) throw ConfigError("iterations: must be >= 1");
    if (!(beta.initial >= 1.0) || beta.period < 1 || !(beta.cap >= beta.initial))
      throw ConfigError("beta: need initial >= 1, period >= 1, cap >= initial");
    if (!(filter_radius_factor > 0.0)) throw ConfigError("filter_radius_factor: must be positive");
    if (!(move_limit > 0.0 && move_limit <= 1.0)) throw ConfigError("move_limit: must lie in (0, 1]");
    if (!(objective_scale > 0.0)) throw ConfigError("objective_scale: must be positive");
    if (!(z_bound > 0.0)) throw ConfigError("z_bound: must be positive");
    if (initial != "uniform" && initial != "random") throw ConfigError("initial: expected 'uniform' or 'random'");
    if (!(initial_noise >= 0.0 && initial_noise < 0.5)) throw ConfigError("initial_noise: must lie in [0, 0.5)");
  }
};

struct SeStar {
  double value = 0.0;
  std::optional<std::string> warning;
};

// SE* from the first eroded strain energy: floor, or floor + 0.5 when the
// fractional part exceeds one half. A zero cap falls back to 0.5.
inline SeStar compute_se_star(double strain_energy) {
  if (!(strain_energy >= 0.0) || !std::isfinite(strain_energy))
    throw NumericalError("SE*: strain energy must be finite and non-negative");
  const double fl = std::floor(strain_energy);
  SeStar out;
  out.value = strain_energy - fl <= 0.5 ? fl : fl + 0.5;
  if (out.value <= 0.0) {
    out.value = 0.5;
    out.warning = "SE* rounded to zero (SE^e = " + std::to_string(strain_energy) + "); using 0.5";
  }
  return out;
}

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;          // max of the two outputs, m
  double output_eroded = 0.0;      // m
  double output_blueprint = 0.0;   // m
  double strain_energy = 0.0;      // eroded, N m
  double se_star = 0.0;
  std::vector<double> volume;      // g_k + 1, i.e. used / allowed
  double se_ratio = 0.0;           // g2 = SE^e / SE*
  double beta = 0.0;
  double max_change = 0.0;         // of the step that produced this design
  double wall_time = 0.0;          // s, cumulative
};

// The reported design is the best feasible iterate of the last continuation
// stage (all constraints within `feasibility_tolerance`); the last iterate when
// that stage has no feasible one.
struct OptimizationResult {
  DesignField design;
  RealizationState eroded;
  RealizationState blueprint;
  int reported_iteration = 0;
  std::vector<IterationRecord> history;
  SeStar se_star;
  bool converged = false;
  std::vector<std::string> warnings;
};

inline constexpr double feasibility_tolerance = 1e-6;

inline bool feasible(const IterationRecord& r) {
  for (double v : r.volume)
    if (v - 1.0 > feasibility_tolerance) return false;
  return r.se_ratio - 1.0 <= feasibility_tolerance;
}

inline Benchmark make_benchmark(const RunConfig& cfg) {
  BenchmarkOptions opt;
  opt.nelx = cfg.nelx;
  opt.nely = cfg.nely;
  opt.input_pressure = cfg.input_pressure;
  opt.spring_stiffness = cfg.spring_stiffness;
  opt.thickness = cfg.materials.thickness;
  return build_benchmark(cfg.benchmark, opt);
}

inline MechanismProblem make_problem(const RunConfig& cfg) {
  Benchmark bench = make_benchmark(cfg);
  const double edge = std::min(bench.mesh.dx(), bench.mesh.dy());
  const FlowParams flow = cfg.flow.resolve(edge);
  return MechanismProblem(std::move(bench), cfg.materials, flow, cfg.filter_radius_factor * edge);
}

inline DesignField initial_design(const RunConfig& cfg, const PassiveMask& mask) {
  const auto limits = cfg.volume_limits();
  DesignField rho(mask.size(), cfg.num_materials());
  for (int k = 0; k < cfg.num_materials(); ++k) rho.col(k).setConstant(limits[static_cast<std::size_t>(k)]);
  if (cfg.initial == "random") {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> noise(-cfg.initial_noise, cfg.initial_noise);
    for (Eigen::Index k = 0; k < rho.cols(); ++k)
      for (Eigen::Index e = 0; e < rho.rows(); ++e) rho(e, k) = std::clamp(rho(e, k) + noise(rng), 0.0, 1.0);
  }
  apply_pins(mask, rho);
  return rho;
}

// Thrown when an analysis fails mid-run. Carries the design that failed and
// the history so far so the caller can dump a checkpoint.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, int iteration, DesignField design, std::vector<IterationRecord> history)
      : std::runtime_error(what), iteration(iteration), design(std::move(design)), history(std::move(history)) {}
  int iteration;
  DesignField design;
  std::vector<IterationRecord> history;
};

using IterationObserver = std::function<void(const IterationRecord&, const RobustEvaluation&)>;

inline OptimizationResult run(const RunConfig& cfg, const IterationObserver& observer = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const MechanismProblem prob = make_problem(cfg);
  const int nel = prob.mesh().num_elements();
  const int m = cfg.num_materials();
  const std::vector<double> limits = cfg.volume_limits();
  const PinMask pinned = pinned_entries(prob.mask(), m);

  // Active (movable) raw variables, column-major over the design field.
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index e = 0; e < nel; ++e)
      if (!pinned(e, k)) active.push_back(k * nel + e);
  const int nact = static_cast<int>(active.size());
  const int nvar = nact + 1;  // + z
  const int ncon = 2 + m + 1;

  MmaSettings mset;
  mset.move = cfg.move_limit;
  Mma mma(nvar, ncon, mset);

  OptimizationResult result;
  result.design = initial_design(cfg, prob.mask());
  RobustWorkspace ws;
  ProjectionParams proj{cfg.beta.at(1), cfg.delta_eta};

  Eigen::VectorXd xmin = Eigen::VectorXd::Zero(nvar);
  Eigen::VectorXd xmax = Eigen::VectorXd::Ones(nvar);
  xmin[nact] = -cfg.z_bound;
  xmax[nact] = cfg.z_bound;
  Eigen::VectorXd x(nvar);
  for (int j = 0; j < nact; ++j) x[j] = result.design.data()[active[static_cast<std::size_t>(j)]];
  double last_change = 0.0;
  const double final_beta = cfg.beta.at(cfg.max_iterations);
  std::optional<IterationRecord> best;
  OptimizationResult best_state;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    proj.beta = cfg.beta.at(it);
    RobustEvaluation ev;
    try {
      ev = evaluate(prob, result.design, proj, limits, ws, true, cfg.parallel_realizations);
    } catch (const ModelError& err) {
      throw RunAborted(std::string("analysis failed at iteration ") + std::to_string(it) + ": " + err.what(), it,
                       result.design, result.history);
    } catch (const NumericalError& err) {
      throw RunAborted(std::string("analysis failed at iteration ") + std::to_string(it) + ": " + err.what(), it,
                       result.design, result.history);
    }
    if (!std::isfinite(ev.objective()) || !std::isfinite(ev.strain_energy()))
      throw RunAborted("non-finite response at iteration " + std::to_string(it), it, result.design, result.history);
    if (it == 1) {
      result.se_star = compute_se_star(ev.strain_energy());
      if (result.se_star.warning) result.warnings.push_back(*result.se_star.warning);
      x[nact] = std::clamp(cfg.objective_scale * ev.objective(), -cfg.z_bound, cfg.z_bound);
    }
    const double se_star = result.se_star.value;

    IterationRecord rec;
    rec.iteration = it;
    rec.objective = ev.objective();
    rec.output_eroded = ev.eroded.displacement.output;
    rec.output_blueprint = ev.blueprint.displacement.output;
    rec.strain_energy = ev.strain_energy();
    rec.se_star = se_star;
    for (double g : ev.volume) rec.volume.push_back(g + 1.0);
    rec.se_ratio = rec.strain_energy / se_star;
    rec.beta = proj.beta;
    rec.max_change = last_change;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (observer) observer(rec, ev);

    const bool at_cap = proj.beta >= cfg.beta.cap;
    const bool done = it == cfg.max_iterations || (it > 1 && at_cap && last_change < cfg.change_tolerance);
    if (proj.beta >= final_beta && feasible(rec) && (!best || rec.objective < best->objective)) {
      best = rec;
      best_state.design = result.design;
      best_state.eroded = ev.eroded;
      best_state.blueprint = ev.blueprint;
    }
    if (done) {
      result.converged = it < cfg.max_iterations;
      if (best) {
        result.design = std::move(best_state.design);
        result.eroded = std::move(best_state.eroded);
        result.blueprint = std::move(best_state.blueprint);
        result.reported_iteration = best->iteration;
      } else {
        result.eroded = std::move(ev.eroded);
        result.blueprint = std::move(ev.blueprint);
        result.reported_iteration = it;
        result.warnings.push_back("no feasible iterate at the final projection sharpness; reporting the last one");
      }
      break;
    }

    Eigen::VectorXd df0 = Eigen::VectorXd::Zero(nvar);
    df0[nact] = 1.0;
    Eigen::VectorXd g(ncon);
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(ncon, nvar);
    const double s = cfg.objective_scale;
    g[0] = s * ev.eroded.displacement.output - x[nact];
    g[1] = s * ev.blueprint.displacement.output - x[nact];
    for (int k = 0; k < m; ++k) g[2 + k] = ev.volume[static_cast<std::size_t>(k)];
    g[2 + m] = ev.strain_energy() / se_star - 1.0;
    for (int j = 0; j < nact; ++j) {
      const Eigen::Index a = active[static_cast<std::size_t>(j)];
      dg(0, j) = s * ev.d_output_eroded.data()[a];
      dg(1, j) = s * ev.d_output_blueprint.data()[a];
      for (int k = 0; k < m; ++k) dg(2 + k, j) = ev.d_volume[static_cast<std::size_t>(k)].data()[a];
      dg(2 + m, j) = ev.d_strain_energy.data()[a] / se_star;
    }
    dg(0, nact) = -1.0;
    dg(1, nact) = -1.0;

    const Eigen::VectorXd xprev = x;
    mma.update(x, xmin, xmax, df0, g, dg);
    if (mma.last_step().max_relaxation > 1e-6)
      result.warnings.push_back("iteration " + std::to_string(it) + ": MMA subproblem relaxed (max y = " +
                                std::to_string(mma.last_step().max_relaxation) + ")");
    last_change = (x.head(nact) - xprev.head(nact)).cwiseAbs().maxCoeff();
    for (int j = 0; j < nact; ++j) result.design.data()[active[static_cast<std::size_t>(j)]] = x[j];
  }
  return result;
}

}  // namespace pneumo
