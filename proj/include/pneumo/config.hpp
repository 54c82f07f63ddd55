#pragma once

// JSON run configuration and the built-in benchmark presets.
//
// Every key is optional; missing keys keep the preset value. A config may name
// a preset to start from ("preset": "contractor-2mat"), otherwise the
// two-material gripper is the base. Unknown keys are rejected.
//
//   {
//     "schema_version": 1,
//     "preset": "gripper-2mat",
//     "benchmark": "gripper",            gripper | contractor | comparison-case
//     "nelx": 200, "nely": 100,
//     "materials": [1e7, 1e8],           Young's moduli, ascending, Pa
//     "volume_fractions": [0.2, 0.1],
//     "delta_eta": 0.05,
//     "iterations": 400,
//     "penal": 3, "poisson": 0.4, "thickness": 0.01,
//     "filter_radius_factor": 8.4,       times the smaller element edge
//     "input_pressure": 1e5, "spring_stiffness": 5e4,
//     "beta": {"initial": 1, "period": 50, "max": 128},
//     "flow": {"void_flow": 1, "contrast": 1e-7, "beta": 10, "eta": 0.1,
//              "decay_ratio": 0.1, "penetration_elements": 2, "drainage": true},
//     "mma": {"move": 0.1, "objective_scale": 10, "z_bound": 100},
//     "change_tolerance": 1e-4,
//     "initial": "uniform", "initial_noise": 0.0, "seed": 0,
//     "parallel_realizations": false,
//     "output_dir": "out"
//   }

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pneumo/errors.hpp"
#include "pneumo/optimizer.hpp"

namespace pneumo {

inline constexpr int kConfigSchemaVersion = 1;

struct JobConfig {
  RunConfig run;
  std::string preset = "gripper-2mat";
  std::string output_dir = "out";
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"gripper-2mat", "gripper-3mat", "contractor-2mat", "contractor-3mat",
                                              "case1", "case2", "case3"};
  return names;
}

// Presets for the benchmark runs. Plain benchmark names map to their
// two-material preset.
inline JobConfig preset(const std::string& name) {
  JobConfig job;
  RunConfig& c = job.run;
  const std::string key = name == "gripper" || name == "comparison-case" ? "gripper-2mat"
                          : name == "contractor"                        ? "contractor-2mat"
                                                                        : name;
  job.preset = key;
  if (key == "gripper-2mat") {
    c.benchmark = "gripper";
  } else if (key == "contractor-2mat") {
    c.benchmark = "contractor";
    c.volume_fractions = {0.1, 0.1};
    c.delta_eta = 0.15;
  } else if (key == "gripper-3mat" || key == "contractor-3mat") {
    c.benchmark = key == "gripper-3mat" ? "gripper" : "contractor";
    c.materials.youngs = {1e7, 0.5e8, 1e8};
    c.volume_fractions = {0.1, 0.1, 0.05};
    c.delta_eta = 0.01;
  } else if (key == "case1" || key == "case2") {
    c.benchmark = "comparison-case";
    c.materials.youngs = {key == "case1" ? 1e7 : 1e8};
    c.volume_fractions = {0.3};
  } else if (key == "case3") {
    c.benchmark = "comparison-case";
    c.volume_fractions = {0.15, 0.15};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += " " + n;
    throw ConfigError("preset: unknown name '" + name + "' (known:" + known + ")");
  }
  return job;
}

namespace detail {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

inline double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
  return j.get<double>();
}

inline int get_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("config: key '" + key + "' must be an integer");
  return j.get<int>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: key '" + key + "' must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(get_number(v, key));
  return out;
}

using Handler = std::function<void(const json&)>;

inline void dispatch(const json& obj, const std::string& prefix, const std::map<std::string, Handler>& handlers) {
  if (!obj.is_object()) throw ConfigError("config: '" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("config: unknown key '" + prefix + key + "'");
    it->second(value);
  }
}

}  // namespace detail

// Applies `j` on top of the preset it names (or gripper-2mat) and validates.
inline JobConfig config_from_json(const nlohmann::json& j) {
  using detail::get_int;
  using detail::get_number;
  using detail::json;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (j.contains("schema_version")) {
    const int v = get_int(j.at("schema_version"), "schema_version");
    if (v != kConfigSchemaVersion)
      throw ConfigError("config: key 'schema_version' is " + std::to_string(v) + ", expected " +
                        std::to_string(kConfigSchemaVersion));
  }
  JobConfig job = preset(j.contains("preset") ? detail::get_as<std::string>(j.at("preset"), "preset") : "gripper-2mat");
  RunConfig& c = job.run;

  const std::map<std::string, detail::Handler> beta{
      {"initial", [&](const json& v) { c.beta.initial = get_number(v, "beta.initial"); }},
      {"period", [&](const json& v) { c.beta.period = get_int(v, "beta.period"); }},
      {"max", [&](const json& v) { c.beta.cap = get_number(v, "beta.max"); }},
  };
  const std::map<std::string, detail::Handler> flow{
      {"void_flow", [&](const json& v) { c.flow.void_flow = get_number(v, "flow.void_flow"); }},
      {"contrast", [&](const json& v) { c.flow.contrast = get_number(v, "flow.contrast"); }},
      {"beta", [&](const json& v) { c.flow.beta = get_number(v, "flow.beta"); }},
      {"eta", [&](const json& v) { c.flow.eta = get_number(v, "flow.eta"); }},
      {"decay_ratio", [&](const json& v) { c.flow.decay_ratio = get_number(v, "flow.decay_ratio"); }},
      {"penetration_elements", [&](const json& v) { c.flow.penetration_elements = get_number(v, "flow.penetration_elements"); }},
      {"drainage", [&](const json& v) { c.flow.drainage = detail::get_as<bool>(v, "flow.drainage"); }},
  };
  const std::map<std::string, detail::Handler> mma{
      {"move", [&](const json& v) { c.move_limit = get_number(v, "mma.move"); }},
      {"objective_scale", [&](const json& v) { c.objective_scale = get_number(v, "mma.objective_scale"); }},
      {"z_bound", [&](const json& v) { c.z_bound = get_number(v, "mma.z_bound"); }},
  };
  const std::map<std::string, detail::Handler> top{
      {"schema_version", [](const json&) {}},
      {"preset", [](const json&) {}},
      {"benchmark", [&](const json& v) { c.benchmark = detail::get_as<std::string>(v, "benchmark"); }},
      {"nelx", [&](const json& v) { c.nelx = get_int(v, "nelx"); }},
      {"nely", [&](const json& v) { c.nely = get_int(v, "nely"); }},
      {"materials", [&](const json& v) { c.materials.youngs = detail::get_numbers(v, "materials"); }},
      {"volume_fractions", [&](const json& v) { c.volume_fractions = detail::get_numbers(v, "volume_fractions"); }},
      {"delta_eta", [&](const json& v) { c.delta_eta = get_number(v, "delta_eta"); }},
      {"iterations", [&](const json& v) { c.max_iterations = get_int(v, "iterations"); }},
      {"penal", [&](const json& v) { c.materials.penal = get_number(v, "penal"); }},
      {"poisson", [&](const json& v) { c.materials.poisson = get_number(v, "poisson"); }},
      {"thickness", [&](const json& v) { c.materials.thickness = get_number(v, "thickness"); }},
      {"filter_radius_factor", [&](const json& v) { c.filter_radius_factor = get_number(v, "filter_radius_factor"); }},
      {"input_pressure", [&](const json& v) { c.input_pressure = get_number(v, "input_pressure"); }},
      {"spring_stiffness", [&](const json& v) { c.spring_stiffness = get_number(v, "spring_stiffness"); }},
      {"beta", [&](const json& v) { detail::dispatch(v, "beta.", beta); }},
      {"flow", [&](const json& v) { detail::dispatch(v, "flow.", flow); }},
      {"mma", [&](const json& v) { detail::dispatch(v, "mma.", mma); }},
      {"change_tolerance", [&](const json& v) { c.change_tolerance = get_number(v, "change_tolerance"); }},
      {"initial", [&](const json& v) { c.initial = detail::get_as<std::string>(v, "initial"); }},
      {"initial_noise", [&](const json& v) { c.initial_noise = get_number(v, "initial_noise"); }},
      {"seed", [&](const json& v) {
         if (!v.is_number_unsigned()) throw ConfigError("config: key 'seed' must be a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"parallel_realizations", [&](const json& v) { c.parallel_realizations = detail::get_as<bool>(v, "parallel_realizations"); }},
      {"output_dir", [&](const json& v) { job.output_dir = detail::get_as<std::string>(v, "output_dir"); }},
  };
  detail::dispatch(j, "", top);
  c.validate();
  return job;
}

inline JobConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline JobConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Fully resolved config, every key present. Written next to the results so a
// run can be repeated from its output directory.
inline nlohmann::json to_json(const JobConfig& job) {
  const RunConfig& c = job.run;
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["preset"] = job.preset;
  j["benchmark"] = c.benchmark;
  if (c.nelx) j["nelx"] = *c.nelx;
  if (c.nely) j["nely"] = *c.nely;
  j["materials"] = c.materials.youngs;
  j["volume_fractions"] = c.volume_fractions;
  j["delta_eta"] = c.delta_eta;
  j["iterations"] = c.max_iterations;
  j["penal"] = c.materials.penal;
  j["poisson"] = c.materials.poisson;
  j["thickness"] = c.materials.thickness;
  j["filter_radius_factor"] = c.filter_radius_factor;
  j["input_pressure"] = c.input_pressure;
  j["spring_stiffness"] = c.spring_stiffness;
  j["beta"] = {{"initial", c.beta.initial}, {"period", c.beta.period}, {"max", c.beta.cap}};
  j["flow"] = {{"void_flow", c.flow.void_flow},
               {"contrast", c.flow.contrast},
               {"beta", c.flow.beta},
               {"eta", c.flow.eta},
               {"decay_ratio", c.flow.decay_ratio},
               {"penetration_elements", c.flow.penetration_elements},
               {"drainage", c.flow.drainage}};
  j["mma"] = {{"move", c.move_limit}, {"objective_scale", c.objective_scale}, {"z_bound", c.z_bound}};
  j["change_tolerance"] = c.change_tolerance;
  j["initial"] = c.initial;
  j["initial_noise"] = c.initial_noise;
  j["seed"] = c.seed;
  j["parallel_realizations"] = c.parallel_realizations;
  j["output_dir"] = job.output_dir;
  return j;
}

}  // namespace pneumo
