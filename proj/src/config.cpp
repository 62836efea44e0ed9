// Copyright 2026 The ECX-Sim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "ecx/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ecx {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigParseError(path + ": " + msg);
}

const json& expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v == static_cast<double>(static_cast<std::int64_t>(v))) {
      return static_cast<std::int64_t>(v);
    }
  }
  fail(path, "expected an integer");
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(path, "expected a non-negative integer");
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_doubles(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_double(j[i], path + "/" + std::to_string(i)));
  }
  return out;
}

// Converts name lookups that throw ConfigError into field errors.
template <typename F>
auto named(const json& j, const std::string& path, F from_string) {
  const std::string s = as_string(j, path);
  try {
    return from_string(s);
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(path + "/" + key, "unknown field");
  }
}

// Object-valued run fields may be written as a bare kind name.
const char* const kKindObjects[] = {"schedule", "worker_compressor",
                                    "server_compressor", "scheme"};

json expand_shorthand(json j) {
  if (!j.is_object()) return j;
  for (const char* key : kKindObjects) {
    if (j.contains(key) && j[key].is_string()) {
      j[key] = json{{"kind", j[key]}};
    }
  }
  return j;
}

json problem_to_json(const ProblemSpec& p) {
  return json{{"kind", to_string(p.kind)},
              {"spectrum", p.spectrum},
              {"grad_noise", p.grad_noise},
              {"dim", p.dim},
              {"samples", p.samples},
              {"condition", p.condition},
              {"label_noise", p.label_noise},
              {"regularizer", p.regularizer},
              {"batch_size", p.batch_size},
              {"seed", p.seed}};
}

ProblemSpec problem_from_json(const json& j, const std::string& path) {
  check_keys(j, path,
             {"kind", "spectrum", "grad_noise", "dim", "samples", "condition",
              "label_noise", "regularizer", "batch_size", "seed"});
  ProblemSpec p;
  p.kind = named(j.at("kind"), path + "/kind", problem_kind_from_string);
  p.spectrum = as_doubles(j.at("spectrum"), path + "/spectrum");
  p.grad_noise = as_double(j.at("grad_noise"), path + "/grad_noise");
  p.dim = as_int(j.at("dim"), path + "/dim");
  p.samples = as_int(j.at("samples"), path + "/samples");
  p.condition = as_double(j.at("condition"), path + "/condition");
  p.label_noise = as_double(j.at("label_noise"), path + "/label_noise");
  p.regularizer = as_double(j.at("regularizer"), path + "/regularizer");
  p.batch_size = as_int(j.at("batch_size"), path + "/batch_size");
  p.seed = as_u64(j.at("seed"), path + "/seed");
  return p;
}

json compressor_to_json(const CompressorSpec& c) {
  return json{{"kind", to_string(c.kind)},
              {"k", c.k},
              {"rescale", c.rescale},
              {"levels", c.levels},
              {"seed", c.seed}};
}

CompressorSpec compressor_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "k", "rescale", "levels", "seed"});
  CompressorSpec c;
  c.kind = named(j.at("kind"), path + "/kind", compressor_kind_from_string);
  c.k = as_int(j.at("k"), path + "/k");
  c.rescale = as_bool(j.at("rescale"), path + "/rescale");
  c.levels = as_int(j.at("levels"), path + "/levels");
  c.seed = as_u64(j.at("seed"), path + "/seed");
  return c;
}

// Run settings except the problem, which is shared by all variants.
json run_to_json(const RunConfig& r) {
  return json{{"workers", r.workers},
              {"steps", r.steps},
              {"gamma", r.gamma},
              {"initial_batch", r.initial_batch},
              {"estimator", to_string(r.estimator)},
              {"schedule",
               json{{"kind", to_string(r.schedule.kind)},
                    {"value", r.schedule.value}}},
              {"worker_compressor", compressor_to_json(r.worker_compressor)},
              {"server_compressor", compressor_to_json(r.server_compressor)},
              {"scheme",
               json{{"kind", to_string(r.scheme.kind)},
                    {"beta", r.scheme.beta}}},
              {"baseline_target", to_string(r.baseline_target)},
              {"topology", to_string(r.topology)},
              {"uncompressed", r.uncompressed},
              {"heterogeneity", r.heterogeneity},
              {"x0", r.x0},
              {"seed", r.seed},
              {"parallel", r.parallel}};
}

RunConfig run_from_json(const json& j, const std::string& path,
                        const ProblemSpec& problem) {
  check_keys(j, path,
             {"workers", "steps", "gamma", "initial_batch", "estimator",
              "schedule", "worker_compressor", "server_compressor", "scheme",
              "baseline_target", "topology", "uncompressed", "heterogeneity",
              "x0", "seed", "parallel"});
  RunConfig r;
  r.problem = problem;
  r.workers = as_int(j.at("workers"), path + "/workers");
  r.steps = as_int(j.at("steps"), path + "/steps");
  r.gamma = as_double(j.at("gamma"), path + "/gamma");
  r.initial_batch = as_int(j.at("initial_batch"), path + "/initial_batch");
  r.estimator =
      named(j.at("estimator"), path + "/estimator", estimator_kind_from_string);
  const json& s = j.at("schedule");
  check_keys(s, path + "/schedule", {"kind", "value"});
  r.schedule.kind =
      named(s.at("kind"), path + "/schedule/kind", schedule_kind_from_string);
  r.schedule.value = as_double(s.at("value"), path + "/schedule/value");
  r.worker_compressor =
      compressor_from_json(j.at("worker_compressor"), path + "/worker_compressor");
  r.server_compressor =
      compressor_from_json(j.at("server_compressor"), path + "/server_compressor");
  const json& sc = j.at("scheme");
  check_keys(sc, path + "/scheme", {"kind", "beta"});
  r.scheme.kind =
      named(sc.at("kind"), path + "/scheme/kind", scheme_kind_from_string);
  r.scheme.beta = as_double(sc.at("beta"), path + "/scheme/beta");
  r.baseline_target = named(j.at("baseline_target"), path + "/baseline_target",
                            baseline_target_from_string);
  r.topology = named(j.at("topology"), path + "/topology", topology_from_string);
  r.uncompressed = as_bool(j.at("uncompressed"), path + "/uncompressed");
  r.heterogeneity = as_double(j.at("heterogeneity"), path + "/heterogeneity");
  r.x0 = as_doubles(j.at("x0"), path + "/x0");
  r.seed = as_u64(j.at("seed"), path + "/seed");
  r.parallel = as_bool(j.at("parallel"), path + "/parallel");
  try {
    r.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
  return r;
}

// Fills the missing fields of `user` from `defaults` and parses the result.
json with_defaults(const json& defaults, const json& user,
                   const std::string& path) {
  expect_object(user, path);
  json merged = defaults;
  merged.merge_patch(expand_shorthand(user));
  return merged;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  base.seed = seed;
  base.problem.seed = seed;
  for (auto& v : variants) {
    v.run.seed = seed;
    v.run.problem.seed = seed;
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigParseError("line " + std::to_string(line_of(text, e.byte)) +
                           ": " + e.what());
  }
  check_keys(root, "",
             {"name", "problem", "run", "variants", "tune", "sweep", "verify",
              "record_ghost"});
  ExperimentConfig cfg;
  if (root.contains("name")) cfg.name = as_string(root["name"], "/name");
  if (cfg.name.empty() || cfg.name.find('/') != std::string::npos) {
    fail("/name", "must be a non-empty name without '/'");
  }
  const RunConfig defaults;
  const json problem_json =
      with_defaults(problem_to_json(defaults.problem),
                    root.value("problem", json::object()), "/problem");
  const ProblemSpec problem = problem_from_json(problem_json, "/problem");
  try {
    problem.validate();
  } catch (const ConfigError& e) {
    fail("/problem", e.what());
  }
  const json run_json = with_defaults(run_to_json(defaults),
                                      root.value("run", json::object()), "/run");
  cfg.base = run_from_json(run_json, "/run", problem);

  if (root.contains("variants")) {
    const json& vs = root["variants"];
    if (!vs.is_array()) fail("/variants", "expected an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const std::string path = "/variants/" + std::to_string(i);
      json v = expand_shorthand(expect_object(vs[i], path));
      if (!v.contains("label")) fail(path + "/label", "missing");
      Variant var;
      var.label = as_string(v["label"], path + "/label");
      if (var.label.empty() || var.label.find('/') != std::string::npos) {
        fail(path + "/label", "must be a non-empty name without '/'");
      }
      if (!labels.insert(var.label).second) {
        fail(path + "/label", "duplicate label '" + var.label + "'");
      }
      v.erase("label");
      json merged = run_json;
      merged.merge_patch(v);
      var.run = run_from_json(merged, path, problem);
      var.overrides = v.dump();
      cfg.variants.push_back(std::move(var));
    }
  }

  if (root.contains("tune")) {
    const json& t = root["tune"];
    check_keys(t, "/tune", {"enabled", "gammas", "reference"});
    cfg.tune.enabled = t.contains("enabled") ? as_bool(t["enabled"], "/tune/enabled") : true;
    if (t.contains("gammas")) cfg.tune.gammas = as_doubles(t["gammas"], "/tune/gammas");
    if (t.contains("reference")) {
      cfg.tune.reference = as_string(t["reference"], "/tune/reference");
    }
  }
  if (cfg.tune.enabled) {
    if (cfg.tune.gammas.empty()) fail("/tune/gammas", "empty grid");
    for (double g : cfg.tune.gammas) {
      if (!(g > 0.0)) fail("/tune/gammas", "entries must be positive");
    }
  }
  if (!cfg.tune.reference.empty()) {
    bool found = false;
    for (const auto& v : cfg.variants) found = found || v.label == cfg.tune.reference;
    if (!found) fail("/tune/reference", "no variant labelled '" + cfg.tune.reference + "'");
  }

  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    check_keys(s, "/sweep", {"gammas", "alphas", "c0s"});
    if (s.contains("gammas")) cfg.sweep.gammas = as_doubles(s["gammas"], "/sweep/gammas");
    if (s.contains("alphas")) cfg.sweep.alphas = as_doubles(s["alphas"], "/sweep/alphas");
    if (s.contains("c0s")) cfg.sweep.c0s = as_doubles(s["c0s"], "/sweep/c0s");
    if (!cfg.sweep.alphas.empty() && !cfg.sweep.c0s.empty()) {
      fail("/sweep", "give either alphas or c0s, not both");
    }
    for (double a : cfg.sweep.alphas) {
      if (!(a > 0.0 && a <= 1.0)) fail("/sweep/alphas", "entries must lie in (0, 1]");
    }
    for (double c : cfg.sweep.c0s) {
      if (!(c > 0.0)) fail("/sweep/c0s", "entries must be positive");
    }
    for (double g : cfg.sweep.gammas) {
      if (!(g >= 0.0)) fail("/sweep/gammas", "entries must be >= 0");
    }
  }

  if (root.contains("verify")) {
    const json& v = root["verify"];
    check_keys(v, "/verify", {"tolerance", "steps", "dim", "seed"});
    if (v.contains("tolerance")) cfg.verify.tolerance = as_double(v["tolerance"], "/verify/tolerance");
    if (v.contains("steps")) cfg.verify.steps = as_int(v["steps"], "/verify/steps");
    if (v.contains("dim")) cfg.verify.dim = as_int(v["dim"], "/verify/dim");
    if (v.contains("seed")) cfg.verify.seed = as_u64(v["seed"], "/verify/seed");
    if (!(cfg.verify.tolerance > 0.0)) fail("/verify/tolerance", "must be positive");
    if (cfg.verify.steps < 4) fail("/verify/steps", "must be >= 4");
    if (cfg.verify.dim < 1) fail("/verify/dim", "must be >= 1");
  }
  if (root.contains("record_ghost")) {
    cfg.record_ghost = as_bool(root["record_ghost"], "/record_ghost");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigParseError& e) {
    throw ConfigParseError(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json root;
  root["name"] = cfg.name;
  root["problem"] = problem_to_json(cfg.base.problem);
  root["run"] = run_to_json(cfg.base);
  json vs = json::array();
  for (const auto& v : cfg.variants) {
    json o = v.overrides.empty() ? json::object() : json::parse(v.overrides);
    o["label"] = v.label;
    vs.push_back(std::move(o));
  }
  root["variants"] = std::move(vs);
  root["tune"] = json{{"enabled", cfg.tune.enabled},
                      {"gammas", cfg.tune.gammas},
                      {"reference", cfg.tune.reference}};
  root["sweep"] = json{{"gammas", cfg.sweep.gammas},
                       {"alphas", cfg.sweep.alphas},
                       {"c0s", cfg.sweep.c0s}};
  root["verify"] = json{{"tolerance", cfg.verify.tolerance},
                        {"steps", cfg.verify.steps},
                        {"dim", cfg.verify.dim},
                        {"seed", cfg.verify.seed}};
  root["record_ghost"] = cfg.record_ghost;
  return root.dump(2) + "\n";
}

ExperimentConfig default_benchmark_config(EstimatorKind estimator) {
  const std::string est = to_string(estimator);
  const json doc = {
      {"name", "linreg-" + est},
      {"problem",
       {{"kind", "linreg"},
        {"dim", 20},
        {"samples", 512},
        {"condition", 10.0},
        {"label_noise", 0.1},
        {"batch_size", 1},
        {"seed", 0}}},
      {"run",
       {{"workers", 8},
        {"steps", 10000},
        {"gamma", 0.01},
        {"initial_batch", 8},
        {"estimator", est},
        {"schedule", {{"kind", "inverse_t"}, {"value", 0.0}}},
        {"worker_compressor", "onebit"},
        {"server_compressor", "onebit"},
        {"scheme", {{"kind", "ecx"}, {"beta", 0.3}}},
        {"topology", "double"},
        {"seed", 0}}},
      {"variants",
       json::array({{{"label", "uncompressed"}, {"uncompressed", true}},
                    {{"label", "none"}, {"scheme", "none"}},
                    {{"label", "single"}, {"scheme", "single"}},
                    {{"label", "ecx"}, {"scheme", "ecx"}}})},
      {"tune",
       {{"enabled", true},
        {"gammas", {0.5, 0.1, 0.01, 0.001}},
        {"reference", "uncompressed"}}}};
  return parse_config(doc.dump());
}

}  // namespace ecx
