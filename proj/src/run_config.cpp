#include "fairppm/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "fairppm/error.hpp"

namespace fairppm {

std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) throw ConfigError("valid_fraction must lie in (0, 1)");
  if (target_activity.empty()) throw ConfigError("target_activity must be set");
  if (sensitive_attr.empty()) throw ConfigError("sensitive_attr must be set");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (sweep_lambdas.empty()) throw ConfigError("sweep needs at least one lambda");
  for (double l : sweep_lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep lambda outside [0, 1]");
  }
  hyper.validate();
  loss().validate();
  train.validate();
  synth.validate();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : report_runs) runs.push_back({{"label", r.label}, {"dir", r.dir.generic_string()}});
  return {{"log", log.generic_string()},
          {"out", out.generic_string()},
          {"data", data.generic_string()},
          {"checkpoint", checkpoint.generic_string()},
          {"schema", schema.to_json()},
          {"target_activity", target_activity},
          {"sensitive_attr", sensitive_attr},
          {"drop_sensitive", drop_sensitive},
          {"max_len", max_len},
          {"max_gen_len", max_gen_len},
          {"seed", seed},
          {"test_fraction", test_fraction},
          {"valid_fraction", valid_fraction},
          {"hyper", use_grid ? nlohmann::json("grid") : hyper.to_json()},
          {"grid", grid.to_json()},
          {"lambda", lambda},
          {"sweep", {{"lambdas", sweep_lambdas}}},
          {"sinkhorn",
           {{"epsilon", sinkhorn.epsilon},
            {"max_iters", sinkhorn.max_iters},
            {"convergence_tol", sinkhorn.convergence_tol}}},
          {"train", train.to_json()},
          {"synth", synth.to_json()},
          {"report", {{"runs", runs}}}};
}

std::string RunConfig::hash() const {
  nlohmann::json j = to_json();
  for (const char* key : {"out", "data", "checkpoint"}) j.erase(key);
  return config_hash(j);
}

namespace {

std::vector<double> sweep_from_json(const nlohmann::json& s) {
  if (s.contains("lambdas")) return s.at("lambdas").get<std::vector<double>>();
  const double start = s.value("start", 0.0), stop = s.value("stop", 0.5), step = s.value("step", 0.05);
  if (!(step > 0.0) || stop < start) throw ConfigError("sweep: need step > 0 and stop >= start");
  std::vector<double> out;
  // Integer stepping avoids drift; values are rounded to 1e-12.
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long k = 0; k <= count; ++k) out.push_back(std::round((start + k * step) * 1e12) / 1e12);
  return out;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "log",      "out",        "data",  "checkpoint", "schema",   "target_activity", "sensitive_attr", "drop_sensitive",
      "max_len",  "max_gen_len", "seed", "test_fraction", "valid_fraction", "hyper", "grid", "lambda",
      "sweep",    "sinkhorn",   "train", "synth",      "report",   "jobs"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  RunConfig c;
  try {
    c.log = j.value("log", std::string());
    c.out = j.value("out", c.out.string());
    c.data = j.value("data", std::string());
    c.checkpoint = j.value("checkpoint", std::string());
    if (j.contains("schema")) c.schema = SchemaConfig::from_json(j.at("schema"));
    c.target_activity = j.value("target_activity", c.target_activity);
    c.sensitive_attr = j.value("sensitive_attr", c.sensitive_attr);
    c.drop_sensitive = j.value("drop_sensitive", c.drop_sensitive);
    c.max_len = j.value("max_len", c.max_len);
    c.max_gen_len = j.value("max_gen_len", c.max_gen_len);
    c.seed = j.value("seed", c.seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
    if (j.contains("hyper")) {
      const auto& h = j.at("hyper");
      if (h.is_string()) {
        if (h.get<std::string>() != "grid") throw ConfigError("hyper must be an object or \"grid\"");
        c.use_grid = true;
      } else {
        c.hyper = nn::Hyper::from_json(h);
      }
    }
    if (j.contains("grid")) c.grid = train::HyperGrid::from_json(j.at("grid"));
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("sweep")) c.sweep_lambdas = sweep_from_json(j.at("sweep"));
    if (j.contains("sinkhorn")) {
      const auto& s = j.at("sinkhorn");
      c.sinkhorn.epsilon = s.value("epsilon", c.sinkhorn.epsilon);
      c.sinkhorn.max_iters = s.value("max_iters", c.sinkhorn.max_iters);
      c.sinkhorn.convergence_tol = s.value("convergence_tol", c.sinkhorn.convergence_tol);
    }
    if (j.contains("train")) c.train = train::TrainConfig::from_json(j.at("train"));
    if (j.contains("synth")) c.synth = BiasSpec::from_json(j.at("synth"));
    if (j.contains("report")) {
      for (const auto& r : j.at("report").value("runs", nlohmann::json::array())) {
        c.report_runs.push_back({r.at("label").get<std::string>(), r.at("dir").get<std::string>()});
      }
    }
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace fairppm
