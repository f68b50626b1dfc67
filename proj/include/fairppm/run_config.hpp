#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairppm/eventlog.hpp"
#include "fairppm/loss.hpp"
#include "fairppm/synthetic.hpp"
#include "fairppm/train.hpp"

namespace fairppm {

// 64-bit FNV-1a over the compact dump of `j`, as 16 lowercase hex digits.
std::string config_hash(const nlohmann::json& j);

struct ReportRun {
  std::string label;
  std::filesystem::path dir;
};

// Everything one CLI invocation needs. Loaded from a JSON file, then
// individual fields may be overridden by command-line flags.
struct RunConfig {
  std::filesystem::path log;
  std::filesystem::path out = "out";
  std::filesystem::path data;  // ingest artifacts; empty means `out`
  std::filesystem::path checkpoint;  // empty means <out>/checkpoint.json
  SchemaConfig schema;
  std::string target_activity = "Make Job Offer";
  std::string sensitive_attr = "case:protected";
  bool drop_sensitive = false;
  std::size_t max_len = 6;
  std::size_t max_gen_len = 0;  // 0 means max_len
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  double valid_fraction = 0.2;
  nn::Hyper hyper;
  bool use_grid = false;
  train::HyperGrid grid;
  double lambda = 0.0;
  std::vector<double> sweep_lambdas = train::default_lambdas();
  transport::SinkhornConfig sinkhorn;
  train::TrainConfig train;
  BiasSpec synth = BiasSpec::hiring_high();
  std::vector<ReportRun> report_runs;
  int jobs = 1;

  void validate() const;
  std::filesystem::path data_dir() const { return data.empty() ? out : data; }
  std::filesystem::path checkpoint_path() const { return checkpoint.empty() ? out / "checkpoint.json" : checkpoint; }
  std::size_t generation_cap() const { return max_gen_len == 0 ? max_len : max_gen_len; }
  nn::CompositeLossConfig loss() const { return {lambda, sinkhorn}; }

  // Canonical form; `jobs` is left out because it never changes results.
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  // Provenance hash over the canonical form minus output locations, so the
  // same run written to two directories yields identical files.
  std::string hash() const;
};

}  // namespace fairppm
