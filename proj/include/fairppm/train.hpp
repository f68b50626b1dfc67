#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairppm/encoding.hpp"
#include "fairppm/loss.hpp"
#include "fairppm/metrics.hpp"
#include "fairppm/model.hpp"
#include "fairppm/optim.hpp"

namespace fairppm::train {

// Derives an independent stream seed from a root seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

struct TrainConfig {
  int max_epochs = 300;
  int patience = 50;
  nn::AdamWConfig adamw;
  // Validation loss uses the training lambda; false means plain BCE.
  bool composite_validation = true;
  int fair_batch = 512;  // batch size forced whenever lambda > 0
  int eval_batch = 512;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Checkpoint {
  static constexpr int kVersion = 1;

  int version = kVersion;
  nn::Hyper hyper;
  int effective_batch = 0;
  nn::CompositeLossConfig loss;
  std::uint64_t seed = 0;
  nn::ModelParams params;
  EncoderSpec encoder;
  // Validation propensities of the retained snapshot, used for threshold tuning.
  std::vector<double> valid_scores;
  std::vector<int> valid_labels;
  std::string config_hash;

  int epochs = 0;
  int best_epoch = 0;
  double best_valid_loss = 0;
  bool early_stopped = false;
  std::size_t empty_group_batches = 0;
  std::size_t unconverged_sinkhorn = 0;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

// Full training loop: per-epoch shuffled mini-batches, AdamW, plateau
// scheduler, early stopping; returns the best-validation-loss snapshot.
Checkpoint train_model(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                       const std::vector<EncodedPrefix>& valid, const nn::Hyper& hyper,
                       const nn::CompositeLossConfig& loss, std::uint64_t seed, const TrainConfig& cfg = {});

// Mean composite (or BCE) loss over `samples` in chunks of `chunk`, weighted by chunk size.
double dataset_loss(const nn::ModelParams& params, const std::vector<EncodedPrefix>& samples,
                    const nn::CompositeLossConfig& loss, std::size_t chunk = 512);

metrics::EvalReport evaluate(const Checkpoint& ckpt, const std::vector<EncodedPrefix>& test);

struct HyperGrid {
  std::vector<int> layers{1, 2};
  std::vector<bool> bidirectional{false, true};
  std::vector<int> hidden{16, 32, 64};
  std::vector<int> batch{128, 256, 512};
  std::vector<double> lr{0.0001, 0.001};
  std::vector<double> dropout{0.2, 0.4};

  std::vector<nn::Hyper> cells() const;  // cartesian product, layers varying slowest
  nlohmann::json to_json() const;
  static HyperGrid from_json(const nlohmann::json& j);
};

struct GridCell {
  nn::Hyper hyper;
  double valid_auc = 0;
  bool ok = false;
  std::string error;
};

// Highest validation AUC; ties go to fewer layers, then smaller hidden size,
// then lower learning rate, then earlier cell. Throws when no cell succeeded.
std::size_t select_best_cell(const std::vector<GridCell>& cells);

struct GridResult {
  nn::Hyper best;
  std::vector<GridCell> cells;
};

// Trains every cell with plain BCE and patience 20 (cfg.patience is overridden).
GridResult grid_search(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                       const std::vector<EncodedPrefix>& valid, const HyperGrid& grid, std::uint64_t seed,
                       TrainConfig cfg = {}, int jobs = 1);

struct SweepPoint {
  double lambda = 0;
  double auc = 0;
  double abpc = 0;
  double abcc = 0;
  std::uint64_t seed = 0;
  // Training ended through early stopping rather than the epoch cap.
  bool converged = false;
  bool failed = false;
  std::string error;
  metrics::EvalReport report;
};

// 0.00, 0.05, ..., 0.50
std::vector<double> default_lambdas();

// One training run and test evaluation per lambda, all with the same seed.
// A run that throws becomes a failed point instead of aborting the sweep.
std::vector<SweepPoint> lambda_sweep(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                                     const std::vector<EncodedPrefix>& valid,
                                     const std::vector<EncodedPrefix>& test, const nn::Hyper& hyper,
                                     const std::vector<double>& lambdas, const nn::CompositeLossConfig& base,
                                     std::uint64_t seed, const TrainConfig& cfg = {}, int jobs = 1);

enum class FairnessKey { abpc, abcc };

// Indices of the non-dominated, non-failed points (maximise AUC, minimise the
// fairness metric), sorted by AUC descending. Exact duplicates keep the lowest lambda.
std::vector<std::size_t> pareto_front(const std::vector<SweepPoint>& points, FairnessKey key);

// Runs fn(0..count-1) on up to `jobs` threads; exceptions are the callee's concern.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace fairppm::train
