#pragma once

#include <limits>
#include <vector>

#include <json.hpp>

#include "fairppm/autodiff.hpp"

namespace fairppm::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  nlohmann::json to_json() const;
  static AdamWConfig from_json(const nlohmann::json& j);
};

struct AdamWState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

// Decoupled weight decay (w -= lr * wd * w) followed by a bias-corrected Adam step.
void adamw_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamWState& state, double lr,
                const AdamWConfig& cfg = {});

// Multiplies the learning rate by `factor` once `patience` consecutive epochs
// pass without beating the best loss by more than `min_delta`.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double lr, double factor = 0.75, int patience = 10, double min_delta = 0.001)
      : lr_(lr), factor_(factor), patience_(patience), min_delta_(min_delta) {}

  double step(double loss);
  double lr() const { return lr_; }

 private:
  double lr_, factor_;
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int stall_ = 0;
};

// Stops after `patience` epochs without a strictly lower loss, or at the epoch cap.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience, int max_epochs = 300) : patience_(patience), max_epochs_(max_epochs) {}

  // Records one epoch; returns true when this epoch is the new best.
  bool step(double loss);
  bool should_stop() const { return stall_ >= patience_ || epoch_ >= max_epochs_; }
  bool hit_cap() const { return epoch_ >= max_epochs_ && stall_ < patience_; }
  int epoch() const { return epoch_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_, max_epochs_;
  int epoch_ = 0;
  int stall_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace fairppm::nn
