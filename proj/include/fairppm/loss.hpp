#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "fairppm/autodiff.hpp"
#include "fairppm/transport.hpp"

namespace fairppm::nn {

inline constexpr double kProbClamp = 1e-7;

struct CompositeLossConfig {
  double lambda = 0.0;
  transport::SinkhornConfig sinkhorn;

  void validate() const;
  nlohmann::json to_json() const;
  static CompositeLossConfig from_json(const nlohmann::json& j);
};

// Counters for batches where the fairness term could not be formed or the
// transport solver hit its iteration cap.
struct LossStats {
  std::size_t empty_group_batches = 0;
  std::size_t unconverged_sinkhorn = 0;
};

// Mean binary cross-entropy of propensities p (B x 1) clamped to [1e-7, 1 - 1e-7].
Var bce_loss(Tape& tape, Var p, const std::vector<int>& labels);

// (1 - lambda) * BCE + lambda * Sinkhorn(scores of s = 0, scores of s = 1).
// lambda = 0 returns the BCE node itself and lambda = 1 the transport node.
Var composite_loss(Tape& tape, Var p, const std::vector<int>& labels, const std::vector<int>& sensitive,
                   const CompositeLossConfig& cfg, LossStats* stats = nullptr);

}  // namespace fairppm::nn
