#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "fairppm/autodiff.hpp"
#include "fairppm/encoding.hpp"

namespace fairppm::nn {

struct Hyper {
  int layers = 1;
  bool bidirectional = false;
  int hidden = 32;
  int batch = 256;
  double lr = 0.001;
  double dropout = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
  static Hyper from_json(const nlohmann::json& j);
  bool operator==(const Hyper&) const = default;
};

// Gate blocks are laid out [input | forget | cell | output] along the columns.
struct LstmWeights {
  Matrix W;  // input_width x 4H
  Matrix U;  // H x 4H
  Matrix b;  // 1 x 4H
};

struct ModelParams {
  Hyper hyper;
  std::vector<Matrix> embeddings;              // per categorical feature, (vocab + 1) x dim
  std::size_t numeric_channels = 0;
  std::vector<std::vector<LstmWeights>> lstm;  // [layer][direction]
  Matrix dense_w;                              // (H * directions) x 1
  Matrix dense_b;                              // 1 x 1

  // Every trainable matrix in a fixed order shared by optimizer state and tape bindings.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  nlohmann::json to_json() const;
  static ModelParams from_json(const nlohmann::json& j);
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except the
// forget gate at 1.
ModelParams init_params(const EncoderSpec& spec, const Hyper& hyper, std::uint64_t seed);

// Tape leaves for every tensor, in ModelParams::tensors() order.
std::vector<Var> bind(Tape& tape, const ModelParams& params, bool trainable);

// Propensities (B x 1) for a batch. Dropout is applied only when training.
Var forward(Tape& tape, const ModelParams& params, const std::vector<Var>& bound,
            std::span<const EncodedPrefix* const> batch, bool training, std::mt19937_64& rng);

// Evaluation-mode propensities, computed in chunks of `chunk` samples.
std::vector<double> predict(const ModelParams& params, const std::vector<EncodedPrefix>& samples,
                            std::size_t chunk = 512);

}  // namespace fairppm::nn
