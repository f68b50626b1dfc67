#pragma once

// Small models and data shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fairppm/encoding.hpp"
#include "fairppm/loss.hpp"
#include "fairppm/model.hpp"

namespace fairppm::testing {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

inline EncoderSpec tiny_spec(std::size_t max_len) {
  EncoderSpec spec;
  spec.max_len = max_len;
  spec.sensitive_attr = "case:protected";
  spec.categorical = {CategoricalFeature{kActivityFeature, {{"A", 1}, {"B", 2}, {"C", 3}}, 2}};
  spec.numeric = {NumericFeature{"case:age", AttrKind::numeric, 0, 10},
                  NumericFeature{"case:protected", AttrKind::boolean, 0, 1}};
  return spec;
}

inline EncodedPrefix random_prefix(std::mt19937_64& rng, std::size_t T, std::size_t L) {
  EncodedPrefix p;
  p.cat.assign(1, std::vector<int>(T, 0));
  p.num.assign(2, std::vector<double>(T, 0.0));
  p.mask.assign(T, 0);
  std::uniform_real_distribution<double> u(0, 1);
  p.s = static_cast<int>(rng() % 2);
  for (std::size_t t = 0; t < L; ++t) {
    p.mask[t] = 1;
    p.cat[0][t] = 1 + static_cast<int>(rng() % 3);
    p.num[0][t] = u(rng);
    p.num[1][t] = p.s;
  }
  p.y = static_cast<int>(rng() % 2);
  return p;
}

// Batch with both sensitive groups present.
inline std::vector<EncodedPrefix> random_batch(std::mt19937_64& rng, std::size_t n, std::size_t T) {
  std::vector<EncodedPrefix> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(random_prefix(rng, T, 1 + rng() % T));
  out[0].s = 0;
  out[1].s = 1;
  return out;
}

// Composite loss of `params` on `batch`; dropout masks are reproduced from `seed`.
inline double composite_value(const nn::ModelParams& params, const std::vector<EncodedPrefix>& batch,
                              const nn::CompositeLossConfig& cfg, std::uint64_t seed,
                              std::vector<nn::Matrix>* grads = nullptr) {
  nn::Tape tape;
  auto bound = nn::bind(tape, params, grads != nullptr);
  std::vector<const EncodedPrefix*> ptrs;
  std::vector<int> y, s;
  for (const auto& p : batch) {
    ptrs.push_back(&p);
    y.push_back(p.y);
    s.push_back(p.s);
  }
  std::mt19937_64 rng(seed);
  nn::Var p = nn::forward(tape, params, bound, ptrs, true, rng);
  nn::Var loss = nn::composite_loss(tape, p, y, s, cfg);
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (auto v : bound) grads->push_back(tape.grad(v));
  }
  return tape.scalar(loss);
}

// Worst relative error between analytic gradients and central differences over
// every parameter entry.
inline double composite_gradient_error(nn::ModelParams params, const std::vector<EncodedPrefix>& batch,
                                       const nn::CompositeLossConfig& cfg, std::uint64_t seed, double h = 1e-5) {
  std::vector<nn::Matrix> grads;
  composite_value(params, batch, cfg, seed, &grads);
  auto tensors = params.tensors();
  double worst = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index k = 0; k < tensors[t]->size(); ++k) {
      double& w = tensors[t]->data()[k];
      const double keep = w;
      w = keep + h;
      const double up = composite_value(params, batch, cfg, seed);
      w = keep - h;
      const double down = composite_value(params, batch, cfg, seed);
      w = keep;
      worst = std::max(worst, rel_err(grads[t].data()[k], (up - down) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace fairppm::testing
