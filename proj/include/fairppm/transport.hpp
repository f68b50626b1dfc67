#pragma once

#include <span>
#include <vector>

#include "fairppm/autodiff.hpp"

namespace fairppm::transport {

// Exact 1-Wasserstein distance between two empirical distributions on the
// real line: integral of |F_a - F_b| over the merged support.
double exact_w1_1d(std::span<const double> a, std::span<const double> b);

struct SinkhornConfig {
  double epsilon = 0.01;
  int max_iters = 200;
  double convergence_tol = 1e-6;  // <= 0 runs exactly max_iters iterations

  void validate() const;
};

struct SinkhornResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double marginal_error = 0.0;
  // d value / d a and d value / d b, filled when requested.
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};

// Entropy-regularised transport cost <P, |a_i - b_j|> between uniform
// empirical measures, solved by log-domain Sinkhorn iterations. Symmetric in
// its arguments. Gradients differentiate through the unrolled iterations.
//
// The cost matrix is never formed: on the line, every kernel sum splits into
// the points left and right of the query, each a running scaled sum over the
// sorted samples, so an iteration costs O(n + m).
SinkhornResult sinkhorn(std::span<const double> a, std::span<const double> b, const SinkhornConfig& cfg,
                        bool with_gradient = false);

// Same quantity as a 1 x 1 tape node over two score vectors of any shape.
nn::Var sinkhorn_distance(nn::Tape& tape, nn::Var a, nn::Var b, const SinkhornConfig& cfg,
                          SinkhornResult* info = nullptr);

}  // namespace fairppm::transport
