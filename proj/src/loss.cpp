#include "fairppm/loss.hpp"

#include <optional>
#include <string>

#include "fairppm/error.hpp"

namespace fairppm::nn {

void CompositeLossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  sinkhorn.validate();
}

nlohmann::json CompositeLossConfig::to_json() const {
  return {{"lambda", lambda},
          {"sinkhorn",
           {{"epsilon", sinkhorn.epsilon},
            {"max_iters", sinkhorn.max_iters},
            {"convergence_tol", sinkhorn.convergence_tol}}}};
}

CompositeLossConfig CompositeLossConfig::from_json(const nlohmann::json& j) {
  CompositeLossConfig c;
  try {
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("sinkhorn")) {
      const auto& s = j.at("sinkhorn");
      c.sinkhorn.epsilon = s.value("epsilon", c.sinkhorn.epsilon);
      c.sinkhorn.max_iters = s.value("max_iters", c.sinkhorn.max_iters);
      c.sinkhorn.convergence_tol = s.value("convergence_tol", c.sinkhorn.convergence_tol);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("loss config: ") + e.what());
  }
  c.validate();
  return c;
}

Var bce_loss(Tape& tape, Var p, const std::vector<int>& labels) {
  const Matrix& v = tape.value(p);
  if (v.cols() != 1 || static_cast<std::size_t>(v.rows()) != labels.size()) {
    throw ShapeError("bce_loss: propensities and labels differ in length");
  }
  Matrix y(v.rows(), 1);
  for (std::size_t k = 0; k < labels.size(); ++k) y(static_cast<Eigen::Index>(k), 0) = labels[k] ? 1.0 : 0.0;
  Var pc = tape.clamp(p, kProbClamp, 1.0 - kProbClamp);
  Var log_p = tape.log(pc);
  Var log_q = tape.log(tape.affine(pc, -1.0, 1.0));
  Var yv = tape.constant(y);
  Var not_y = tape.constant((1.0 - y.array()).matrix());
  Var ll = tape.add(tape.mul(yv, log_p), tape.mul(not_y, log_q));
  return tape.affine(tape.mean(ll), -1.0, 0.0);
}

Var composite_loss(Tape& tape, Var p, const std::vector<int>& labels, const std::vector<int>& sensitive,
                   const CompositeLossConfig& cfg, LossStats* stats) {
  if (sensitive.size() != labels.size()) throw ShapeError("composite_loss: sensitive and labels differ in length");
  if (cfg.lambda == 0.0) return bce_loss(tape, p, labels);

  std::vector<int> g0, g1;
  for (std::size_t k = 0; k < sensitive.size(); ++k) (sensitive[k] ? g1 : g0).push_back(static_cast<int>(k));
  std::optional<Var> ipm;
  if (g0.empty() || g1.empty()) {
    if (stats) ++stats->empty_group_batches;
  } else {
    transport::SinkhornResult info;
    ipm = transport::sinkhorn_distance(tape, tape.gather_rows(p, std::move(g0)), tape.gather_rows(p, std::move(g1)),
                                       cfg.sinkhorn, &info);
    if (stats && !info.converged) ++stats->unconverged_sinkhorn;
  }

  if (cfg.lambda == 1.0) return ipm ? *ipm : tape.constant(Matrix::Zero(1, 1));
  Var bce = tape.affine(bce_loss(tape, p, labels), 1.0 - cfg.lambda, 0.0);
  if (!ipm) return bce;
  return tape.add(bce, tape.affine(*ipm, cfg.lambda, 0.0));
}

}  // namespace fairppm::nn
