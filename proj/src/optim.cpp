#include "fairppm/optim.hpp"

#include <cmath>
#include <string>

#include "fairppm/error.hpp"

namespace fairppm::nn {

nlohmann::json AdamWConfig::to_json() const {
  return {{"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"weight_decay", weight_decay}};
}

AdamWConfig AdamWConfig::from_json(const nlohmann::json& j) {
  AdamWConfig c;
  try {
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("adamw: ") + e.what());
  }
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1) || !(c.eps > 0) || c.weight_decay < 0) {
    throw ConfigError("adamw: betas must be in [0,1), eps positive, weight_decay non-negative");
  }
  return c;
}

void adamw_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamWState& state, double lr,
                const AdamWConfig& cfg) {
  if (grads.size() != params.size()) throw ShapeError("adamw_step: gradient count differs from parameter count");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& w = *params[k];
    const Matrix& g = grads[k];
    if (g.rows() != w.rows() || g.cols() != w.cols()) throw ShapeError("adamw_step: gradient shape mismatch");
    w -= lr * cfg.weight_decay * w;
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + cfg.eps);
  }
}

double PlateauScheduler::step(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    stall_ = 0;
    return lr_;
  }
  if (++stall_ >= patience_) {
    lr_ *= factor_;
    stall_ = 0;
  }
  return lr_;
}

bool EarlyStopping::step(double loss) {
  ++epoch_;
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = epoch_;
    stall_ = 0;
    return true;
  }
  ++stall_;
  return false;
}

}  // namespace fairppm::nn
