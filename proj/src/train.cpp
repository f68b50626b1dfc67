#include "fairppm/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include "fairppm/error.hpp"

namespace fairppm::train {

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("train.patience must be at least 1");
  if (fair_batch < 1 || eval_batch < 1) throw ConfigError("train batch sizes must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_epochs", max_epochs},
          {"patience", patience},
          {"adamw", adamw.to_json()},
          {"composite_validation", composite_validation},
          {"fair_batch", fair_batch},
          {"eval_batch", eval_batch}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("adamw")) c.adamw = nn::AdamWConfig::from_json(j.at("adamw"));
    c.composite_validation = j.value("composite_validation", c.composite_validation);
    c.fair_batch = j.value("fair_batch", c.fair_batch);
    c.eval_batch = j.value("eval_batch", c.eval_batch);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json Checkpoint::to_json() const {
  return {{"version", version},
          {"hyper", hyper.to_json()},
          {"effective_batch", effective_batch},
          {"loss", loss.to_json()},
          {"seed", seed},
          {"config_hash", config_hash},
          {"encoder", encoder.to_json()},
          {"valid_scores", valid_scores},
          {"valid_labels", valid_labels},
          {"epochs", epochs},
          {"best_epoch", best_epoch},
          {"best_valid_loss", best_valid_loss},
          {"early_stopped", early_stopped},
          {"empty_group_batches", empty_group_batches},
          {"unconverged_sinkhorn", unconverged_sinkhorn},
          {"params", params.to_json()}};
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    c.version = j.at("version").get<int>();
    if (c.version != kVersion) throw ArtifactError("unsupported checkpoint version " + std::to_string(c.version));
    c.hyper = nn::Hyper::from_json(j.at("hyper"));
    c.effective_batch = j.at("effective_batch").get<int>();
    c.loss = nn::CompositeLossConfig::from_json(j.at("loss"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.config_hash = j.value("config_hash", "");
    c.encoder = EncoderSpec::from_json(j.at("encoder"));
    c.valid_scores = j.at("valid_scores").get<std::vector<double>>();
    c.valid_labels = j.at("valid_labels").get<std::vector<int>>();
    c.epochs = j.value("epochs", 0);
    c.best_epoch = j.value("best_epoch", 0);
    c.best_valid_loss = j.value("best_valid_loss", 0.0);
    c.early_stopped = j.value("early_stopped", false);
    c.empty_group_batches = j.value("empty_group_batches", std::size_t{0});
    c.unconverged_sinkhorn = j.value("unconverged_sinkhorn", std::size_t{0});
    c.params = nn::ModelParams::from_json(j.at("params"));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write checkpoint " + path.string());
  out << to_json().dump() << '\n';
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("unreadable checkpoint " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

namespace {

std::vector<int> labels_of(std::span<const EncodedPrefix* const> batch) {
  std::vector<int> y;
  for (const auto* s : batch) y.push_back(s->y);
  return y;
}

std::vector<int> groups_of(std::span<const EncodedPrefix* const> batch) {
  std::vector<int> g;
  for (const auto* s : batch) g.push_back(s->s);
  return g;
}

}  // namespace

double dataset_loss(const nn::ModelParams& params, const std::vector<EncodedPrefix>& samples,
                    const nn::CompositeLossConfig& loss, std::size_t chunk) {
  if (samples.empty()) throw TrainingError("cannot compute a loss over no samples");
  std::mt19937_64 unused(0);
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const EncodedPrefix*> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(&samples[k]);
    nn::Tape tape;
    auto bound = nn::bind(tape, params, false);
    nn::Var p = nn::forward(tape, params, bound, batch, false, unused);
    nn::Var l = nn::composite_loss(tape, p, labels_of(batch), groups_of(batch), loss);
    total += tape.scalar(l) * static_cast<double>(end - start);
  }
  return total / static_cast<double>(samples.size());
}

Checkpoint train_model(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                       const std::vector<EncodedPrefix>& valid, const nn::Hyper& hyper,
                       const nn::CompositeLossConfig& loss, std::uint64_t seed, const TrainConfig& cfg) {
  hyper.validate();
  loss.validate();
  cfg.validate();
  if (train.empty()) throw TrainingError("no training samples");
  if (valid.empty()) throw TrainingError("no validation samples");

  Checkpoint ck;
  ck.hyper = hyper;
  ck.loss = loss;
  ck.seed = seed;
  ck.encoder = spec;
  ck.effective_batch = loss.lambda > 0.0 ? cfg.fair_batch : hyper.batch;

  nn::ModelParams params = nn::init_params(spec, hyper, derive_seed(seed, 0));
  nn::ModelParams best = params;
  nn::AdamWState state;
  nn::PlateauScheduler scheduler(hyper.lr);
  nn::EarlyStopping stopper(cfg.patience, cfg.max_epochs);
  std::mt19937_64 dropout_rng(derive_seed(seed, 1));
  nn::CompositeLossConfig valid_loss = loss;
  if (!cfg.composite_validation) valid_loss.lambda = 0.0;
  nn::LossStats stats;

  std::vector<std::size_t> order(train.size());
  const auto batch_size = static_cast<std::size_t>(ck.effective_batch);
  while (!stopper.should_stop()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(stopper.epoch())));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<const EncodedPrefix*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&train[order[k]]);
      nn::Tape tape;
      auto bound = nn::bind(tape, params, true);
      nn::Var p = nn::forward(tape, params, bound, batch, true, dropout_rng);
      nn::Var l = nn::composite_loss(tape, p, labels_of(batch), groups_of(batch), loss, &stats);
      if (!std::isfinite(tape.scalar(l))) throw TrainingError("training loss became non-finite");
      tape.backward(l);
      std::vector<nn::Matrix> grads;
      grads.reserve(bound.size());
      for (nn::Var v : bound) grads.push_back(tape.grad(v));
      nn::adamw_step(params.tensors(), grads, state, scheduler.lr(), cfg.adamw);
    }

    const double vloss = dataset_loss(params, valid, valid_loss, static_cast<std::size_t>(cfg.eval_batch));
    if (!std::isfinite(vloss)) throw TrainingError("validation loss became non-finite");
    if (stopper.step(vloss)) best = params;
    scheduler.step(vloss);
  }

  ck.params = std::move(best);
  ck.epochs = stopper.epoch();
  ck.best_epoch = stopper.best_epoch();
  ck.best_valid_loss = stopper.best();
  ck.early_stopped = !stopper.hit_cap();
  ck.empty_group_batches = stats.empty_group_batches;
  ck.unconverged_sinkhorn = stats.unconverged_sinkhorn;
  ck.valid_scores = nn::predict(ck.params, valid, static_cast<std::size_t>(cfg.eval_batch));
  for (const auto& s : valid) ck.valid_labels.push_back(s.y);
  return ck;
}

metrics::EvalReport evaluate(const Checkpoint& ckpt, const std::vector<EncodedPrefix>& test) {
  const std::vector<double> scores = nn::predict(ckpt.params, test);
  std::vector<int> labels, groups;
  for (const auto& s : test) {
    labels.push_back(s.y);
    groups.push_back(s.s);
  }
  return metrics::evaluate_scores(scores, labels, groups, ckpt.valid_scores, ckpt.valid_labels);
}

std::vector<nn::Hyper> HyperGrid::cells() const {
  std::vector<nn::Hyper> out;
  for (int l : layers)
    for (bool bi : bidirectional)
      for (int h : hidden)
        for (int b : batch)
          for (double r : lr)
            for (double d : dropout) out.push_back({l, bi, h, b, r, d});
  return out;
}

nlohmann::json HyperGrid::to_json() const {
  return {{"layers", layers}, {"bidirectional", bidirectional}, {"hidden", hidden},
          {"batch", batch},   {"lr", lr},                       {"dropout", dropout}};
}

HyperGrid HyperGrid::from_json(const nlohmann::json& j) {
  HyperGrid g;
  try {
    g.layers = j.value("layers", g.layers);
    g.bidirectional = j.value("bidirectional", g.bidirectional);
    g.hidden = j.value("hidden", g.hidden);
    g.batch = j.value("batch", g.batch);
    g.lr = j.value("lr", g.lr);
    g.dropout = j.value("dropout", g.dropout);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  if (g.cells().empty()) throw ConfigError("grid: every dimension needs at least one value");
  for (const auto& h : g.cells()) h.validate();
  return g;
}

std::size_t select_best_cell(const std::vector<GridCell>& cells) {
  std::optional<std::size_t> best;
  auto better = [](const GridCell& a, const GridCell& b) {
    if (a.valid_auc != b.valid_auc) return a.valid_auc > b.valid_auc;
    if (a.hyper.layers != b.hyper.layers) return a.hyper.layers < b.hyper.layers;
    if (a.hyper.hidden != b.hyper.hidden) return a.hyper.hidden < b.hyper.hidden;
    return a.hyper.lr < b.hyper.lr;
  };
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!cells[k].ok) continue;
    if (!best || better(cells[k], cells[*best])) best = k;
  }
  if (!best) throw TrainingError("grid search: every cell failed to train");
  return *best;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) fn(k);
    });
  }
  for (auto& t : pool) t.join();
}

GridResult grid_search(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                       const std::vector<EncodedPrefix>& valid, const HyperGrid& grid, std::uint64_t seed,
                       TrainConfig cfg, int jobs) {
  std::vector<int> labels;
  for (const auto& s : valid) labels.push_back(s.y);
  if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), 0) == 0) {
    throw UndefinedMetricError("auc", "validation set needs both outcome classes for grid search");
  }
  cfg.patience = 20;
  GridResult result;
  for (const auto& h : grid.cells()) result.cells.push_back({h, 0.0, false, {}});
  parallel_for(result.cells.size(), jobs, [&](std::size_t k) {
    GridCell& cell = result.cells[k];
    try {
      const Checkpoint ck = train_model(spec, train, valid, cell.hyper, nn::CompositeLossConfig{}, derive_seed(seed, 100 + k), cfg);
      cell.valid_auc = metrics::auc(ck.valid_scores, ck.valid_labels);
      cell.ok = true;
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });
  result.best = result.cells[select_best_cell(result.cells)].hyper;
  return result;
}

std::vector<double> default_lambdas() {
  std::vector<double> out;
  for (int k = 0; k <= 10; ++k) out.push_back(k / 20.0);
  return out;
}

std::vector<SweepPoint> lambda_sweep(const EncoderSpec& spec, const std::vector<EncodedPrefix>& train,
                                     const std::vector<EncodedPrefix>& valid,
                                     const std::vector<EncodedPrefix>& test, const nn::Hyper& hyper,
                                     const std::vector<double>& lambdas, const nn::CompositeLossConfig& base,
                                     std::uint64_t seed, const TrainConfig& cfg, int jobs) {
  if (lambdas.empty()) throw ConfigError("lambda sweep needs at least one lambda");
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep lambda outside [0, 1]");
  }
  std::vector<SweepPoint> points(lambdas.size());
  parallel_for(lambdas.size(), jobs, [&](std::size_t k) {
    SweepPoint& pt = points[k];
    pt.lambda = lambdas[k];
    pt.seed = seed;
    try {
      nn::CompositeLossConfig loss = base;
      loss.lambda = lambdas[k];
      const Checkpoint ck = train_model(spec, train, valid, hyper, loss, seed, cfg);
      pt.report = evaluate(ck, test);
      pt.auc = pt.report.auc;
      pt.abpc = pt.report.abpc;
      pt.abcc = pt.report.abcc;
      pt.converged = ck.early_stopped;
    } catch (const Error& e) {
      pt.failed = true;
      pt.error = e.what();
      pt.auc = pt.abpc = pt.abcc = std::nan("");
    }
  });
  return points;
}

std::vector<std::size_t> pareto_front(const std::vector<SweepPoint>& points, FairnessKey key) {
  auto fair = [key](const SweepPoint& p) { return key == FairnessKey::abpc ? p.abpc : p.abcc; };
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    if (p.failed) continue;
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      const SweepPoint& q = points[j];
      if (j == i || q.failed) continue;
      const bool weakly = q.auc >= p.auc && fair(q) <= fair(p);
      const bool strictly = q.auc > p.auc || fair(q) < fair(p);
      if (weakly && strictly) keep = false;
      // An exact duplicate survives only as its lowest-lambda copy.
      if (!strictly && weakly && (q.lambda < p.lambda || (q.lambda == p.lambda && j < i))) keep = false;
    }
    if (keep) front.push_back(i);
  }
  std::sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].auc != points[b].auc) return points[a].auc > points[b].auc;
    if (fair(points[a]) != fair(points[b])) return fair(points[a]) < fair(points[b]);
    return points[a].lambda < points[b].lambda;
  });
  return front;
}

}  // namespace fairppm::train
