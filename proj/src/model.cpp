#include "fairppm/model.hpp"

#include <cmath>
#include <string>

#include "fairppm/error.hpp"

namespace fairppm::nn {

void Hyper::validate() const {
  if (layers < 1) throw ConfigError("hyper.layers must be at least 1");
  if (hidden < 1) throw ConfigError("hyper.hidden must be at least 1");
  if (batch < 1) throw ConfigError("hyper.batch must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("hyper.lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("hyper.dropout must be in [0, 1)");
}

nlohmann::json Hyper::to_json() const {
  return {{"layers", layers}, {"bidirectional", bidirectional}, {"hidden", hidden},
          {"batch", batch},   {"lr", lr},                       {"dropout", dropout}};
}

Hyper Hyper::from_json(const nlohmann::json& j) {
  Hyper h;
  try {
    h.layers = j.value("layers", h.layers);
    h.bidirectional = j.value("bidirectional", h.bidirectional);
    h.hidden = j.value("hidden", h.hidden);
    h.batch = j.value("batch", h.batch);
    h.lr = j.value("lr", h.lr);
    h.dropout = j.value("dropout", h.dropout);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hyper: ") + e.what());
  }
  h.validate();
  return h;
}

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out;
  for (auto& e : embeddings) out.push_back(&e);
  for (auto& layer : lstm) {
    for (auto& d : layer) {
      out.push_back(&d.W);
      out.push_back(&d.U);
      out.push_back(&d.b);
    }
  }
  out.push_back(&dense_w);
  out.push_back(&dense_b);
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Matrix m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ArtifactError("matrix row count mismatch");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = data[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ArtifactError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json ModelParams::to_json() const {
  nlohmann::json emb = nlohmann::json::array(), layers = nlohmann::json::array();
  for (const auto& e : embeddings) emb.push_back(matrix_json(e));
  for (const auto& layer : lstm) {
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& d : layer) dirs.push_back({{"W", matrix_json(d.W)}, {"U", matrix_json(d.U)}, {"b", matrix_json(d.b)}});
    layers.push_back(dirs);
  }
  return {{"hyper", hyper.to_json()},         {"numeric_channels", numeric_channels},
          {"embeddings", emb},                {"lstm", layers},
          {"dense_w", matrix_json(dense_w)}, {"dense_b", matrix_json(dense_b)}};
}

ModelParams ModelParams::from_json(const nlohmann::json& j) {
  ModelParams p;
  try {
    p.hyper = Hyper::from_json(j.at("hyper"));
    p.numeric_channels = j.at("numeric_channels").get<std::size_t>();
    for (const auto& e : j.at("embeddings")) p.embeddings.push_back(matrix_from_json(e));
    for (const auto& layer : j.at("lstm")) {
      auto& dirs = p.lstm.emplace_back();
      for (const auto& d : layer)
        dirs.push_back({matrix_from_json(d.at("W")), matrix_from_json(d.at("U")), matrix_from_json(d.at("b"))});
    }
    p.dense_w = matrix_from_json(j.at("dense_w"));
    p.dense_b = matrix_from_json(j.at("dense_b"));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed model parameters: ") + e.what());
  }
  return p;
}

ModelParams init_params(const EncoderSpec& spec, const Hyper& hyper, std::uint64_t seed) {
  hyper.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
    return m;
  };

  ModelParams p;
  p.hyper = hyper;
  for (const auto& f : spec.categorical) {
    const auto rows = static_cast<Eigen::Index>(f.vocab_size() + 1);
    p.embeddings.push_back(uniform(rows, static_cast<Eigen::Index>(f.embedding_dim), static_cast<double>(rows)));
  }
  p.numeric_channels = spec.numeric.size();

  const Eigen::Index H = hyper.hidden;
  const int dirs = hyper.bidirectional ? 2 : 1;
  auto in_width = static_cast<Eigen::Index>(spec.input_width());
  for (int l = 0; l < hyper.layers; ++l) {
    auto& layer = p.lstm.emplace_back();
    for (int d = 0; d < dirs; ++d) {
      LstmWeights w;
      w.W = uniform(in_width, 4 * H, static_cast<double>(in_width));
      w.U = uniform(H, 4 * H, static_cast<double>(H));
      w.b = Matrix::Zero(1, 4 * H);
      w.b.middleCols(H, H).setOnes();
      layer.push_back(std::move(w));
    }
    in_width = H * dirs;
  }
  p.dense_w = uniform(in_width, 1, static_cast<double>(in_width));
  p.dense_b = Matrix::Zero(1, 1);
  return p;
}

std::vector<Var> bind(Tape& tape, const ModelParams& params, bool trainable) {
  std::vector<Var> out;
  for (const Matrix* m : params.tensors()) out.push_back(trainable ? tape.parameter(*m) : tape.constant(*m));
  return out;
}

namespace {

Var dropout(Tape& tape, Var x, double rate, std::mt19937_64& rng) {
  const Matrix& v = tape.value(x);
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(v.rows(), v.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < mask.cols(); ++c)
    for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(rng) ? scale : 0.0;
  return tape.mul(x, tape.constant(std::move(mask)));
}

}  // namespace

Var forward(Tape& tape, const ModelParams& params, const std::vector<Var>& bound,
            std::span<const EncodedPrefix* const> batch, bool training, std::mt19937_64& rng) {
  if (batch.empty()) throw ShapeError("forward: empty batch");
  if (bound.size() != params.tensors().size()) throw ShapeError("forward: parameter bindings do not match model");
  const std::size_t n_cat = params.embeddings.size();
  const std::size_t T = batch.front()->mask.size();
  const auto B = static_cast<Eigen::Index>(batch.size());
  for (const auto* s : batch) {
    if (s->mask.size() != T || s->cat.size() != n_cat || s->num.size() != params.numeric_channels) {
      throw ShapeError("forward: sample does not match the model's input layout");
    }
  }

  // Per-timestep inputs: embeddings of each categorical channel, then numerics.
  std::vector<Var> seq;
  std::vector<std::vector<std::uint8_t>> masks(T, std::vector<std::uint8_t>(batch.size()));
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Var> parts;
    for (std::size_t f = 0; f < n_cat; ++f) {
      std::vector<int> rows(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) rows[b] = batch[b]->cat[f][t];
      parts.push_back(tape.gather_rows(bound[f], std::move(rows)));
    }
    if (params.numeric_channels > 0) {
      Matrix num(B, static_cast<Eigen::Index>(params.numeric_channels));
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t f = 0; f < params.numeric_channels; ++f)
          num(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f)) = batch[b]->num[f][t];
      parts.push_back(tape.constant(std::move(num)));
    }
    seq.push_back(parts.size() == 1 ? parts.front() : tape.concat_cols(parts));
    for (std::size_t b = 0; b < batch.size(); ++b) masks[t][b] = batch[b]->mask[t];
  }

  const int H = params.hyper.hidden;
  const std::size_t dirs = params.hyper.bidirectional ? 2 : 1;
  std::size_t at = n_cat;
  std::vector<Var> finals;
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    std::vector<std::vector<Var>> outs(dirs, std::vector<Var>(T));
    finals.clear();
    for (std::size_t d = 0; d < dirs; ++d) {
      const Var W = bound[at], U = bound[at + 1], bias = bound[at + 2];
      at += 3;
      Var h = tape.constant(Matrix::Zero(B, H));
      Var c = h;
      for (std::size_t k = 0; k < T; ++k) {
        // The backward direction walks the padded tail first; masked steps keep
        // the zero state, so it effectively starts at the last real event.
        const std::size_t t = d == 0 ? k : T - 1 - k;
        Var z = tape.add_row(tape.add(tape.matmul(seq[t], W), tape.matmul(h, U)), bias);
        Var i = tape.sigmoid(tape.slice_cols(z, 0, H));
        Var f = tape.sigmoid(tape.slice_cols(z, H, H));
        Var g = tape.tanh(tape.slice_cols(z, 2 * H, H));
        Var o = tape.sigmoid(tape.slice_cols(z, 3 * H, H));
        Var c_new = tape.add(tape.mul(f, c), tape.mul(i, g));
        Var h_new = tape.mul(o, tape.tanh(c_new));
        c = tape.select_rows(masks[t], c_new, c);
        h = tape.select_rows(masks[t], h_new, h);
        outs[d][t] = h;
      }
      finals.push_back(h);
    }
    if (l + 1 == params.lstm.size()) break;
    for (std::size_t t = 0; t < T; ++t) {
      Var x = dirs == 1 ? outs[0][t] : tape.concat_cols({outs[0][t], outs[1][t]});
      seq[t] = training && params.hyper.dropout > 0 ? dropout(tape, x, params.hyper.dropout, rng) : x;
    }
  }

  Var rep = finals.size() == 1 ? finals.front() : tape.concat_cols(finals);
  if (training && params.hyper.dropout > 0) rep = dropout(tape, rep, params.hyper.dropout, rng);
  return tape.sigmoid(tape.add_row(tape.matmul(rep, bound[at]), bound[at + 1]));
}

std::vector<double> predict(const ModelParams& params, const std::vector<EncodedPrefix>& samples, std::size_t chunk) {
  std::vector<double> out;
  out.reserve(samples.size());
  std::mt19937_64 unused(0);
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const EncodedPrefix*> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(&samples[k]);
    Tape tape;
    auto bound = bind(tape, params, false);
    Var p = forward(tape, params, bound, batch, false, unused);
    const Matrix& v = tape.value(p);
    for (Eigen::Index r = 0; r < v.rows(); ++r) out.push_back(v(r, 0));
  }
  return out;
}

}  // namespace fairppm::nn
