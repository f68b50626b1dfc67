#include "fairppm/autodiff.hpp"

#include <string>

#include "fairppm/error.hpp"

namespace fairppm::nn {
namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

}  // namespace

Var Tape::push(Op op, std::vector<int> inputs, Matrix value) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (int i : inputs) n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(i)].requires_grad;
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw ShapeError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::constant(Matrix value) { return push(Op::leaf, {}, std::move(value)); }

Var Tape::parameter(Matrix value) {
  Var v = push(Op::leaf, {}, std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(Op::add, {a.id, b.id}, value(a) + value(b));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(Op::sub, {a.id, b.id}, value(a) - value(b));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(Op::mul, {a.id, b.id}, value(a).cwiseProduct(value(b)));
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape(value(a)) + " * " + shape(value(b)));
  }
  return push(Op::matmul, {a.id, b.id}, value(a) * value(b));
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != value(a).cols()) {
    throw ShapeError("add_row: row " + shape(r) + " does not broadcast over " + shape(value(a)));
  }
  Matrix out = value(a);
  out.rowwise() += r.row(0);
  return push(Op::add_row, {a.id, row.id}, std::move(out));
}

Var Tape::affine(Var a, double scale, double shift) {
  Matrix out = (value(a).array() * scale + shift).matrix();
  Var v = push(Op::affine, {a.id}, std::move(out));
  nodes_.back().p0 = scale;
  return v;
}

Var Tape::sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return push(Op::sigmoid, {a.id}, std::move(out));
}

Var Tape::tanh(Var a) { return push(Op::tanh, {a.id}, value(a).array().tanh().matrix()); }

Var Tape::log(Var a) { return push(Op::log, {a.id}, value(a).array().log().matrix()); }

Var Tape::exp(Var a) { return push(Op::exp, {a.id}, value(a).array().exp().matrix()); }

Var Tape::clamp(Var a, double lo, double hi) {
  Var v = push(Op::clamp, {a.id}, value(a).array().max(lo).min(hi).matrix());
  nodes_.back().p0 = lo;
  nodes_.back().p1 = hi;
  return v;
}

Var Tape::gather_rows(Var table, std::vector<int> rows) {
  const Matrix& t = value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= t.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[r]) + " outside table of " +
                       std::to_string(t.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(r)) = t.row(rows[r]);
  }
  Var v = push(Op::gather_rows, {table.id}, std::move(out));
  nodes_.back().index = std::move(rows);
  return v;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const Eigen::Index rows = value(parts.front()).rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += value(p).cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(Op::concat_cols, std::move(ids), std::move(out));
}

Var Tape::slice_cols(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > value(a).cols()) throw ShapeError("slice_cols: out of range");
  Var v = push(Op::slice_cols, {a.id}, value(a).middleCols(start, count));
  nodes_.back().index = {start, count};
  return v;
}

Var Tape::select_rows(std::vector<std::uint8_t> take_a, Var a, Var b) {
  require_same_shape(value(a), value(b), "select_rows");
  if (static_cast<Eigen::Index>(take_a.size()) != value(a).rows()) throw ShapeError("select_rows: mask length");
  Matrix out = value(b);
  for (std::size_t r = 0; r < take_a.size(); ++r) {
    if (take_a[r]) out.row(static_cast<Eigen::Index>(r)) = value(a).row(static_cast<Eigen::Index>(r));
  }
  Var v = push(Op::select_rows, {a.id, b.id}, std::move(out));
  nodes_.back().index.assign(take_a.begin(), take_a.end());
  return v;
}

Var Tape::sum(Var a) { return push(Op::sum, {a.id}, Matrix::Constant(1, 1, value(a).sum())); }

Var Tape::mean(Var a) {
  if (value(a).size() == 0) throw ShapeError("mean of an empty matrix");
  return push(Op::mean, {a.id}, Matrix::Constant(1, 1, value(a).mean()));
}

Var Tape::custom(const std::vector<Var>& inputs, Matrix value, BackwardFn backward) {
  std::vector<int> ids;
  for (Var v : inputs) {
    node(v);
    ids.push_back(v.id);
  }
  Var v = push(Op::custom, std::move(ids), std::move(value));
  nodes_.back().backward = std::move(backward);
  return v;
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeError("scalar: node is " + shape(m));
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.requires_grad) return;
  require_same_shape(n.value, g, "accumulate");
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) throw ShapeError("backward: root must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  visits_ = 0;
  nodes_[static_cast<std::size_t>(root.id)].grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0 || n.op == Op::leaf) continue;
    ++visits_;
    propagate(n);
  }
}

void Tape::propagate(const Node& n) {
  const Matrix& g = n.grad;
  auto in = [&](std::size_t k) { return Var{n.inputs[k]}; };
  auto val = [&](std::size_t k) -> const Matrix& { return nodes_[static_cast<std::size_t>(n.inputs[k])].value; };
  auto wants = [&](std::size_t k) { return nodes_[static_cast<std::size_t>(n.inputs[k])].requires_grad; };

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::add:
      accumulate(in(0), g);
      accumulate(in(1), g);
      break;
    case Op::sub:
      accumulate(in(0), g);
      if (wants(1)) accumulate(in(1), -g);
      break;
    case Op::mul:
      if (wants(0)) accumulate(in(0), g.cwiseProduct(val(1)));
      if (wants(1)) accumulate(in(1), g.cwiseProduct(val(0)));
      break;
    case Op::matmul:
      if (wants(0)) accumulate(in(0), g * val(1).transpose());
      if (wants(1)) accumulate(in(1), val(0).transpose() * g);
      break;
    case Op::add_row:
      accumulate(in(0), g);
      if (wants(1)) accumulate(in(1), g.colwise().sum());
      break;
    case Op::affine:
      accumulate(in(0), g * n.p0);
      break;
    case Op::sigmoid:
      accumulate(in(0), (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
      break;
    case Op::tanh:
      accumulate(in(0), (g.array() * (1.0 - n.value.array().square())).matrix());
      break;
    case Op::log:
      accumulate(in(0), (g.array() / val(0).array()).matrix());
      break;
    case Op::exp:
      accumulate(in(0), g.cwiseProduct(n.value));
      break;
    case Op::clamp: {
      const auto& x = val(0).array();
      accumulate(in(0), (g.array() * ((x >= n.p0) && (x <= n.p1)).cast<double>()).matrix());
      break;
    }
    case Op::gather_rows: {
      if (!wants(0)) break;
      Matrix acc = Matrix::Zero(val(0).rows(), val(0).cols());
      for (std::size_t r = 0; r < n.index.size(); ++r) acc.row(n.index[r]) += g.row(static_cast<Eigen::Index>(r));
      accumulate(in(0), acc);
      break;
    }
    case Op::concat_cols: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Eigen::Index c = val(k).cols();
        if (wants(k)) accumulate(in(k), g.middleCols(at, c));
        at += c;
      }
      break;
    }
    case Op::slice_cols: {
      Matrix acc = Matrix::Zero(val(0).rows(), val(0).cols());
      acc.middleCols(n.index[0], n.index[1]) = g;
      accumulate(in(0), acc);
      break;
    }
    case Op::select_rows: {
      Matrix ga = Matrix::Zero(g.rows(), g.cols());
      Matrix gb = Matrix::Zero(g.rows(), g.cols());
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        (n.index[r] ? ga : gb).row(row) = g.row(row);
      }
      if (wants(0)) accumulate(in(0), ga);
      if (wants(1)) accumulate(in(1), gb);
      break;
    }
    case Op::sum:
      accumulate(in(0), Matrix::Constant(val(0).rows(), val(0).cols(), g(0, 0)));
      break;
    case Op::mean:
      accumulate(in(0), Matrix::Constant(val(0).rows(), val(0).cols(), g(0, 0) / static_cast<double>(val(0).size())));
      break;
    case Op::custom:
      n.backward(*this, g);
      break;
  }
}

}  // namespace fairppm::nn
