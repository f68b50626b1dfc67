#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace fairppm::nn {

using Matrix = Eigen::MatrixXd;

// Handle to a node on a Tape. Only meaningful together with the tape that created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;
// Backward rule of a custom node: receives the node's output adjoint and
// accumulates into its inputs via Tape::accumulate.
using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

// Append-only record of matrix-valued operations for reverse-mode
// differentiation. Insertion order is a topological order, so backward()
// walks the nodes once in reverse.
class Tape {
 public:
  Var constant(Matrix value);
  Var parameter(Matrix value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcasts a 1 x k row over the rows of a
  Var affine(Var a, double scale, double shift);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var clamp(Var a, double lo, double hi);
  Var gather_rows(Var table, std::vector<int> rows);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  // Row r of the result is row r of `a` where take_a[r] is set, else of `b`.
  Var select_rows(std::vector<std::uint8_t> take_a, Var a, Var b);
  Var sum(Var a);
  Var mean(Var a);
  Var custom(const std::vector<Var>& inputs, Matrix value, BackwardFn backward);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  // Adjoint after backward(); zeros for nodes the root does not depend on.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const;

  void backward(Var root);
  void accumulate(Var v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }
  // Number of node backward rules executed by the last backward() call.
  std::size_t backward_visits() const { return visits_; }

 private:
  enum class Op : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    matmul,
    add_row,
    affine,
    sigmoid,
    tanh,
    log,
    exp,
    clamp,
    gather_rows,
    concat_cols,
    slice_cols,
    select_rows,
    sum,
    mean,
    custom
  };

  struct Node {
    Op op = Op::leaf;
    std::vector<int> inputs;
    Matrix value;
    Matrix grad;  // empty until something flows in
    double p0 = 0.0;
    double p1 = 0.0;
    std::vector<int> index;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Op op, std::vector<int> inputs, Matrix value);
  const Node& node(Var v) const;
  void propagate(const Node& n);

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace fairppm::nn
