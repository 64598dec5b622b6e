#pragma once

#include "simknot/common.hpp"

#include <functional>
#include <vector>

namespace simknot::nn {

// Reverse-mode autodiff over dense double matrices. Nodes are created in
// forward order; backward() walks them in reverse. Row dimension is the
// batch wherever a batch exists.
class Tape;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Var constant(Mat v);
  Var param(Mat v);  // leaf with gradient tracking

  const Mat& value(Var v) const { return nodes_[check(v)].value; }
  const Mat& grad(Var v) const;
  bool has_grad(Var v) const { return nodes_[check(v)].grad_ready; }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  double scalar(Var v) const;  // value of a 1x1 node

  // Seeds d(loss)/d(loss)=1 and accumulates gradients into every tracked
  // ancestor. loss must be 1x1.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

  // --- internal plumbing used by the op library ---
  Var make(Mat value, bool requires_grad, std::function<void(Tape&)> back);
  void set_back(Var v, std::function<void(Tape&)> back);
  Mat& grad_ref(Var v);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::function<void(Tape&)> back;
  };

  int check(Var v) const;
  void ensure_grad(int id);

  std::vector<Node> nodes_;
};

// ---- op library ----
// y = x * w^T  (x: BxI, w: OxI -> y: BxO)
Var matmul_nt(Tape& t, Var x, Var w);
// y = x + repeated row b (b: 1xO or Ox1)
Var add_bias(Tape& t, Var x, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);            // elementwise, same shape
Var mul_scalar(Tape& t, Var x, Var s);     // s is 1x1, broadcast
Var scale(Tape& t, Var x, double c);
Var add_const(Tape& t, Var x, double c);
Var mul_const(Tape& t, Var x, const Mat& c);  // elementwise by a constant
Var relu(Tape& t, Var x);
Var tanh_op(Tape& t, Var x);
Var exp_op(Tape& t, Var x);
Var log_op(Tape& t, Var x);
Var square(Tape& t, Var x);
// clamp with straight-through gradient inside the interval, zero outside
Var clamp_op(Tape& t, Var x, double lo, double hi);
Var min_op(Tape& t, Var a, Var b);  // elementwise; ties route gradient to a
Var sum_all(Tape& t, Var x);        // 1x1
Var mean_all(Tape& t, Var x);       // 1x1
Var row_sum(Tape& t, Var x);        // Bx1
// Euclidean norm per row, Bx1; zero rows get zero gradient
Var row_norm(Tape& t, Var x);
// cosine similarity per row, Bx1; rows where either side has zero norm
// produce value 0 with zero gradient
Var row_cosine(Tape& t, Var a, Var b);
Var concat_cols(Tape& t, Var a, Var b);
Var slice_cols(Tape& t, Var x, int begin, int len);
// mean over rows of the squared row-norm of (a - b)
Var mse_rows(Tape& t, Var a, Var b);

}  // namespace simknot::nn
