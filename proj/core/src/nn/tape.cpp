#include "simknot/nn/tape.hpp"

#include <cmath>

namespace simknot::nn {

int Tape::check(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw ShapeError("tape: invalid variable handle");
  return v.id;
}

Var Tape::constant(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), false, false, nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), true, false, nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::make(Mat value, bool requires_grad, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad, false, std::move(back)});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

void Tape::set_back(Var v, std::function<void(Tape&)> back) {
  nodes_[static_cast<size_t>(check(v))].back = std::move(back);
}

void Tape::ensure_grad(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_ready) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad_ready = true;
  }
}

Mat& Tape::grad_ref(Var v) {
  int id = check(v);
  ensure_grad(id);
  return nodes_[static_cast<size_t>(id)].grad;
}

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(check(v))];
  if (!n.grad_ready) throw ShapeError("tape: gradient not computed for this node");
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError("tape: node is not scalar");
  return m(0, 0);
}

void Tape::backward(Var loss) {
  int id = check(loss);
  const Node& ln = nodes_[static_cast<size_t>(id)];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw ShapeError("tape: backward requires a scalar loss");
  ensure_grad(id);
  nodes_[static_cast<size_t>(id)].grad(0, 0) = 1.0;
  for (int i = id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    // grad_ready means this node actually lies on a path to the loss
    if (n.requires_grad && n.grad_ready && n.back) n.back(*this);
  }
}

namespace {

bool rg(const Tape& t, Var v) { return t.requires_grad(v); }

void shape_match(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string("tape: shape mismatch in ") + what);
}

}  // namespace

Var matmul_nt(Tape& t, Var x, Var w) {
  const Mat& xv = t.value(x);
  const Mat& wv = t.value(w);
  if (xv.cols() != wv.cols())
    throw ShapeError("tape: matmul_nt inner dimension mismatch");
  bool need = rg(t, x) || rg(t, w);
  Var out = t.make(xv * wv.transpose(), need, nullptr);
  if (need)
    t.set_back(out, [x, w, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(x)) tp.grad_ref(x).noalias() += gy * tp.value(w);
      if (tp.requires_grad(w)) tp.grad_ref(w).noalias() += gy.transpose() * tp.value(x);
    });
  return out;
}

Var add_bias(Tape& t, Var x, Var b) {
  const Mat& xv = t.value(x);
  const Mat& bv = t.value(b);
  Eigen::RowVectorXd row;
  if (bv.rows() == 1)
    row = bv.row(0);
  else if (bv.cols() == 1)
    row = bv.col(0).transpose();
  else
    throw ShapeError("tape: add_bias expects a vector bias");
  if (row.size() != xv.cols()) throw ShapeError("tape: add_bias width mismatch");
  bool need = rg(t, x) || rg(t, b);
  Var out = t.make(xv.rowwise() + row, need, nullptr);
  if (need)
    t.set_back(out, [x, b, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(x)) tp.grad_ref(x) += gy;
      if (tp.requires_grad(b)) {
        Mat& gb = tp.grad_ref(b);
        Eigen::RowVectorXd colsum = gy.colwise().sum();
        if (gb.rows() == 1)
          gb += colsum;
        else
          gb += colsum.transpose();
      }
    });
  return out;
}

Var add(Tape& t, Var a, Var b) {
  shape_match(t.value(a), t.value(b), "add");
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(t.value(a) + t.value(b), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad_ref(a) += gy;
      if (tp.requires_grad(b)) tp.grad_ref(b) += gy;
    });
  return out;
}

Var sub(Tape& t, Var a, Var b) {
  shape_match(t.value(a), t.value(b), "sub");
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(t.value(a) - t.value(b), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad_ref(a) += gy;
      if (tp.requires_grad(b)) tp.grad_ref(b) -= gy;
    });
  return out;
}

Var mul(Tape& t, Var a, Var b) {
  shape_match(t.value(a), t.value(b), "mul");
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(t.value(a).cwiseProduct(t.value(b)), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(a)) tp.grad_ref(a) += gy.cwiseProduct(tp.value(b));
      if (tp.requires_grad(b)) tp.grad_ref(b) += gy.cwiseProduct(tp.value(a));
    });
  return out;
}

Var mul_scalar(Tape& t, Var x, Var s) {
  const Mat& sv = t.value(s);
  if (sv.rows() != 1 || sv.cols() != 1)
    throw ShapeError("tape: mul_scalar expects a 1x1 scalar node");
  bool need = rg(t, x) || rg(t, s);
  Var out = t.make(t.value(x) * sv(0, 0), need, nullptr);
  if (need)
    t.set_back(out, [x, s, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      if (tp.requires_grad(x)) tp.grad_ref(x) += gy * tp.value(s)(0, 0);
      if (tp.requires_grad(s))
        tp.grad_ref(s)(0, 0) += gy.cwiseProduct(tp.value(x)).sum();
    });
  return out;
}

Var scale(Tape& t, Var x, double c) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x) * c, need, nullptr);
  if (need)
    t.set_back(out, [x, c, out](Tape& tp) { tp.grad_ref(x) += tp.grad(out) * c; });
  return out;
}

Var add_const(Tape& t, Var x, double c) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).array() + c, need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) { tp.grad_ref(x) += tp.grad(out); });
  return out;
}

Var mul_const(Tape& t, Var x, const Mat& c) {
  shape_match(t.value(x), c, "mul_const");
  bool need = rg(t, x);
  Var out = t.make(t.value(x).cwiseProduct(c), need, nullptr);
  if (need) {
    Mat cc = c;
    t.set_back(out, [x, out, cc](Tape& tp) {
      tp.grad_ref(x) += tp.grad(out).cwiseProduct(cc);
    });
  }
  return out;
}

Var relu(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).cwiseMax(0.0), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      const Mat& xv = tp.value(x);
      const Mat& gy = tp.grad(out);
      tp.grad_ref(x) += (xv.array() > 0.0).cast<double>().matrix().cwiseProduct(gy);
    });
  return out;
}

Var tanh_op(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).array().tanh(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      const Mat& yv = tp.value(out);
      tp.grad_ref(x).array() += tp.grad(out).array() * (1.0 - yv.array().square());
    });
  return out;
}

Var exp_op(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).array().exp(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      tp.grad_ref(x).array() += tp.grad(out).array() * tp.value(out).array();
    });
  return out;
}

Var log_op(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).array().log(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      tp.grad_ref(x).array() += tp.grad(out).array() / tp.value(x).array();
    });
  return out;
}

Var square(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).array().square(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      tp.grad_ref(x).array() += tp.grad(out).array() * 2.0 * tp.value(x).array();
    });
  return out;
}

Var clamp_op(Tape& t, Var x, double lo, double hi) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).cwiseMax(lo).cwiseMin(hi), need, nullptr);
  if (need)
    t.set_back(out, [x, out, lo, hi](Tape& tp) {
      const Mat& xv = tp.value(x);
      Mat inside = ((xv.array() >= lo) && (xv.array() <= hi)).cast<double>();
      tp.grad_ref(x) += tp.grad(out).cwiseProduct(inside);
    });
  return out;
}

Var min_op(Tape& t, Var a, Var b) {
  shape_match(t.value(a), t.value(b), "min_op");
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(t.value(a).cwiseMin(t.value(b)), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& av = tp.value(a);
      const Mat& bv = tp.value(b);
      const Mat& gy = tp.grad(out);
      Mat pick_a = (av.array() <= bv.array()).cast<double>();
      if (tp.requires_grad(a)) tp.grad_ref(a) += gy.cwiseProduct(pick_a);
      if (tp.requires_grad(b))
        tp.grad_ref(b) += gy.cwiseProduct(Mat(1.0 - pick_a.array()));
    });
  return out;
}

Var sum_all(Tape& t, Var x) {
  bool need = rg(t, x);
  Mat y(1, 1);
  y(0, 0) = t.value(x).sum();
  Var out = t.make(std::move(y), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      tp.grad_ref(x).array() += tp.grad(out)(0, 0);
    });
  return out;
}

Var mean_all(Tape& t, Var x) {
  double n = static_cast<double>(t.value(x).size());
  if (n == 0) throw ShapeError("tape: mean of empty node");
  return scale(t, sum_all(t, x), 1.0 / n);
}

Var row_sum(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).rowwise().sum(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      tp.grad_ref(x).colwise() += gy.col(0);
    });
  return out;
}

Var row_norm(Tape& t, Var x) {
  bool need = rg(t, x);
  Var out = t.make(t.value(x).rowwise().norm(), need, nullptr);
  if (need)
    t.set_back(out, [x, out](Tape& tp) {
      const Mat& xv = tp.value(x);
      const Mat& nv = tp.value(out);
      const Mat& gy = tp.grad(out);
      Mat& gx = tp.grad_ref(x);
      for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        double n = nv(i, 0);
        if (n > 0.0) gx.row(i) += (gy(i, 0) / n) * xv.row(i);
      }
    });
  return out;
}

Var row_cosine(Tape& t, Var a, Var b) {
  shape_match(t.value(a), t.value(b), "row_cosine");
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  Eigen::Index n = av.rows();
  Mat y(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double na = av.row(i).norm(), nb = bv.row(i).norm();
    y(i, 0) = (na == 0.0 || nb == 0.0) ? 0.0 : av.row(i).dot(bv.row(i)) / (na * nb);
  }
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(std::move(y), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& av = tp.value(a);
      const Mat& bv = tp.value(b);
      const Mat& cv = tp.value(out);
      const Mat& gy = tp.grad(out);
      bool ga = tp.requires_grad(a), gb = tp.requires_grad(b);
      for (Eigen::Index i = 0; i < av.rows(); ++i) {
        double na = av.row(i).norm(), nb = bv.row(i).norm();
        if (na == 0.0 || nb == 0.0) continue;  // guarded pair: zero gradient
        double c = cv(i, 0), g = gy(i, 0);
        if (ga)
          tp.grad_ref(a).row(i) +=
              g * (bv.row(i) / (na * nb) - c * av.row(i) / (na * na));
        if (gb)
          tp.grad_ref(b).row(i) +=
              g * (av.row(i) / (na * nb) - c * bv.row(i) / (nb * nb));
      }
    });
  return out;
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.rows() != bv.rows()) throw ShapeError("tape: concat_cols row mismatch");
  Mat y(av.rows(), av.cols() + bv.cols());
  y << av, bv;
  bool need = rg(t, a) || rg(t, b);
  Var out = t.make(std::move(y), need, nullptr);
  if (need)
    t.set_back(out, [a, b, out](Tape& tp) {
      const Mat& gy = tp.grad(out);
      Eigen::Index ca = tp.value(a).cols();
      if (tp.requires_grad(a)) tp.grad_ref(a) += gy.leftCols(ca);
      if (tp.requires_grad(b)) tp.grad_ref(b) += gy.rightCols(gy.cols() - ca);
    });
  return out;
}

Var slice_cols(Tape& t, Var x, int begin, int len) {
  const Mat& xv = t.value(x);
  if (begin < 0 || len < 0 || begin + len > xv.cols())
    throw ShapeError("tape: slice_cols out of range");
  bool need = rg(t, x);
  Var out = t.make(xv.middleCols(begin, len), need, nullptr);
  if (need)
    t.set_back(out, [x, out, begin, len](Tape& tp) {
      tp.grad_ref(x).middleCols(begin, len) += tp.grad(out);
    });
  return out;
}

Var mse_rows(Tape& t, Var a, Var b) {
  Var d = sub(t, a, b);
  Var sq = square(t, d);
  Var per_row = row_sum(t, sq);
  return mean_all(t, per_row);
}

}  // namespace simknot::nn
