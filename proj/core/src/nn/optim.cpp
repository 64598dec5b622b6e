#include "simknot/nn/optim.hpp"

#include <cmath>

namespace simknot::nn {

namespace {
void adam_impl(Mat& param, const Mat& grad, AdamState& st, double lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ShapeError("adam: parameter/gradient shape mismatch");
  if (!grad.allFinite()) throw NumericError("adam: non-finite gradient");
  if (st.first_moment.size() == 0) {
    st.first_moment = Mat::Zero(param.rows(), param.cols());
    st.second_moment = Mat::Zero(param.rows(), param.cols());
  }
  st.step_count += 1;
  st.first_moment = st.beta1 * st.first_moment + (1.0 - st.beta1) * grad;
  st.second_moment =
      st.beta2 * st.second_moment.array().matrix() +
      (1.0 - st.beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  Mat m_hat = st.first_moment / c1;
  Mat v_hat = st.second_moment / c2;
  param.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + st.epsilon);
}
}  // namespace

void adam_step(Mat& param, const Mat& grad, AdamState& state, double lr) {
  adam_impl(param, grad, state, lr);
}

void adam_step(Vec& param, const Vec& grad, AdamState& state, double lr) {
  Mat p = param;
  Mat g = grad;
  adam_impl(p, g, state, lr);
  param = p.col(0);
}

void agc_clip(Mat& grad, const Mat& param, const GradClipConfig& cfg) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    throw ShapeError("agc: gradient/parameter shape mismatch");
  if (cfg.factor <= 0.0) throw UsageError("agc: factor must be positive");
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    double wn = std::max(param.row(i).norm(), cfg.zero_norm_guard);
    double gn = grad.row(i).norm();
    double limit = cfg.factor * wn;
    if (gn > limit) grad.row(i) *= limit / gn;
  }
}

void agc_clip_vector(Vec& grad, const Vec& param, const GradClipConfig& cfg) {
  if (grad.size() != param.size())
    throw ShapeError("agc: gradient/parameter shape mismatch");
  if (cfg.factor <= 0.0) throw UsageError("agc: factor must be positive");
  double wn = std::max(param.norm(), cfg.zero_norm_guard);
  double gn = grad.norm();
  double limit = cfg.factor * wn;
  if (gn > limit) grad *= limit / gn;
}

MlpOptimizer::MlpOptimizer(const Mlp& net, double lr,
                           std::optional<GradClipConfig> clip)
    : lr_(lr), clip_(clip) {
  w_states_.resize(net.layer_count());
  b_states_.resize(net.layer_count());
}

void MlpOptimizer::apply(Mlp& net, MlpGrads& grads) {
  if (grads.w.size() != net.layer_count() || grads.b.size() != net.layer_count())
    throw ShapeError("optimizer: gradient layer count mismatch");
  for (size_t l = 0; l < net.layer_count(); ++l) {
    if (clip_) {
      agc_clip(grads.w[l], net.weights[l], *clip_);
      agc_clip_vector(grads.b[l], net.biases[l], *clip_);
    }
    adam_step(net.weights[l], grads.w[l], w_states_[l], lr_);
    adam_step(net.biases[l], grads.b[l], b_states_[l], lr_);
  }
}

}  // namespace simknot::nn
