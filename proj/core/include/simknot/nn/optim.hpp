#pragma once

#include "simknot/common.hpp"
#include "simknot/nn/mlp.hpp"

#include <optional>

namespace simknot::nn {

struct AdamState {
  Mat first_moment;
  Mat second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam update in place. Rejects non-finite gradients.
void adam_step(Mat& param, const Mat& grad, AdamState& state, double lr);
void adam_step(Vec& param, const Vec& grad, AdamState& state, double lr);

struct GradClipConfig {
  double factor = 0.01;
  double zero_norm_guard = 1e-3;
};

// Adaptive gradient clipping: a unit is one output row of a weight matrix,
// or a whole bias vector. If ||g|| / max(||w||, guard) > factor the gradient
// is rescaled to norm factor * max(||w||, guard).
void agc_clip(Mat& grad, const Mat& param, const GradClipConfig& cfg);
void agc_clip_vector(Vec& grad, const Vec& param, const GradClipConfig& cfg);

// Per-network Adam (one state per weight/bias tensor) with optional AGC.
class MlpOptimizer {
 public:
  MlpOptimizer() = default;
  MlpOptimizer(const Mlp& net, double lr,
               std::optional<GradClipConfig> clip = std::nullopt);

  void apply(Mlp& net, MlpGrads& grads);
  double lr() const { return lr_; }

  std::vector<AdamState>& weight_states() { return w_states_; }
  std::vector<AdamState>& bias_states() { return b_states_; }

 private:
  double lr_ = 1e-3;
  std::optional<GradClipConfig> clip_;
  std::vector<AdamState> w_states_;
  std::vector<AdamState> b_states_;
};

}  // namespace simknot::nn
