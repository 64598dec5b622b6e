#pragma once

#include "simknot/common.hpp"
#include "simknot/nn/tape.hpp"

#include <string>
#include <vector>

namespace simknot::nn {

enum class Activation { Relu, Tanh, Linear };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

// Plain fully connected network. Weights are (out x in) per layer, hidden
// activation applied after every layer except the last.
struct Mlp {
  std::vector<int> layer_dims;
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Activation hidden_activation = Activation::Relu;
  Activation output_activation = Activation::Linear;

  static Mlp create(const std::vector<int>& dims, Rng& rng,
                    Activation hidden = Activation::Relu,
                    Activation output = Activation::Linear);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  size_t layer_count() const { return weights.size(); }

  Vec forward(const Vec& input) const;
  Mat forward_batch(const Mat& rows) const;  // rows: B x input_dim

  uint64_t weights_checksum() const;
};

// Parameter handles for one network lifted onto a tape for a training step.
struct MlpVars {
  std::vector<Var> w;
  std::vector<Var> b;
};

struct MlpGrads {
  std::vector<Mat> w;
  std::vector<Vec> b;
};

MlpVars lift(Tape& t, const Mlp& net);
Var forward_tape(Tape& t, const Mlp& net, const MlpVars& vars, Var x);
// Convenience for frozen networks: runs the batch through the net as a
// constant (no parameter gradients, no graph inside the net).
Var forward_frozen(Tape& t, const Mlp& net, Var x);
MlpGrads read_grads(const Tape& t, const Mlp& net, const MlpVars& vars);

void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace simknot::nn
