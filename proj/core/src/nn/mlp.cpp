#include "simknot/nn/mlp.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace simknot::nn {

using nlohmann::json;

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  throw UsageError("unknown activation");
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw IoError("unknown activation name: " + s);
}

Mlp Mlp::create(const std::vector<int>& dims, Rng& rng, Activation hidden,
                Activation output) {
  if (dims.size() < 2) throw ShapeError("mlp: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw ShapeError("mlp: layer dims must be positive");
  Mlp net;
  net.layer_dims = dims;
  net.hidden_activation = hidden;
  net.output_activation = output;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(fan_out));
  }
  return net;
}

namespace {
void apply_activation(Mat& m, Activation a) {
  switch (a) {
    case Activation::Relu: m = m.cwiseMax(0.0); break;
    case Activation::Tanh: m = m.array().tanh(); break;
    case Activation::Linear: break;
  }
}
}  // namespace

Vec Mlp::forward(const Vec& input) const {
  if (input.size() != input_dim())
    throw ShapeError("mlp: input dimension mismatch (got " +
                     std::to_string(input.size()) + ", expected " +
                     std::to_string(input_dim()) + ")");
  Mat h = input.transpose();
  h = forward_batch(h);
  return h.row(0).transpose();
}

Mat Mlp::forward_batch(const Mat& rows) const {
  if (rows.cols() != input_dim())
    throw ShapeError("mlp: batch input dimension mismatch (got " +
                     std::to_string(rows.cols()) + ", expected " +
                     std::to_string(input_dim()) + ")");
  Mat h = rows;
  for (size_t l = 0; l < weights.size(); ++l) {
    Mat z = h * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    apply_activation(z, l + 1 == weights.size() ? output_activation
                                                : hidden_activation);
    h = std::move(z);
  }
  return h;
}

uint64_t Mlp::weights_checksum() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& w : weights) h = checksum(w, h);
  for (const auto& b : biases) h = checksum(b, h);
  return h;
}

MlpVars lift(Tape& t, const Mlp& net) {
  MlpVars vars;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    vars.w.push_back(t.param(net.weights[l]));
    vars.b.push_back(t.param(net.biases[l].transpose()));
  }
  return vars;
}

namespace {
Var forward_impl(Tape& t, const Mlp& net, Var x,
                 const std::function<std::pair<Var, Var>(size_t)>& layer_vars) {
  Var h = x;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    auto [w, b] = layer_vars(l);
    h = add_bias(t, matmul_nt(t, h, w), b);
    Activation a = l + 1 == net.layer_count() ? net.output_activation
                                              : net.hidden_activation;
    if (a == Activation::Relu) h = relu(t, h);
    else if (a == Activation::Tanh) h = tanh_op(t, h);
  }
  return h;
}
}  // namespace

Var forward_tape(Tape& t, const Mlp& net, const MlpVars& vars, Var x) {
  if (t.value(x).cols() != net.input_dim())
    throw ShapeError("mlp: tape input dimension mismatch");
  return forward_impl(t, net, x, [&](size_t l) {
    return std::make_pair(vars.w[l], vars.b[l]);
  });
}

Var forward_frozen(Tape& t, const Mlp& net, Var x) {
  if (t.value(x).cols() != net.input_dim())
    throw ShapeError("mlp: tape input dimension mismatch");
  return forward_impl(t, net, x, [&](size_t l) {
    return std::make_pair(t.constant(net.weights[l]),
                          t.constant(net.biases[l].transpose()));
  });
}

MlpGrads read_grads(const Tape& t, const Mlp& net, const MlpVars& vars) {
  MlpGrads g;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    // a parameter off the loss path keeps an all-zero gradient
    if (t.has_grad(vars.w[l]))
      g.w.push_back(t.grad(vars.w[l]));
    else
      g.w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    if (t.has_grad(vars.b[l])) {
      const Mat& m = t.grad(vars.b[l]);
      g.b.push_back(m.rows() == 1 ? Vec(m.row(0).transpose()) : Vec(m.col(0)));
    } else {
      g.b.push_back(Vec::Zero(net.biases[l].size()));
    }
  }
  return g;
}

void save_mlp(const Mlp& net, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["layer_dims"] = net.layer_dims;
  j["hidden_activation"] = activation_name(net.hidden_activation);
  j["output_activation"] = activation_name(net.output_activation);
  json layers = json::array();
  for (size_t l = 0; l < net.weights.size(); ++l) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i) {
      json row = json::array();
      for (Eigen::Index jj = 0; jj < net.weights[l].cols(); ++jj)
        row.push_back(net.weights[l](i, jj));
      rows.push_back(std::move(row));
    }
    json layer;
    layer["W"] = std::move(rows);
    json bias = json::array();
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
      bias.push_back(net.biases[l](i));
    layer["b"] = std::move(bias);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw IoError("unsupported checkpoint format in " + path);
  Mlp net;
  net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  net.hidden_activation = activation_from_name(j.at("hidden_activation"));
  net.output_activation = activation_from_name(j.at("output_activation"));
  for (const auto& layer : j.at("layers")) {
    const auto& rows = layer.at("W");
    Mat w(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t jj = 0; jj < rows[i].size(); ++jj)
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) =
            rows[i][jj].get<double>();
    const auto& bias = layer.at("b");
    Vec b(bias.size());
    for (size_t i = 0; i < bias.size(); ++i)
      b(static_cast<Eigen::Index>(i)) = bias[i].get<double>();
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (net.layer_dims.size() != net.weights.size() + 1)
    throw IoError("checkpoint layer structure inconsistent in " + path);
  for (size_t l = 0; l < net.weights.size(); ++l) {
    if (net.weights[l].rows() != net.layer_dims[l + 1] ||
        net.weights[l].cols() != net.layer_dims[l] ||
        net.biases[l].size() != net.layer_dims[l + 1])
      throw IoError("checkpoint weight shapes inconsistent in " + path);
  }
  return net;
}

}  // namespace simknot::nn
