// Copyright 2026 The dialrl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dialrl/numerics.h"

#include <cmath>
#include <sstream>

#include "dialrl/errors.h"

namespace dialrl {
namespace {

using nlohmann::json;

json MatrixToJson(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return data;
}

Eigen::MatrixXd MatrixFromJson(const json& data, int rows, int cols, const std::string& what) {
  if (!data.is_array() || static_cast<int>(data.size()) != rows * cols) {
    throw ParseError(what + ": expected " + std::to_string(rows * cols) + " entries");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = data[r * cols + c].get<double>();
  }
  return m;
}

std::vector<DenseLayer> ZeroLayers(const std::vector<int>& sizes) {
  std::vector<DenseLayer> layers;
  for (size_t l = 1; l < sizes.size(); ++l) {
    layers.push_back({Eigen::MatrixXd::Zero(sizes[l], sizes[l - 1]), Eigen::VectorXd::Zero(sizes[l])});
  }
  return layers;
}

bool SameShapes(const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b) {
  if (a.size() != b.size()) return false;
  for (size_t l = 0; l < a.size(); ++l) {
    if (a[l].weights.rows() != b[l].weights.rows() || a[l].weights.cols() != b[l].weights.cols() ||
        a[l].bias.size() != b[l].bias.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string ToString(OutputHead head) {
  switch (head) {
    case OutputHead::kLinear:
      return "linear";
    case OutputHead::kSoftmax:
      return "softmax";
    case OutputHead::kScalarLinear:
      return "scalar-linear";
  }
  return "linear";
}

OutputHead ParseOutputHead(const std::string& name) {
  if (name == "linear") return OutputHead::kLinear;
  if (name == "softmax") return OutputHead::kSoftmax;
  if (name == "scalar-linear") return OutputHead::kScalarLinear;
  throw ParseError("unknown output head '" + name + "'");
}

// ---------------------------------------------------------------------------
// GradientSet

void GradientSet::SetZero() {
  for (auto& l : layers_) {
    l.weights.setZero();
    l.bias.setZero();
  }
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (!SameShape(other)) throw ShapeError("gradient shapes differ");
  for (size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weights += other.layers_[l].weights;
    layers_[l].bias += other.layers_[l].bias;
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (auto& l : layers_) {
    l.weights *= scale;
    l.bias *= scale;
  }
  return *this;
}

double GradientSet::Dot(const GradientSet& other) const {
  if (!SameShape(other)) throw ShapeError("gradient shapes differ");
  double total = 0.0;
  for (size_t l = 0; l < layers_.size(); ++l) {
    total += layers_[l].weights.cwiseProduct(other.layers_[l].weights).sum();
    total += layers_[l].bias.dot(other.layers_[l].bias);
  }
  return total;
}

double GradientSet::SquaredNorm() const { return Dot(*this); }

bool GradientSet::SameShape(const GradientSet& other) const { return SameShapes(layers_, other.layers_); }

// ---------------------------------------------------------------------------
// FeedForwardNet

FeedForwardNet::FeedForwardNet(std::vector<int> layer_sizes, OutputHead head)
    : layer_sizes_(std::move(layer_sizes)), head_(head) {
  if (layer_sizes_.size() < 2) throw ShapeError("a network needs an input and an output layer");
  for (int n : layer_sizes_) {
    if (n <= 0) throw ShapeError("layer sizes must be positive");
  }
  if (head_ == OutputHead::kScalarLinear && layer_sizes_.back() != 1) {
    throw ShapeError("scalar-linear head requires output width 1");
  }
  layers_ = ZeroLayers(layer_sizes_);
}

void FeedForwardNet::InitGlorot(Rng& rng) {
  for (auto& l : layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = UniformReal(rng, -bound, bound);
    }
    l.bias.setZero();
  }
}

size_t FeedForwardNet::NumParams() const {
  size_t n = 0;
  for (size_t l = 1; l < layer_sizes_.size(); ++l) {
    n += static_cast<size_t>(layer_sizes_[l - 1] + 1) * layer_sizes_[l];
  }
  return n;
}

void FeedForwardNet::CheckInput(Eigen::Index rows) const {
  if (rows != layer_sizes_.front()) {
    throw ShapeError("input has " + std::to_string(rows) + " features, network expects " +
                     std::to_string(layer_sizes_.front()));
  }
}

Eigen::VectorXd Softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Eigen::VectorXd FeedForwardNet::Forward(const Eigen::VectorXd& x) const {
  CheckInput(x.size());
  Eigen::VectorXd a = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
    if (l + 1 < layers_.size()) {
      a = z.array().tanh();
    } else {
      a = std::move(z);
    }
  }
  if (head_ == OutputHead::kSoftmax) return Softmax(a);
  return a;
}

Eigen::MatrixXd FeedForwardNet::ForwardBatch(const Eigen::MatrixXd& inputs) const {
  CheckInput(inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) {
      a = z.array().tanh();
    } else {
      a = std::move(z);
    }
  }
  if (head_ == OutputHead::kSoftmax) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) a.col(c) = Softmax(a.col(c));
  }
  return a;
}

GradientSet FeedForwardNet::Backward(const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) const {
  Eigen::MatrixXd in = x;
  Eigen::MatrixXd up = upstream;
  return BackwardBatch(in, up);
}

GradientSet FeedForwardNet::BackwardBatch(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& upstream) const {
  CheckInput(inputs.rows());
  if (upstream.rows() != output_size() || upstream.cols() != inputs.cols()) {
    throw ShapeError("upstream gradient shape does not match the network outputs");
  }
  const size_t depth = layers_.size();
  std::vector<Eigen::MatrixXd> acts(depth + 1);
  acts[0] = inputs;
  for (size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = layers_[l].weights * acts[l];
    z.colwise() += layers_[l].bias;
    acts[l + 1] = (l + 1 < depth) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }

  Eigen::MatrixXd delta;
  if (head_ == OutputHead::kSoftmax) {
    delta.resize(upstream.rows(), upstream.cols());
    for (Eigen::Index c = 0; c < upstream.cols(); ++c) {
      const Eigen::VectorXd p = Softmax(acts[depth].col(c));
      const double inner = upstream.col(c).dot(p);
      delta.col(c) = p.array() * (upstream.col(c).array() - inner);
    }
  } else {
    delta = upstream;
  }

  std::vector<DenseLayer> grads(depth);
  for (size_t l = depth; l-- > 0;) {
    grads[l].weights = delta * acts[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
      delta = back.array() * (1.0 - acts[l].array().square());
    }
  }
  return GradientSet(std::move(grads));
}

GradientSet FeedForwardNet::ZeroGradient() const { return GradientSet(ZeroLayers(layer_sizes_)); }

bool FeedForwardNet::SameArchitecture(const FeedForwardNet& other) const {
  return layer_sizes_ == other.layer_sizes_ && head_ == other.head_;
}

json FeedForwardNet::ToJson() const {
  json j;
  j["format"] = "dialrl.net";
  j["version"] = 1;
  j["layer_sizes"] = layer_sizes_;
  j["head"] = ToString(head_);
  j["hidden_activation"] = "tanh";
  json params = json::array();
  for (const auto& l : layers_) {
    params.push_back({{"weights", MatrixToJson(l.weights)}, {"bias", MatrixToJson(l.bias)}});
  }
  j["params"] = std::move(params);
  return j;
}

FeedForwardNet FeedForwardNet::FromJson(const json& j) {
  if (j.value("format", "") != "dialrl.net" || j.value("version", 0) != 1) {
    throw ParseError("not a dialrl.net v1 checkpoint");
  }
  FeedForwardNet net(j.at("layer_sizes").get<std::vector<int>>(), ParseOutputHead(j.at("head").get<std::string>()));
  const auto& params = j.at("params");
  if (!params.is_array() || params.size() != net.layers_.size()) throw ParseError("params: wrong layer count");
  for (size_t l = 0; l < net.layers_.size(); ++l) {
    auto& layer = net.layers_[l];
    const std::string where = "params[" + std::to_string(l) + "]";
    layer.weights = MatrixFromJson(params[l].at("weights"), layer.weights.rows(), layer.weights.cols(),
                                   where + ".weights");
    layer.bias = MatrixFromJson(params[l].at("bias"), layer.bias.size(), 1, where + ".bias");
  }
  return net;
}

void CopyParams(const FeedForwardNet& src, FeedForwardNet& dst) {
  if (!src.SameArchitecture(dst)) throw ShapeError("CopyParams: architectures differ");
  dst.layers() = src.layers();
}

// ---------------------------------------------------------------------------
// Losses and penalties

LossResult MseLoss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target) {
  if (prediction.size() != target.size() || prediction.size() == 0) {
    throw ShapeError("MseLoss: shape mismatch");
  }
  const Eigen::VectorXd diff = prediction - target;
  const double n = static_cast<double>(diff.size());
  return {diff.squaredNorm() / n, 2.0 * diff / n, false};
}

LossResult CrossEntropyLoss(const Eigen::VectorXd& probabilities, int target, double floor) {
  if (target < 0 || target >= probabilities.size()) throw ShapeError("CrossEntropyLoss: target out of range");
  LossResult out;
  double p = probabilities(target);
  if (p < floor) {
    p = floor;
    out.clamped = true;
  }
  out.loss = -std::log(p);
  out.gradient = Eigen::VectorXd::Zero(probabilities.size());
  out.gradient(target) = -1.0 / p;
  return out;
}

PenaltyResult L2Penalty(const FeedForwardNet& net, double coefficient) {
  if (coefficient < 0.0) throw DomainError("L2 coefficient must be non-negative");
  PenaltyResult out{0.0, net.ZeroGradient()};
  for (size_t l = 0; l < net.layers().size(); ++l) {
    const auto& w = net.layers()[l].weights;
    out.penalty += coefficient * w.squaredNorm();
    out.gradient.layers()[l].weights = 2.0 * coefficient * w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adadelta

AdadeltaState::AdadeltaState(const FeedForwardNet& net, double rho, double epsilon)
    : rho_(rho), epsilon_(epsilon), sq_grad_(net.ZeroGradient()), sq_update_(net.ZeroGradient()) {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("adadelta rho must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("adadelta epsilon must be positive");
}

GradientSet AdadeltaState::Step(FeedForwardNet& net, const GradientSet& grads) {
  GradientSet params(net.layers());
  if (!grads.SameShape(params) || !sq_grad_.SameShape(params)) throw ShapeError("Adadelta: shape mismatch");
  for (size_t l = 0; l < grads.layers().size(); ++l) {
    const auto& g = grads.layers()[l];
    for (Eigen::Index r = 0; r < g.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.weights.cols(); ++c) {
        if (!std::isfinite(g.weights(r, c))) {
          throw NumericsError("non-finite gradient at layer " + std::to_string(l) + " weight (" +
                              std::to_string(r) + "," + std::to_string(c) + ")");
        }
      }
      if (!std::isfinite(g.bias(r))) {
        throw NumericsError("non-finite gradient at layer " + std::to_string(l) + " bias " + std::to_string(r));
      }
    }
  }

  GradientSet update = net.ZeroGradient();
  auto apply = [&](const auto& g, auto& eg2, auto& edx2, auto& dx, auto& theta) {
    eg2 = rho_ * eg2.array() + (1.0 - rho_) * g.array().square();
    dx = -((edx2.array() + epsilon_).sqrt() / (eg2.array() + epsilon_).sqrt()) * g.array();
    edx2 = rho_ * edx2.array() + (1.0 - rho_) * dx.array().square();
    theta += dx;
  };
  for (size_t l = 0; l < grads.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    apply(grads.layers()[l].weights, sq_grad_.layers()[l].weights, sq_update_.layers()[l].weights,
          update.layers()[l].weights, layer.weights);
    apply(grads.layers()[l].bias, sq_grad_.layers()[l].bias, sq_update_.layers()[l].bias,
          update.layers()[l].bias, layer.bias);
  }
  return update;
}

json GradientSetToJson(const GradientSet& g) {
  json out = json::array();
  for (const auto& l : g.layers()) {
    out.push_back({{"rows", l.weights.rows()},
                   {"cols", l.weights.cols()},
                   {"weights", MatrixToJson(l.weights)},
                   {"bias", MatrixToJson(l.bias)}});
  }
  return out;
}

GradientSet GradientSetFromJson(const json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j) {
    const int rows = l.at("rows").get<int>();
    const int cols = l.at("cols").get<int>();
    layers.push_back({MatrixFromJson(l.at("weights"), rows, cols, "weights"),
                      MatrixFromJson(l.at("bias"), rows, 1, "bias")});
  }
  return GradientSet(std::move(layers));
}

json AdadeltaState::ToJson() const {
  return {{"rho", rho_},
          {"epsilon", epsilon_},
          {"sq_grad", GradientSetToJson(sq_grad_)},
          {"sq_update", GradientSetToJson(sq_update_)}};
}

AdadeltaState AdadeltaState::FromJson(const json& j) {
  AdadeltaState s;
  s.rho_ = j.at("rho").get<double>();
  s.epsilon_ = j.at("epsilon").get<double>();
  s.sq_grad_ = GradientSetFromJson(j.at("sq_grad"));
  s.sq_update_ = GradientSetFromJson(j.at("sq_update"));
  return s;
}

void SaveNet(const FeedForwardNet& net, std::ostream& out) { out << net.ToJson().dump() << '\n'; }

FeedForwardNet LoadNet(std::istream& in) {
  try {
    return FeedForwardNet::FromJson(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(std::string("network checkpoint: ") + e.what());
  }
}

}  // namespace dialrl
