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

#ifndef DIALRL_NUMERICS_H_
#define DIALRL_NUMERICS_H_

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dialrl/rng.h"
#include "json.hpp"

namespace dialrl {

using Features = Eigen::VectorXd;

enum class OutputHead { kLinear, kSoftmax, kScalarLinear };

std::string ToString(OutputHead head);
OutputHead ParseOutputHead(const std::string& name);

// Weights are n_out x n_in so that a layer maps x -> W x + b.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

// Partial derivatives of a scalar objective, one entry per DenseLayer.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  void SetZero();
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);
  // Sum over all entries of this .* other.
  double Dot(const GradientSet& other) const;
  double SquaredNorm() const;
  bool SameShape(const GradientSet& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

// Fully connected network with tanh hidden layers. layer_sizes holds the input
// width, the hidden widths and the output width. A scalar-linear head must
// have output width 1.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  FeedForwardNet(std::vector<int> layer_sizes, OutputHead head);

  // Uniform in +-sqrt(6 / (n_in + n_out)), zero biases.
  void InitGlorot(Rng& rng);

  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  OutputHead head() const { return head_; }
  size_t NumParams() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  // Columns of `inputs` are samples; returns one output column per sample.
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& inputs) const;
  double Scalar(const Eigen::VectorXd& x) const { return Forward(x)(0); }

  // Gradient of sum_k upstream_k * output_k with respect to every parameter;
  // `upstream` is the derivative of the objective at the network outputs (the
  // probabilities for a softmax head).
  GradientSet Backward(const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) const;
  // Summed over the columns of inputs / upstream.
  GradientSet BackwardBatch(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& upstream) const;

  GradientSet ZeroGradient() const;
  bool SameArchitecture(const FeedForwardNet& other) const;

  nlohmann::json ToJson() const;
  static FeedForwardNet FromJson(const nlohmann::json& j);

 private:
  void CheckInput(Eigen::Index rows) const;

  std::vector<int> layer_sizes_;
  OutputHead head_ = OutputHead::kLinear;
  std::vector<DenseLayer> layers_;
};

// Copy every parameter of src into dst. Throws ShapeError on mismatch.
void CopyParams(const FeedForwardNet& src, FeedForwardNet& dst);

// Column-wise softmax, stable for arbitrary finite inputs.
Eigen::VectorXd Softmax(const Eigen::VectorXd& logits);

struct LossResult {
  double loss = 0.0;
  // Derivative of the loss with respect to the prediction.
  Eigen::VectorXd gradient;
  // True when a target probability was clamped to the floor.
  bool clamped = false;
};

// Mean over entries of (prediction - target)^2.
LossResult MseLoss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);
// -log p[target]; p[target] is floored at `floor` and the clamp reported.
LossResult CrossEntropyLoss(const Eigen::VectorXd& probabilities, int target, double floor = 1e-6);

struct PenaltyResult {
  double penalty = 0.0;
  GradientSet gradient;
};

// coefficient * sum of squared weights; biases are not penalized.
PenaltyResult L2Penalty(const FeedForwardNet& net, double coefficient);

// Adadelta with per-parameter accumulators of squared gradients and squared
// updates. There is no global learning rate.
class AdadeltaState {
 public:
  AdadeltaState() = default;
  AdadeltaState(const FeedForwardNet& net, double rho = 0.95, double epsilon = 1e-6);

  double rho() const { return rho_; }
  double epsilon() const { return epsilon_; }
  const GradientSet& sq_grad() const { return sq_grad_; }
  const GradientSet& sq_update() const { return sq_update_; }

  // Applies one step in place and returns the update that was added to the
  // parameters. A non-finite gradient entry rejects the whole step with a
  // NumericsError that names its location; nothing is modified in that case.
  GradientSet Step(FeedForwardNet& net, const GradientSet& grads);

  nlohmann::json ToJson() const;
  static AdadeltaState FromJson(const nlohmann::json& j);

 private:
  double rho_ = 0.95;
  double epsilon_ = 1e-6;
  GradientSet sq_grad_;
  GradientSet sq_update_;
};

void SaveNet(const FeedForwardNet& net, std::ostream& out);
FeedForwardNet LoadNet(std::istream& in);

nlohmann::json GradientSetToJson(const GradientSet& g);
GradientSet GradientSetFromJson(const nlohmann::json& j);

}  // namespace dialrl

#endif  // DIALRL_NUMERICS_H_
