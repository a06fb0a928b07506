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

#include "dialrl/value_agents.h"

#include <cmath>

#include "dialrl/errors.h"

namespace dialrl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ReplayPool

ReplayPool::ReplayPool(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayPool::Store(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

void ReplayPool::Clear() {
  items_.clear();
  head_ = 0;
}

const Transition& ReplayPool::At(size_t i) const {
  if (i >= items_.size()) throw DomainError("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

size_t ReplayPool::SampleIndex(Rng& rng) const {
  if (items_.empty()) throw UsageError("sampling from an empty replay pool");
  return std::uniform_int_distribution<size_t>(0, items_.size() - 1)(rng);
}

std::vector<const Transition*> ReplayPool::Sample(size_t n, Rng& rng) const {
  std::vector<const Transition*> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(&items_[SampleIndex(rng)]);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

void QAgentConfig::Validate(int num_actions) const {
  if (hidden.empty()) throw ConfigError("agent.hidden needs at least one layer");
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("agent.hidden widths must be positive");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma outside [0,1]");
  if (batch_size <= 0) throw ConfigError("agent.batch_size must be positive");
  if (tau < 1) throw ConfigError("agent.tau must be at least 1");
  if (capacity == 0) throw ConfigError("agent.capacity must be positive");
  if (capacity < static_cast<size_t>(batch_size)) throw ConfigError("agent.capacity smaller than agent.batch_size");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("agent.rho outside (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("agent.epsilon must be positive");
  ValidateExcluded(num_actions, excluded);
}

json ToJson(const QAgentConfig& cfg) {
  return {{"hidden", cfg.hidden},     {"gamma", cfg.gamma},       {"batch_size", cfg.batch_size},
          {"tau", cfg.tau},           {"capacity", cfg.capacity}, {"warmup", cfg.warmup},
          {"double_dqn", cfg.double_dqn}, {"excluded", cfg.excluded}, {"rho", cfg.rho},
          {"epsilon", cfg.epsilon}};
}

QAgentConfig QAgentConfigFromJson(const json& j, QAgentConfig c) {
  c.hidden = j.value("hidden", c.hidden);
  c.gamma = j.value("gamma", c.gamma);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tau = j.value("tau", c.tau);
  c.capacity = j.value("capacity", c.capacity);
  c.warmup = j.value("warmup", c.warmup);
  c.double_dqn = j.value("double_dqn", c.double_dqn);
  c.excluded = j.value("excluded", c.excluded);
  c.rho = j.value("rho", c.rho);
  c.epsilon = j.value("epsilon", c.epsilon);
  return c;
}

// ---------------------------------------------------------------------------
// Targets and action selection

int SelectActionEGreedy(const FeedForwardNet& qnet, const Features& features, double epsilon,
                        const std::vector<int>& excluded, Rng& rng) {
  if (epsilon > 0.0 && Bernoulli(rng, epsilon)) {
    return UniformAllowedAction(qnet.output_size(), excluded, rng);
  }
  return Argmax(qnet.Forward(features));
}

Eigen::MatrixXd StackFeatures(const Batch& batch, bool next) {
  if (batch.empty()) throw UsageError("empty batch");
  const auto rows = (next ? batch[0]->next_features : batch[0]->features).size();
  Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(batch.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    const Features& f = next ? batch[i]->next_features : batch[i]->features;
    if (f.size() != rows) throw ShapeError("batch mixes feature sizes");
    out.col(static_cast<Eigen::Index>(i)) = f;
  }
  return out;
}

Eigen::VectorXd DqnTargets(const Batch& batch, const FeedForwardNet& target, double gamma) {
  const Eigen::MatrixXd q_next = target.ForwardBatch(StackFeatures(batch, true));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y(c) = batch[i]->reward;
    if (!batch[i]->terminal) y(c) += gamma * q_next.col(c).maxCoeff();
  }
  return y;
}

Eigen::VectorXd DdqnTargets(const Batch& batch, const FeedForwardNet& online, const FeedForwardNet& target,
                            double gamma) {
  if (!online.SameArchitecture(target)) throw ShapeError("online and target networks differ in shape");
  const Eigen::MatrixXd next = StackFeatures(batch, true);
  const Eigen::MatrixXd q_online = online.ForwardBatch(next);
  const Eigen::MatrixXd q_target = target.ForwardBatch(next);
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y(c) = batch[i]->reward;
    if (!batch[i]->terminal) y(c) += gamma * q_target(Argmax(q_online.col(c)), c);
  }
  return y;
}

// ---------------------------------------------------------------------------
// QAgent

QAgent::QAgent(int input_size, int num_actions, QAgentConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)), pool_(cfg_.capacity) {
  cfg_.Validate(num_actions);
  std::vector<int> sizes = {input_size};
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(num_actions);
  online_ = FeedForwardNet(sizes, OutputHead::kLinear);
  online_.InitGlorot(init_rng);
  target_ = online_;
  opt_ = AdadeltaState(online_, cfg_.rho, cfg_.epsilon);
}

int QAgent::SelectAction(const Features& features, double epsilon, Rng& rng) {
  return SelectActionEGreedy(online_, features, epsilon, cfg_.excluded, rng);
}

int QAgent::GreedyAction(const Features& features) const { return Argmax(online_.Forward(features)); }

void QAgent::Learn(const Transition& t, int /*next_action*/, Rng& rng) {
  pool_.Store(t);
  if (pool_.size() >= cfg_.warmup) TrainStep(rng);
}

std::optional<double> QAgent::TrainStep(Rng& rng) {
  if (pool_.size() < static_cast<size_t>(cfg_.batch_size)) return std::nullopt;
  const Batch batch = pool_.Sample(static_cast<size_t>(cfg_.batch_size), rng);
  const Eigen::VectorXd y =
      cfg_.double_dqn ? DdqnTargets(batch, online_, target_, cfg_.gamma) : DqnTargets(batch, target_, cfg_.gamma);
  const Eigen::MatrixXd inputs = StackFeatures(batch, false);
  const Eigen::MatrixXd q = online_.ForwardBatch(inputs);
  const double n = static_cast<double>(batch.size());
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const int a = batch[static_cast<size_t>(i)]->action;
    const double diff = q(a, i) - y(i);
    loss += diff * diff / n;
    upstream(a, i) = 2.0 * diff / n;
  }
  if (!std::isfinite(loss)) throw NumericsError("non-finite Q regression loss at train step " +
                                                std::to_string(train_steps_));
  opt_.Step(online_, online_.BackwardBatch(inputs, upstream));
  ++train_steps_;
  if (train_steps_ % cfg_.tau == 0) SyncTarget();
  last_loss_ = loss;
  return loss;
}

void QAgent::SyncTarget() { CopyParams(online_, target_); }

json QAgent::Checkpoint() const {
  return {{"schema", "dialrl.qagent"},
          {"version", 1},
          {"algorithm", algorithm()},
          {"config", ToJson(cfg_)},
          {"online", online_.ToJson()},
          {"target", target_.ToJson()},
          {"optimizer", opt_.ToJson()},
          {"train_steps", train_steps_},
          {"layout", layout_}};
}

void QAgent::Restore(const json& j) {
  if (j.value("schema", "") != "dialrl.qagent") throw ParseError("not a dialrl.qagent checkpoint");
  const auto layout = j.value("layout", std::vector<std::string>{});
  if (!layout_.empty()) CheckLayout(layout_, layout, "checkpoint");
  FeedForwardNet online = FeedForwardNet::FromJson(j.at("online"));
  FeedForwardNet target = FeedForwardNet::FromJson(j.at("target"));
  if (!online.SameArchitecture(online_) || !target.SameArchitecture(target_)) {
    throw ShapeError("checkpoint network shape differs from the configured agent");
  }
  online_ = std::move(online);
  target_ = std::move(target);
  opt_ = AdadeltaState::FromJson(j.at("optimizer"));
  train_steps_ = j.at("train_steps").get<int64_t>();
  layout_ = layout;
}

}  // namespace dialrl
