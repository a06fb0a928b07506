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

#ifndef DIALRL_VALUE_AGENTS_H_
#define DIALRL_VALUE_AGENTS_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "dialrl/agent.h"
#include "dialrl/numerics.h"
#include "dialrl/rng.h"
#include "json.hpp"

namespace dialrl {

// Finite FIFO experience pool. Insertion beyond capacity overwrites the
// oldest transition.
class ReplayPool {
 public:
  explicit ReplayPool(size_t capacity = 50000);

  void Store(Transition t);
  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  void Clear();

  // i = 0 is the oldest stored transition.
  const Transition& At(size_t i) const;
  // Uniform position in [0, size()).
  size_t SampleIndex(Rng& rng) const;
  // Uniform sample with replacement.
  std::vector<const Transition*> Sample(size_t n, Rng& rng) const;

 private:
  size_t capacity_;
  size_t head_ = 0;
  std::vector<Transition> items_;
};

using Batch = std::vector<const Transition*>;

struct QAgentConfig {
  std::vector<int> hidden = {130, 50};
  double gamma = 0.99;
  int batch_size = 32;
  // Target sync period in train steps.
  int tau = 1000;
  size_t capacity = 50000;
  // Training starts once the pool holds this many transitions.
  size_t warmup = 1000;
  bool double_dqn = false;
  // Action indices that exploration never draws.
  std::vector<int> excluded;
  double rho = 0.95;
  double epsilon = 1e-6;

  void Validate(int num_actions) const;
};

nlohmann::json ToJson(const QAgentConfig& cfg);
QAgentConfig QAgentConfigFromJson(const nlohmann::json& j, QAgentConfig base = {});

// With probability epsilon a uniform non-excluded action, otherwise the argmax
// of the network over all actions.
int SelectActionEGreedy(const FeedForwardNet& qnet, const Features& features, double epsilon,
                        const std::vector<int>& excluded, Rng& rng);

// r + gamma * max_a' Q(b', a'; target); r for terminal items.
Eigen::VectorXd DqnTargets(const Batch& batch, const FeedForwardNet& target, double gamma);
// r + gamma * Q(b', argmax_a Q(b', a; online); target); r for terminal items.
Eigen::VectorXd DdqnTargets(const Batch& batch, const FeedForwardNet& online, const FeedForwardNet& target,
                            double gamma);

// Packs features (or successor features) of a batch as columns.
Eigen::MatrixXd StackFeatures(const Batch& batch, bool next);

// DQN / DDQN agent over a Q-network with one linear output per action.
class QAgent : public Agent {
 public:
  QAgent(int input_size, int num_actions, QAgentConfig cfg, Rng& init_rng);

  std::string algorithm() const override { return cfg_.double_dqn ? "ddqn" : "dqn"; }
  int num_actions() const override { return online_.output_size(); }
  int SelectAction(const Features& features, double epsilon, Rng& rng) override;
  int GreedyAction(const Features& features) const override;
  void Learn(const Transition& t, int next_action, Rng& rng) override;

  // One minibatch regression step. nullopt (nothing changed) while the pool
  // holds fewer than batch_size transitions.
  std::optional<double> TrainStep(Rng& rng);
  void SyncTarget();

  const QAgentConfig& config() const { return cfg_; }
  const FeedForwardNet& online() const { return online_; }
  const FeedForwardNet& target() const { return target_; }
  FeedForwardNet& mutable_online() { return online_; }
  ReplayPool& pool() { return pool_; }
  const ReplayPool& pool() const { return pool_; }
  int64_t train_steps() const { return train_steps_; }
  std::optional<double> last_loss() const { return last_loss_; }

  // Holds online and target parameters, optimiser accumulators and counters.
  // The replay pool is not part of a checkpoint.
  nlohmann::json Checkpoint() const override;
  void Restore(const nlohmann::json& j) override;

 private:
  QAgentConfig cfg_;
  FeedForwardNet online_;
  FeedForwardNet target_;
  AdadeltaState opt_;
  ReplayPool pool_;
  int64_t train_steps_ = 0;
  std::optional<double> last_loss_;
};

}  // namespace dialrl

#endif  // DIALRL_VALUE_AGENTS_H_
