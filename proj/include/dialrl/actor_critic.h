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

#ifndef DIALRL_ACTOR_CRITIC_H_
#define DIALRL_ACTOR_CRITIC_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dialrl/agent.h"
#include "dialrl/numerics.h"
#include "dialrl/rng.h"
#include "dialrl/value_agents.h"
#include "json.hpp"

namespace dialrl {

struct A2CConfig {
  std::vector<int> policy_hidden = {130, 50};
  std::vector<int> value_hidden = {130, 50};
  double gamma = 0.99;
  // Coefficient of the squared-weight penalty on the policy network.
  double l2 = 1e-3;
  int batch_size = 32;
  int tau = 1000;
  size_t capacity = 50000;
  // Value replay and policy updates start once the pool holds this many
  // transitions.
  size_t warmup = 1000;
  std::vector<int> excluded;
  double rho = 0.95;
  // Adadelta epsilon of the value network.
  double epsilon = 1e-6;
  // Adadelta epsilon of the policy network. Adadelta step sizes scale with
  // sqrt(epsilon), so this sets the actor's speed relative to the critic.
  double policy_epsilon = 1e-6;
  // Scale each policy step by pi(a|b) / mu(a|b), where mu is the
  // epsilon-mixed behaviour distribution that actually chose a.
  bool importance_weighting = true;

  void Validate(int num_actions) const;
};

nlohmann::json ToJson(const A2CConfig& cfg);
A2CConfig A2CConfigFromJson(const nlohmann::json& j, A2CConfig base = {});

// With probability epsilon a uniform non-excluded action, otherwise a sample
// from pi(. | b).
int SelectActionPolicy(const FeedForwardNet& policy, const Features& features, double epsilon,
                       const std::vector<int>& excluded, Rng& rng);

// delta = r + gamma V(b') - V(b), or r - V(b) for a terminal transition.
double TdAdvantage(const FeedForwardNet& value, double reward, const Features& b, const Features& next,
                   bool terminal, double gamma);
double TdAdvantage(const FeedForwardNet& value, const Transition& t, double gamma);

// pi(a|b) / mu(a|b) for mu = epsilon * uniform(non-excluded) + (1 - epsilon) * pi.
double BehaviourRatio(const Eigen::VectorXd& pi, int action, double epsilon, const std::vector<int>& excluded);

// Gradient of log pi(a | b) with respect to the policy parameters.
GradientSet LogPolicyGradient(const FeedForwardNet& policy, const Features& b, int action);

// Descent direction of -delta log pi(a | b) + l2 |W|^2.
GradientSet PolicyObjectiveGradient(const FeedForwardNet& policy, const Features& b, int action, double delta,
                                    double l2);

// One Adadelta step along PolicyObjectiveGradient; returns the applied
// update. A non-finite delta is rejected with NumericsError before anything
// changes.
GradientSet PolicyGradientStep(FeedForwardNet& policy, AdadeltaState& opt, const Features& b, int action,
                               double delta, double l2);

// r + gamma V(b'; target), r for terminal items.
Eigen::VectorXd ValueTargets(const Batch& batch, const FeedForwardNet& target, double gamma);

// Mean cross-entropy plus L2 over the batch and its gradient.
struct SupervisedLoss {
  double loss = 0.0;
  GradientSet gradient;
};
SupervisedLoss SupervisedObjective(const FeedForwardNet& policy, const std::vector<const SupervisedPair*>& batch,
                                   double l2);

// Cross-entropy step on a batch; returns the mean batch loss before the step.
double SupervisedStep(FeedForwardNet& policy, AdadeltaState& opt, const std::vector<const SupervisedPair*>& batch,
                      double l2);

struct PretrainConfig {
  bool supervised = true;
  bool batch_rl = true;
  int epochs = 20;
  int batch_size = 32;
  double holdout_frac = 0.1;
  // Value regression passes over the corpus transitions.
  int sweeps = 10;

  void Validate() const;
};

nlohmann::json ToJson(const PretrainConfig& cfg);
PretrainConfig PretrainConfigFromJson(const nlohmann::json& j, PretrainConfig base = {});

struct PretrainReport {
  bool skipped = false;
  std::string warning;
  int train_pairs = 0;
  int heldout_pairs = 0;
  std::vector<double> epoch_loss;
  // Agreement of argmax pi with the demonstrated action on the held-out pairs.
  double heldout_accuracy = 0.0;
  int64_t value_steps = 0;
  double final_value_loss = 0.0;

  std::vector<std::string> StageLog() const;
};

// Softmax policy network plus scalar value network with replay and a target
// copy.
class ActorCriticAgent : public Agent {
 public:
  ActorCriticAgent(int input_size, int num_actions, A2CConfig cfg, Rng& init_rng, std::string algorithm = "da2c");

  std::string algorithm() const override { return algorithm_; }
  int num_actions() const override { return policy_.output_size(); }
  int SelectAction(const Features& features, double epsilon, Rng& rng) override;
  // argmax pi(. | b).
  int GreedyAction(const Features& features) const override;
  // Stores t; once warm, runs one value replay step and then a
  // policy-gradient step with the fresh TD error. The behaviour ratio uses
  // the epsilon of the most recent SelectAction call.
  void Learn(const Transition& t, int next_action, Rng& rng) override;

  std::optional<double> ValueTrainStep(Rng& rng);
  std::optional<double> last_delta() const { return last_delta_; }

  // Supervised policy stage then batch value stage; no environment
  // interaction. An empty corpus is a no-op with a warning. corpus_layout must
  // match the agent layout.
  PretrainReport Pretrain(const std::vector<SupervisedPair>& pairs, const std::vector<Transition>& transitions,
                          const std::vector<std::string>& corpus_layout, const PretrainConfig& cfg, Rng& rng);

  const A2CConfig& config() const { return cfg_; }
  const FeedForwardNet& policy() const { return policy_; }
  const FeedForwardNet& value() const { return value_; }
  const FeedForwardNet& value_target() const { return value_target_; }
  FeedForwardNet& mutable_policy() { return policy_; }
  FeedForwardNet& mutable_value() { return value_; }
  ReplayPool& pool() { return pool_; }
  int64_t value_steps() const { return value_steps_; }

  nlohmann::json Checkpoint() const override;
  void Restore(const nlohmann::json& j) override;

 private:
  std::string algorithm_;
  A2CConfig cfg_;
  FeedForwardNet policy_;
  FeedForwardNet value_;
  FeedForwardNet value_target_;
  AdadeltaState policy_opt_;
  AdadeltaState value_opt_;
  ReplayPool pool_;
  int64_t value_steps_ = 0;
  std::optional<double> last_delta_;
  double behaviour_epsilon_ = 0.0;
};

}  // namespace dialrl

#endif  // DIALRL_ACTOR_CRITIC_H_
