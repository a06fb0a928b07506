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

#ifndef DIALRL_AGENT_H_
#define DIALRL_AGENT_H_

#include <string>
#include <vector>

#include "dialrl/numerics.h"
#include "dialrl/rng.h"
#include "json.hpp"

namespace dialrl {

struct Transition {
  Features features;
  int action = 0;
  double reward = 0.0;
  Features next_features;
  bool terminal = false;
};

// A (features, demonstrated action) pair for supervised pretraining.
struct SupervisedPair {
  Features features;
  int action = 0;
};

// A learning dialogue manager as seen by the training loop.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string algorithm() const = 0;
  virtual int num_actions() const = 0;

  // Behaviour policy with exploration rate epsilon.
  virtual int SelectAction(const Features& features, double epsilon, Rng& rng) = 0;
  // Deterministic evaluation policy.
  virtual int GreedyAction(const Features& features) const = 0;

  // One online update. next_action is the action already chosen for the
  // successor state, or -1 after a terminal transition; only on-policy
  // learners look at it.
  virtual void Learn(const Transition& t, int next_action, Rng& rng) = 0;

  // Ordered feature names the agent was built for; empty when unset.
  const std::vector<std::string>& layout() const { return layout_; }
  void set_layout(std::vector<std::string> layout) { layout_ = std::move(layout); }

  virtual nlohmann::json Checkpoint() const = 0;
  virtual void Restore(const nlohmann::json& j) = 0;

 protected:
  std::vector<std::string> layout_;
};

// Throws ShapeError listing the first differing positions when two feature
// layouts disagree.
void CheckLayout(const std::vector<std::string>& expected, const std::vector<std::string>& actual,
                 const std::string& what);

// Index of the largest entry; ties go to the lowest index.
int Argmax(const Eigen::VectorXd& v);

// Uniform draw from the actions that are not excluded.
int UniformAllowedAction(int num_actions, const std::vector<int>& excluded, Rng& rng);

// Throws ConfigError unless every excluded index is valid and at least one action remains.
void ValidateExcluded(int num_actions, const std::vector<int>& excluded);

}  // namespace dialrl

#endif  // DIALRL_AGENT_H_
