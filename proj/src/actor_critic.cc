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

#include "dialrl/actor_critic.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dialrl/errors.h"

namespace dialrl {

using nlohmann::json;

namespace {

FeedForwardNet BuildNet(int input, const std::vector<int>& hidden, int output, OutputHead head, Rng& rng) {
  std::vector<int> sizes = {input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  FeedForwardNet net(sizes, head);
  net.InitGlorot(rng);
  return net;
}

void CheckHidden(const std::vector<int>& hidden, const char* name) {
  if (hidden.empty()) throw ConfigError(std::string(name) + " needs at least one layer");
  for (int h : hidden) {
    if (h <= 0) throw ConfigError(std::string(name) + " widths must be positive");
  }
}

}  // namespace

void A2CConfig::Validate(int num_actions) const {
  CheckHidden(policy_hidden, "agent.policy_hidden");
  CheckHidden(value_hidden, "agent.value_hidden");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma outside [0,1]");
  if (!(l2 >= 0.0)) throw ConfigError("agent.l2 must be nonnegative");
  if (batch_size <= 0) throw ConfigError("agent.batch_size must be positive");
  if (tau < 1) throw ConfigError("agent.tau must be at least 1");
  if (capacity < static_cast<size_t>(batch_size)) throw ConfigError("agent.capacity smaller than agent.batch_size");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("agent.rho outside (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("agent.epsilon must be positive");
  if (!(policy_epsilon > 0.0)) throw ConfigError("agent.policy_epsilon must be positive");
  ValidateExcluded(num_actions, excluded);
}

json ToJson(const A2CConfig& cfg) {
  return {{"policy_hidden", cfg.policy_hidden}, {"value_hidden", cfg.value_hidden}, {"gamma", cfg.gamma},
          {"l2", cfg.l2},                       {"batch_size", cfg.batch_size},     {"tau", cfg.tau},
          {"capacity", cfg.capacity},           {"warmup", cfg.warmup},             {"excluded", cfg.excluded},
          {"rho", cfg.rho},                     {"epsilon", cfg.epsilon},
          {"policy_epsilon", cfg.policy_epsilon},
          {"importance_weighting", cfg.importance_weighting}};
}

A2CConfig A2CConfigFromJson(const json& j, A2CConfig c) {
  c.policy_hidden = j.value("policy_hidden", c.policy_hidden);
  c.value_hidden = j.value("value_hidden", c.value_hidden);
  c.gamma = j.value("gamma", c.gamma);
  c.l2 = j.value("l2", c.l2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tau = j.value("tau", c.tau);
  c.capacity = j.value("capacity", c.capacity);
  c.warmup = j.value("warmup", c.warmup);
  c.excluded = j.value("excluded", c.excluded);
  c.rho = j.value("rho", c.rho);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.policy_epsilon = j.value("policy_epsilon", c.policy_epsilon);
  c.importance_weighting = j.value("importance_weighting", c.importance_weighting);
  return c;
}

void PretrainConfig::Validate() const {
  if (epochs < 0) throw ConfigError("pretrain.epochs must be nonnegative");
  if (batch_size <= 0) throw ConfigError("pretrain.batch_size must be positive");
  if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw ConfigError("pretrain.holdout_frac outside [0,1)");
  if (sweeps < 0) throw ConfigError("pretrain.sweeps must be nonnegative");
}

json ToJson(const PretrainConfig& cfg) {
  return {{"supervised", cfg.supervised}, {"batch_rl", cfg.batch_rl},           {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size}, {"holdout_frac", cfg.holdout_frac}, {"sweeps", cfg.sweeps}};
}

PretrainConfig PretrainConfigFromJson(const json& j, PretrainConfig c) {
  c.supervised = j.value("supervised", c.supervised);
  c.batch_rl = j.value("batch_rl", c.batch_rl);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.holdout_frac = j.value("holdout_frac", c.holdout_frac);
  c.sweeps = j.value("sweeps", c.sweeps);
  return c;
}

std::vector<std::string> PretrainReport::StageLog() const {
  std::vector<std::string> out;
  if (skipped) {
    out.push_back("pretrain skipped: " + warning);
    return out;
  }
  for (size_t e = 0; e < epoch_loss.size(); ++e) {
    out.push_back("supervised epoch " + std::to_string(e + 1) + " loss " + std::to_string(epoch_loss[e]));
  }
  if (!epoch_loss.empty()) out.push_back("supervised held-out accuracy " + std::to_string(heldout_accuracy));
  if (value_steps > 0) {
    out.push_back("batch value steps " + std::to_string(value_steps) + " final loss " +
                  std::to_string(final_value_loss));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objectives

int SelectActionPolicy(const FeedForwardNet& policy, const Features& features, double epsilon,
                       const std::vector<int>& excluded, Rng& rng) {
  if (epsilon > 0.0 && Bernoulli(rng, epsilon)) {
    return UniformAllowedAction(policy.output_size(), excluded, rng);
  }
  const Eigen::VectorXd p = policy.Forward(features);
  return SampleCategorical(rng, std::vector<double>(p.data(), p.data() + p.size()));
}

double TdAdvantage(const FeedForwardNet& value, double reward, const Features& b, const Features& next,
                   bool terminal, double gamma) {
  double delta = reward - value.Scalar(b);
  if (!terminal) delta += gamma * value.Scalar(next);
  return delta;
}

double TdAdvantage(const FeedForwardNet& value, const Transition& t, double gamma) {
  return TdAdvantage(value, t.reward, t.features, t.next_features, t.terminal, gamma);
}

double BehaviourRatio(const Eigen::VectorXd& pi, int action, double epsilon, const std::vector<int>& excluded) {
  const int n = static_cast<int>(pi.size());
  if (action < 0 || action >= n) throw DomainError("action " + std::to_string(action) + " out of range");
  const bool is_excluded = std::find(excluded.begin(), excluded.end(), action) != excluded.end();
  const double allowed = static_cast<double>(n - static_cast<int>(excluded.size()));
  const double mu = (is_excluded ? 0.0 : epsilon / allowed) + (1.0 - epsilon) * pi(action);
  if (!(mu > 0.0)) return 0.0;
  return pi(action) / mu;
}

GradientSet LogPolicyGradient(const FeedForwardNet& policy, const Features& b, int action) {
  if (policy.head() != OutputHead::kSoftmax) throw ShapeError("policy network needs a softmax head");
  if (action < 0 || action >= policy.output_size()) throw DomainError("action index out of range");
  const Eigen::VectorXd p = policy.Forward(b);
  Eigen::VectorXd upstream = Eigen::VectorXd::Zero(p.size());
  upstream(action) = 1.0 / std::max(p(action), 1e-300);
  return policy.Backward(b, upstream);
}

GradientSet PolicyObjectiveGradient(const FeedForwardNet& policy, const Features& b, int action, double delta,
                                    double l2) {
  GradientSet g = LogPolicyGradient(policy, b, action);
  g *= -delta;
  if (l2 > 0.0) g += L2Penalty(policy, l2).gradient;
  return g;
}

GradientSet PolicyGradientStep(FeedForwardNet& policy, AdadeltaState& opt, const Features& b, int action,
                               double delta, double l2) {
  if (!std::isfinite(delta)) throw NumericsError("non-finite advantage; policy step rejected");
  return opt.Step(policy, PolicyObjectiveGradient(policy, b, action, delta, l2));
}

Eigen::VectorXd ValueTargets(const Batch& batch, const FeedForwardNet& target, double gamma) {
  const Eigen::MatrixXd v_next = target.ForwardBatch(StackFeatures(batch, true));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y(c) = batch[i]->reward + (batch[i]->terminal ? 0.0 : gamma * v_next(0, c));
  }
  return y;
}

SupervisedLoss SupervisedObjective(const FeedForwardNet& policy, const std::vector<const SupervisedPair*>& batch,
                                   double l2) {
  if (batch.empty()) throw UsageError("empty supervised batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd inputs(policy.input_size(), n);
  for (Eigen::Index i = 0; i < n; ++i) inputs.col(i) = batch[static_cast<size_t>(i)]->features;
  const Eigen::MatrixXd probs = policy.ForwardBatch(inputs);
  Eigen::MatrixXd upstream(probs.rows(), n);
  SupervisedLoss out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const LossResult ce = CrossEntropyLoss(probs.col(i), batch[static_cast<size_t>(i)]->action);
    out.loss += ce.loss / static_cast<double>(n);
    upstream.col(i) = ce.gradient / static_cast<double>(n);
  }
  out.gradient = policy.BackwardBatch(inputs, upstream);
  if (l2 > 0.0) {
    PenaltyResult pen = L2Penalty(policy, l2);
    out.loss += pen.penalty;
    out.gradient += pen.gradient;
  }
  return out;
}

double SupervisedStep(FeedForwardNet& policy, AdadeltaState& opt, const std::vector<const SupervisedPair*>& batch,
                      double l2) {
  SupervisedLoss obj = SupervisedObjective(policy, batch, l2);
  opt.Step(policy, obj.gradient);
  return obj.loss;
}

// ---------------------------------------------------------------------------
// ActorCriticAgent

ActorCriticAgent::ActorCriticAgent(int input_size, int num_actions, A2CConfig cfg, Rng& init_rng,
                                   std::string algorithm)
    : algorithm_(std::move(algorithm)), cfg_(std::move(cfg)), pool_(cfg_.capacity) {
  cfg_.Validate(num_actions);
  policy_ = BuildNet(input_size, cfg_.policy_hidden, num_actions, OutputHead::kSoftmax, init_rng);
  value_ = BuildNet(input_size, cfg_.value_hidden, 1, OutputHead::kScalarLinear, init_rng);
  value_target_ = value_;
  policy_opt_ = AdadeltaState(policy_, cfg_.rho, cfg_.policy_epsilon);
  value_opt_ = AdadeltaState(value_, cfg_.rho, cfg_.epsilon);
}

int ActorCriticAgent::SelectAction(const Features& features, double epsilon, Rng& rng) {
  behaviour_epsilon_ = epsilon;
  return SelectActionPolicy(policy_, features, epsilon, cfg_.excluded, rng);
}

int ActorCriticAgent::GreedyAction(const Features& features) const { return Argmax(policy_.Forward(features)); }

std::optional<double> ActorCriticAgent::ValueTrainStep(Rng& rng) {
  if (pool_.size() < static_cast<size_t>(cfg_.batch_size)) return std::nullopt;
  const Batch batch = pool_.Sample(static_cast<size_t>(cfg_.batch_size), rng);
  const Eigen::VectorXd y = ValueTargets(batch, value_target_, cfg_.gamma);
  const Eigen::MatrixXd inputs = StackFeatures(batch, false);
  const Eigen::MatrixXd v = value_.ForwardBatch(inputs);
  const double n = static_cast<double>(batch.size());
  const Eigen::RowVectorXd diff = v.row(0) - y.transpose();
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericsError("non-finite value regression loss at step " +
                                                std::to_string(value_steps_));
  value_opt_.Step(value_, value_.BackwardBatch(inputs, 2.0 * diff / n));
  ++value_steps_;
  if (value_steps_ % cfg_.tau == 0) CopyParams(value_, value_target_);
  return loss;
}

void ActorCriticAgent::Learn(const Transition& t, int /*next_action*/, Rng& rng) {
  pool_.Store(t);
  // The actor waits for the critic: advantages from an untrained value
  // network are noise.
  if (pool_.size() < cfg_.warmup) return;
  ValueTrainStep(rng);
  const double delta = TdAdvantage(value_, t, cfg_.gamma);
  last_delta_ = delta;
  double weight = 1.0;
  if (cfg_.importance_weighting) {
    weight = BehaviourRatio(policy_.Forward(t.features), t.action, behaviour_epsilon_, cfg_.excluded);
  }
  PolicyGradientStep(policy_, policy_opt_, t.features, t.action, weight * delta, cfg_.l2);
}

PretrainReport ActorCriticAgent::Pretrain(const std::vector<SupervisedPair>& pairs,
                                          const std::vector<Transition>& transitions,
                                          const std::vector<std::string>& corpus_layout, const PretrainConfig& cfg,
                                          Rng& rng) {
  cfg.Validate();
  PretrainReport report;
  if (pairs.empty() && transitions.empty()) {
    report.skipped = true;
    report.warning = "empty corpus; agent left unchanged";
    return report;
  }
  if (!layout_.empty()) CheckLayout(layout_, corpus_layout, "pretraining corpus");

  if (cfg.supervised && !pairs.empty()) {
    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t held = static_cast<size_t>(std::floor(cfg.holdout_frac * static_cast<double>(pairs.size())));
    if (held >= pairs.size()) held = pairs.size() - 1;
    std::vector<const SupervisedPair*> train, test;
    for (size_t i = 0; i < order.size(); ++i) (i < held ? test : train).push_back(&pairs[order[i]]);
    report.train_pairs = static_cast<int>(train.size());
    report.heldout_pairs = static_cast<int>(test.size());
    const size_t bs = static_cast<size_t>(cfg.batch_size);
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(train.begin(), train.end(), rng);
      double total = 0.0;
      int batches = 0;
      for (size_t start = 0; start < train.size(); start += bs) {
        std::vector<const SupervisedPair*> batch(train.begin() + static_cast<std::ptrdiff_t>(start),
                                                 train.begin() + static_cast<std::ptrdiff_t>(std::min(start + bs, train.size())));
        total += SupervisedStep(policy_, policy_opt_, batch, cfg_.l2);
        ++batches;
      }
      report.epoch_loss.push_back(total / std::max(batches, 1));
    }
    int hits = 0;
    for (const auto* p : test) hits += GreedyAction(p->features) == p->action ? 1 : 0;
    report.heldout_accuracy = test.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test.size());
  }

  if (cfg.batch_rl && !transitions.empty()) {
    for (const auto& t : transitions) pool_.Store(t);
    const int64_t per_sweep =
        static_cast<int64_t>((transitions.size() + static_cast<size_t>(cfg_.batch_size) - 1) /
                             static_cast<size_t>(cfg_.batch_size));
    for (int64_t s = 0; s < per_sweep * cfg.sweeps; ++s) {
      if (auto loss = ValueTrainStep(rng)) {
        report.final_value_loss = *loss;
        ++report.value_steps;
      }
    }
    CopyParams(value_, value_target_);
  }
  return report;
}

json ActorCriticAgent::Checkpoint() const {
  return {{"schema", "dialrl.a2c"},
          {"version", 1},
          {"algorithm", algorithm_},
          {"config", ToJson(cfg_)},
          {"policy", policy_.ToJson()},
          {"value", value_.ToJson()},
          {"value_target", value_target_.ToJson()},
          {"policy_optimizer", policy_opt_.ToJson()},
          {"value_optimizer", value_opt_.ToJson()},
          {"value_steps", value_steps_},
          {"behaviour_epsilon", behaviour_epsilon_},
          {"layout", layout_}};
}

void ActorCriticAgent::Restore(const json& j) {
  if (j.value("schema", "") != "dialrl.a2c") throw ParseError("not a dialrl.a2c checkpoint");
  const auto layout = j.value("layout", std::vector<std::string>{});
  if (!layout_.empty()) CheckLayout(layout_, layout, "checkpoint");
  FeedForwardNet policy = FeedForwardNet::FromJson(j.at("policy"));
  FeedForwardNet value = FeedForwardNet::FromJson(j.at("value"));
  FeedForwardNet target = FeedForwardNet::FromJson(j.at("value_target"));
  if (!policy.SameArchitecture(policy_) || !value.SameArchitecture(value_) || !target.SameArchitecture(value_)) {
    throw ShapeError("checkpoint network shape differs from the configured agent");
  }
  policy_ = std::move(policy);
  value_ = std::move(value);
  value_target_ = std::move(target);
  policy_opt_ = AdadeltaState::FromJson(j.at("policy_optimizer"));
  value_opt_ = AdadeltaState::FromJson(j.at("value_optimizer"));
  value_steps_ = j.at("value_steps").get<int64_t>();
  behaviour_epsilon_ = j.value("behaviour_epsilon", 0.0);
  layout_ = layout;
}

}  // namespace dialrl
