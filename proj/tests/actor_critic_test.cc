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

#include <filesystem>
#include <map>
#include <string>

#include "doctest.h"
#include "dialrl/actor_critic.h"
#include "dialrl/corpus.h"
#include "dialrl/errors.h"
#include "dialrl/harness.h"
#include "oracles.h"

namespace dialrl {
namespace {

FeedForwardNet RandomSoftmaxNet(std::vector<int> sizes, uint64_t seed) {
  FeedForwardNet net(std::move(sizes), OutputHead::kSoftmax);
  Rng rng(seed);
  net.InitGlorot(rng);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = UniformReal(rng, -0.3, 0.3);
  }
  return net;
}

Features RandomFeatures(int n, Rng& rng) {
  Features x(n);
  for (int i = 0; i < n; ++i) x(i) = UniformReal(rng, -1, 1);
  return x;
}

// V(x) = weight . x + bias with a single linear layer.
FeedForwardNet LinearValue(const std::vector<double>& weights, double bias) {
  FeedForwardNet net({static_cast<int>(weights.size()), 1}, OutputHead::kScalarLinear);
  for (size_t i = 0; i < weights.size(); ++i) net.layers()[0].weights(0, static_cast<Eigen::Index>(i)) = weights[i];
  net.layers()[0].bias(0) = bias;
  return net;
}

TEST_CASE("policy sampling") {
  Rng rng(1);
  FeedForwardNet peaked({2, 11}, OutputHead::kSoftmax);
  peaked.layers()[0].bias(4) = 20.0;
  const Features x = Features::Zero(2);
  const int n = 10000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += SelectActionPolicy(peaked, x, 0.0, {}, rng) == 4;
  CHECK(hits >= 0.999 * n);

  FeedForwardNet flat({2, 11}, OutputHead::kSoftmax);
  std::map<int, int> freq;
  for (int i = 0; i < n; ++i) ++freq[SelectActionPolicy(flat, x, 0.0, {}, rng)];
  for (int a = 0; a < 11; ++a) CHECK(std::abs(freq[a] / double(n) - 1.0 / 11) <= 0.01);

  freq.clear();
  for (int i = 0; i < n; ++i) ++freq[SelectActionPolicy(peaked, x, 1.0, {1, 2, 3}, rng)];
  for (int a : {1, 2, 3}) CHECK(freq[a] == 0);
  for (int a : {0, 4, 5, 6, 7, 8, 9, 10}) CHECK(std::abs(freq[a] / double(n) - 1.0 / 8) <= 0.02);
}

TEST_CASE("policy outputs are strict distributions") {
  const FeedForwardNet pi = RandomSoftmaxNet({5, 12, 7, 11}, 2);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd p = pi.Forward(RandomFeatures(5, rng) * 3.0);
    CHECK(p.minCoeff() > 0.0);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("td advantage") {
  const FeedForwardNet v = LinearValue({0.1}, 0.4);
  const Features b = Features::Zero(1), next = Features::Ones(1);
  CHECK(TdAdvantage(v, -0.03, b, next, false, 0.99) == doctest::Approx(0.065).epsilon(1e-12));
  const FeedForwardNet v8 = LinearValue({0.0}, 0.8);
  CHECK(TdAdvantage(v8, 1.0, b, next, true, 0.99) == doctest::Approx(0.2).epsilon(1e-12));
  const FeedForwardNet zero = LinearValue({0.0}, 0.0);
  CHECK(TdAdvantage(zero, 0.37, b, next, false, 0.99) == 0.37);

  // Exactly linear in r with unit slope.
  const double d0 = TdAdvantage(v, 0.0, b, next, false, 0.99);
  for (double r : {-1.0, -0.03, 0.5, 2.0}) CHECK(TdAdvantage(v, r, b, next, false, 0.99) - d0 == doctest::Approx(r));
}

TEST_CASE("log-policy gradient matches finite differences") {
  Rng rng(4);
  FeedForwardNet pi = RandomSoftmaxNet({4, 6, 5, 3}, 5);
  for (int a = 0; a < 3; ++a) {
    const Features x = RandomFeatures(4, rng);
    const GradientSet g = LogPolicyGradient(pi, x, a);
    CHECK(oracle::MaxGradientError(pi, g, [&] { return std::log(pi.Forward(x)(a)); }) <= 1e-4);
  }
  const Features x = RandomFeatures(4, rng);
  const GradientSet obj = PolicyObjectiveGradient(pi, x, 1, 0.7, 0.01);
  auto objective = [&] { return -0.7 * std::log(pi.Forward(x)(1)) + L2Penalty(pi, 0.01).penalty; };
  CHECK(oracle::MaxGradientError(pi, obj, objective) <= 1e-4);
}

TEST_CASE("policy gradient step directions") {
  Rng rng(6);
  FeedForwardNet pi = RandomSoftmaxNet({4, 6, 5, 3}, 7);
  AdadeltaState opt(pi);
  const Features x = RandomFeatures(4, rng);
  const FeedForwardNet before = pi;
  const GradientSet none = PolicyGradientStep(pi, opt, x, 1, 0.0, 0.0);
  CHECK(none.SquaredNorm() == 0.0);
  for (size_t l = 0; l < pi.layers().size(); ++l) CHECK(pi.layers()[l].weights == before.layers()[l].weights);

  // Warm the accumulators, then a positive advantage raises pi(a|b) and a
  // negative one lowers it.
  for (int i = 0; i < 5; ++i) PolicyGradientStep(pi, opt, RandomFeatures(4, rng), i % 3, 0.0, 0.0);
  for (double sign : {1.0, -1.0}) {
    const double p0 = pi.Forward(x)(2);
    const GradientSet up = PolicyGradientStep(pi, opt, x, 2, sign, 0.0);
    const double p1 = pi.Forward(x)(2);
    CHECK(sign * (p1 - p0) > 0.0);
    CHECK(sign * up.Dot(LogPolicyGradient(before, x, 2)) > 0.0);
  }
  CHECK_THROWS_AS(PolicyGradientStep(pi, opt, x, 0, std::nan(""), 0.0), NumericsError);
}

TEST_CASE("behaviour ratio") {
  Eigen::VectorXd pi(4);
  pi << 0.1, 0.2, 0.3, 0.4;
  CHECK(BehaviourRatio(pi, 2, 0.0, {}) == doctest::Approx(1.0));
  CHECK(BehaviourRatio(pi, 2, 1.0, {}) == doctest::Approx(0.3 / 0.25));
  CHECK(BehaviourRatio(pi, 0, 0.5, {0}) == doctest::Approx(2.0));
  CHECK(BehaviourRatio(pi, 1, 0.5, {0}) == doctest::Approx(0.2 / (0.5 / 3 + 0.1)));
  // E_mu[ratio * f(a)] = E_pi[f(a)].
  const std::vector<int> excluded = {3};
  const double eps = 0.3;
  double lhs = 0.0, rhs = 0.0;
  for (int a = 0; a < 4; ++a) {
    const double mu = (a == 3 ? 0.0 : eps / 3) + (1 - eps) * pi(a);
    lhs += mu * BehaviourRatio(pi, a, eps, excluded) * (a + 1.0);
    rhs += pi(a) * (a + 1.0);
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("value regression on a terminal-only pool") {
  A2CConfig cfg;
  cfg.policy_hidden = {6};
  cfg.value_hidden = {8, 8};
  cfg.batch_size = 4;
  cfg.warmup = 1;
  Rng init(8);
  ActorCriticAgent agent(3, 4, cfg, init);
  Rng rng(9);
  std::vector<Transition> ts;
  for (int i = 0; i < 4; ++i) {
    Transition t;
    t.features = RandomFeatures(3, rng);
    t.next_features = RandomFeatures(3, rng);
    t.reward = i % 2 ? 1.0 : -1.0;
    t.terminal = true;
    agent.pool().Store(t);
    ts.push_back(t);
  }
  double loss = 0.0;
  for (int i = 0; i < 4000; ++i) {
    loss = *agent.ValueTrainStep(rng);
    REQUIRE(std::isfinite(loss));
  }
  for (const auto& t : ts) CHECK(std::abs(agent.value().Scalar(t.features) - t.reward) <= 0.05);
  // The same arithmetic as a single-action DQN target.
  const Batch batch = {&ts[0], &ts[1]};
  CHECK(ValueTargets(batch, agent.value_target(), 0.5) == DqnTargets(batch, agent.value_target(), 0.5));
}

TEST_CASE("supervised objective") {
  FeedForwardNet zero({5, 6, 11}, OutputHead::kSoftmax);
  Rng rng(10);
  std::vector<SupervisedPair> pairs;
  for (int i = 0; i < 32; ++i) pairs.push_back({RandomFeatures(5, rng), UniformInt(rng, 11)});
  std::vector<const SupervisedPair*> batch;
  for (const auto& p : pairs) batch.push_back(&p);
  CHECK(std::abs(SupervisedObjective(zero, batch, 0.0).loss - std::log(11.0)) <= 0.05);

  FeedForwardNet pi = RandomSoftmaxNet({5, 6, 4}, 11);
  std::vector<SupervisedPair> small;
  for (int i = 0; i < 6; ++i) small.push_back({RandomFeatures(5, rng), UniformInt(rng, 4)});
  std::vector<const SupervisedPair*> sb;
  for (const auto& p : small) sb.push_back(&p);
  const SupervisedLoss s = SupervisedObjective(pi, sb, 0.02);
  CHECK(oracle::MaxGradientError(pi, s.gradient, [&] { return SupervisedObjective(pi, sb, 0.02).loss; }) <= 1e-4);

  FeedForwardNet tiny = RandomSoftmaxNet({3, 5, 4}, 12);
  AdadeltaState opt(tiny);
  const SupervisedPair one{Features::Constant(3, 0.5), 3};
  const std::vector<const SupervisedPair*> single = {&one};
  for (int i = 0; i < 2000; ++i) SupervisedStep(tiny, opt, single, 0.0);
  CHECK(tiny.Forward(one.features)(3) >= 0.99);
  CHECK_THROWS_AS(SupervisedObjective(tiny, {}, 0.0), UsageError);
}

TEST_CASE("pretraining refusals and no-ops") {
  A2CConfig cfg;
  cfg.policy_hidden = {6};
  cfg.value_hidden = {6};
  Rng init(13);
  ActorCriticAgent agent(3, 4, cfg, init);
  agent.set_layout({"a", "b", "c"});
  Rng rng(14);
  const FeedForwardNet before = agent.policy();
  const PretrainReport empty = agent.Pretrain({}, {}, {"a", "b", "c"}, PretrainConfig{}, rng);
  CHECK(empty.skipped);
  CHECK_FALSE(empty.warning.empty());
  CHECK(agent.policy().layers()[0].weights == before.layers()[0].weights);

  const std::vector<SupervisedPair> pairs = {{Features::Zero(3), 1}, {Features::Ones(3), 2}};
  try {
    agent.Pretrain(pairs, {}, {"a", "x", "c"}, PretrainConfig{}, rng);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("imitation of a deterministic handcrafted corpus") {
  EnvConfig env;
  env.error = ModerateNoise();
  const World world = MakeWorld(env);
  DialogueEnv denv(env, world.ontology, world.database);
  HandcraftedPolicy policy;
  BlunderSchedule clean;
  clean.clean_frac = 1.0;
  const Corpus corpus = GenerateCorpus(denv, policy, 600, clean, 21);
  const auto layout = FeatureLayout(env.space, *world.ontology);
  A2CConfig cfg;
  Rng init(15);
  ActorCriticAgent agent(kOriginalSize, kNumOriginalActions, cfg, init);
  agent.set_layout(layout);
  PretrainConfig pc;
  pc.batch_rl = false;
  Rng rng(16);
  const PretrainReport report = agent.Pretrain(ToSupervised(corpus, layout), {}, corpus.layout, pc, rng);
  CHECK(report.heldout_pairs > 0);
  CHECK(report.epoch_loss.size() == 20);
  CHECK(report.heldout_accuracy >= 0.95);
}

// Three states s0, s1 (nonterminal) and an absorbing terminal, two actions.
TEST_CASE("expected TD error equals Q - V in a tabular micro MDP") {
  const double gamma = 0.9;
  // next[s][a] = {(prob, next state)}, state 2 terminal.
  const std::vector<std::vector<std::vector<std::pair<double, int>>>> next = {
      {{{0.7, 1}, {0.3, 2}}, {{0.2, 0}, {0.8, 2}}},
      {{{0.5, 0}, {0.5, 2}}, {{1.0, 2}}}};
  const double reward[2][2] = {{-0.03, 0.4}, {1.0, -0.5}};
  const double pi[2][2] = {{0.6, 0.4}, {0.25, 0.75}};

  // V^pi by a dense linear solve.
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  for (int s = 0; s < 2; ++s) {
    for (int u = 0; u < 2; ++u) {
      r(s) += pi[s][u] * reward[s][u];
      for (const auto& [p, t] : next[s][u]) {
        if (t < 2) a(s, t) -= gamma * pi[s][u] * p;
      }
    }
  }
  const Eigen::Vector2d v = a.lu().solve(r);
  const FeedForwardNet value = LinearValue({v(0), v(1)}, 0.0);
  auto onehot = [](int s) {
    Features f = Features::Zero(2);
    if (s < 2) f(s) = 1.0;
    return f;
  };
  for (int s = 0; s < 2; ++s) {
    for (int u = 0; u < 2; ++u) {
      double q = reward[s][u], expected_delta = 0.0;
      for (const auto& [p, t] : next[s][u]) {
        if (t < 2) q += gamma * p * v(t);
        expected_delta += p * TdAdvantage(value, reward[s][u], onehot(s), onehot(t), t == 2, gamma);
      }
      CHECK(std::abs(expected_delta - (q - v(s))) <= 1e-10);
    }
  }
}

TEST_CASE("online learning waits for the critic warm-up") {
  A2CConfig cfg;
  cfg.policy_hidden = {6};
  cfg.value_hidden = {6};
  cfg.warmup = 10;
  cfg.batch_size = 4;
  Rng init(17);
  ActorCriticAgent agent(3, 4, cfg, init);
  Rng rng(18);
  const FeedForwardNet before = agent.policy();
  for (int i = 0; i < 9; ++i) {
    Transition t{RandomFeatures(3, rng), i % 4, -0.03, RandomFeatures(3, rng), false};
    agent.SelectAction(t.features, 0.5, rng);
    agent.Learn(t, 0, rng);
  }
  CHECK(agent.value_steps() == 0);
  CHECK(agent.policy().layers()[0].weights == before.layers()[0].weights);
  Transition t{RandomFeatures(3, rng), 1, 1.0, RandomFeatures(3, rng), true};
  agent.SelectAction(t.features, 0.5, rng);
  agent.Learn(t, -1, rng);
  CHECK(agent.value_steps() == 1);
  CHECK(agent.last_delta().has_value());
}

TEST_CASE("actor-critic checkpoint round trip") {
  A2CConfig cfg;
  cfg.policy_hidden = {6};
  cfg.value_hidden = {6};
  cfg.warmup = 2;
  cfg.batch_size = 2;
  Rng init(19);
  ActorCriticAgent a(3, 4, cfg, init);
  Rng rng(20);
  for (int i = 0; i < 6; ++i) {
    Transition t{RandomFeatures(3, rng), i % 4, 0.1, RandomFeatures(3, rng), i == 5};
    a.SelectAction(t.features, 0.2, rng);
    a.Learn(t, 0, rng);
  }
  Rng init2(21);
  ActorCriticAgent b(3, 4, cfg, init2);
  b.Restore(a.Checkpoint());
  const Features x = Features::Constant(3, 0.2);
  CHECK(b.policy().Forward(x) == a.policy().Forward(x));
  CHECK(b.value().Forward(x) == a.value().Forward(x));
  CHECK(b.value_steps() == a.value_steps());
  CHECK(b.GreedyAction(x) == a.GreedyAction(x));
}


std::string ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dialrl_ac_" + name);
  std::filesystem::remove_all(dir);
  return dir.string();
}

ExperimentConfig EasyConfig() {
  ExperimentConfig cfg;
  cfg.name = "easy";
  cfg.algorithm = Algorithm::kDa2c;
  cfg.env.goal.constraint_inclusion = {0.0, 1.0, 0.0};
  cfg.env.goal.request_count_probs = {1.0};
  cfg.env.user.p_multi_act = 0.0;
  cfg.a2c.l2 = 1e-4;
  cfg.a2c.warmup = 200;
  cfg.epsilon.rate = 0.999;
  cfg.train_dialogues = 3000;
  cfg.eval_period = 250;
  cfg.eval_dialogues = 100;
  cfg.checkpoint_period = 3000;
  return cfg;
}

// Window-5 trailing mean; nondecreasing up to evaluation noise of one
// dialogue in a hundred.
bool SmoothedMonotone(const LearningCurve& curve) {
  std::vector<double> smooth;
  for (size_t i = 0; i < curve.size(); ++i) {
    const size_t lo = i >= 4 ? i - 4 : 0;
    double sum = 0.0;
    for (size_t j = lo; j <= i; ++j) sum += curve[j].success;
    smooth.push_back(sum / static_cast<double>(i - lo + 1));
  }
  for (size_t i = 1; i < smooth.size(); ++i) {
    if (smooth[i] < smooth[i - 1] - 0.01) return false;
  }
  return true;
}

TEST_CASE("da2c learns the easy noiseless task") {
  const ExperimentConfig cfg = EasyConfig();
  const std::string dir = ScratchDir("easy");
  std::vector<double> to_threshold;
  int monotone = 0;
  for (uint64_t seed : cfg.seeds) {
    const TrainResult r = Train(cfg, seed, dir + "/seed_" + std::to_string(seed));
    to_threshold.push_back(DialoguesToThreshold(r.curve, 0.95));
    monotone += SmoothedMonotone(r.curve);
  }
  CHECK(Median(to_threshold) <= 3000);
  CHECK(monotone >= 4);
  std::filesystem::remove_all(dir);
}

ExperimentConfig PretrainedConfig(const std::string& filter) {
  ExperimentConfig cfg;
  cfg.name = "tda2c_" + filter;
  cfg.algorithm = Algorithm::kTda2c;
  cfg.corpus.size = 500;
  cfg.corpus.filter = filter;
  cfg.train_dialogues = 0;
  cfg.eval_dialogues = 200;
  cfg.eval_period = 100;
  return cfg;
}

double HandcraftedSuccess(const ExperimentConfig& cfg) {
  const World world = MakeWorld(cfg.env);
  DialogueEnv env(cfg.env, world.ontology, world.database);
  HandcraftedPolicy policy(cfg.handcrafted_threshold);
  return Evaluate(policy, env, cfg.eval_dialogues, DeriveSeed(1, 3)).success;
}

TEST_CASE("pretrained tda2c starts near the handcrafted policy") {
  for (const std::string filter : {"full", "expert"}) {
    CAPTURE(filter);
    const ExperimentConfig cfg = PretrainedConfig(filter);
    const std::string dir = ScratchDir(filter);
    const TrainResult r = Train(cfg, 1, dir);
    REQUIRE_FALSE(r.curve.empty());
    CHECK(r.curve.front().dialogues == 0);
    CHECK(std::abs(r.curve.front().success - HandcraftedSuccess(cfg)) <= 0.10);
    std::filesystem::remove_all(dir);
  }
}

}  // namespace
}  // namespace dialrl
