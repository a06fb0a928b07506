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

#include <sstream>
#include <string>

#include "doctest.h"
#include "dialrl/corpus.h"
#include "dialrl/errors.h"
#include "dialrl/harness.h"

namespace dialrl {
namespace {

struct CorpusFixture {
  EnvConfig cfg;
  World world = MakeWorld(cfg);
  DialogueEnv env{cfg, world.ontology, world.database};
  HandcraftedPolicy policy;

  Corpus Generate(int n, const BlunderSchedule& s, uint64_t seed) { return GenerateCorpus(env, policy, n, s, seed); }
};

BlunderSchedule Clean() {
  BlunderSchedule s;
  s.clean_frac = 1.0;
  return s;
}

EpisodeLog Log(bool success, int blunders, int grounded, int constraints) {
  EpisodeLog log;
  log.success = success;
  log.goal_constraints = constraints;
  log.grounded_constraints = grounded;
  for (int i = 0; i < 4; ++i) {
    TurnRecord t;
    t.blunder = i < blunders;
    log.turns.push_back(t);
  }
  log.length = 4;
  return log;
}

TEST_CASE_FIXTURE(CorpusFixture, "generation size, success and determinism") {
  const Corpus clean = Generate(200, Clean(), 3);
  CHECK(clean.dialogues.size() == 200);
  for (const auto& d : clean.dialogues) {
    CHECK(d.log.success);
    CHECK(d.rating == 3);
    CHECK(d.provenance == Provenance::kHandcrafted);
  }
  const Corpus full = Generate(kDefaultCorpusSize, BlunderSchedule{}, 11);
  CHECK(full.dialogues.size() == 2118);
  std::ostringstream a, b;
  SaveCorpus(Generate(100, BlunderSchedule{}, 5), a);
  SaveCorpus(Generate(100, BlunderSchedule{}, 5), b);
  CHECK(a.str() == b.str());
}

TEST_CASE("default schedule calibration of the expert fraction") {
  EnvConfig cfg;
  cfg.error = ModerateNoise();
  const World world = MakeWorld(cfg);
  DialogueEnv env(cfg, world.ontology, world.database);
  HandcraftedPolicy policy;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const auto h = RatingHistogram(GenerateCorpus(env, policy, kDefaultCorpusSize, BlunderSchedule{}, seed));
    const double frac = h[3] / static_cast<double>(kDefaultCorpusSize);
    CHECK(std::abs(frac - 706.0 / 2118.0) <= 0.05);
    CHECK(h[0] + h[1] + h[2] > 0);
  }
}

TEST_CASE("rating rubric") {
  CHECK(Rate(Log(true, 0, 3, 3)) == 3);
  CHECK(Rate(Log(true, 1, 3, 3)) == 2);
  CHECK(Rate(Log(true, 2, 3, 3)) == 2);
  CHECK(Rate(Log(true, 3, 3, 3)) == 1);
  CHECK(Rate(Log(false, 0, 2, 3)) == 1);
  CHECK(Rate(Log(false, 0, 1, 2)) == 1);
  CHECK(Rate(Log(false, 0, 1, 3)) == 0);
  CHECK(Rate(Log(false, 0, 0, 3)) == 0);
  const EpisodeLog log = Log(true, 1, 3, 3);
  CHECK(Rate(log) == Rate(log));
  CHECK(CountBlunders(Log(false, 3, 0, 3)) == 3);
}

TEST_CASE_FIXTURE(CorpusFixture, "ratings agree with the logged blunders") {
  const Corpus c = Generate(300, BlunderSchedule{}, 9);
  for (const auto& d : c.dialogues) {
    CHECK(d.rating == Rate(d.log));
    CHECK(d.rating >= 0);
    CHECK(d.rating <= 3);
    if (d.p_blunder == 0.0) CHECK(CountBlunders(d.log) == 0);
    if (CountBlunders(d.log) > 0) CHECK(d.provenance == Provenance::kNoisyHandcrafted);
  }
}

TEST_CASE("expert filter") {
  Corpus c;
  for (int r : {3, 1, 3}) {
    CorpusDialogue d;
    d.rating = r;
    d.log.length = r * 10 + static_cast<int>(c.dialogues.size());
    c.dialogues.push_back(d);
  }
  const Corpus e = FilterExpert(c);
  REQUIRE(e.dialogues.size() == 2);
  CHECK(e.dialogues[0].log.length == 30);
  CHECK(e.dialogues[1].log.length == 32);
  const auto h = RatingHistogram(c);
  CHECK(h[3] == 2);
  CHECK(h[1] == 1);
  CHECK(h[3] + h[0] + h[1] + h[2] == 3);

  Corpus none;
  CorpusDialogue d;
  d.rating = 2;
  none.dialogues.push_back(d);
  CHECK(FilterExpert(none).dialogues.empty());
}

TEST_CASE_FIXTURE(CorpusFixture, "supervised pairs and transitions") {
  const Corpus c = Generate(50, BlunderSchedule{}, 13);
  const auto pairs = ToSupervised(c, c.layout);
  const auto transitions = ToTransitions(c, c.layout);
  size_t turns = 0;
  for (const auto& d : c.dialogues) turns += d.log.turns.size();
  CHECK(pairs.size() == turns);
  CHECK(transitions.size() == turns);

  size_t k = 0;
  for (const auto& d : c.dialogues) {
    double sum = 0.0;
    for (size_t i = 0; i < d.log.turns.size(); ++i, ++k) {
      sum += transitions[k].reward;
      CHECK(transitions[k].terminal == (i + 1 == d.log.turns.size()));
      CHECK(pairs[k].action == d.log.turns[i].action);
    }
    CHECK(sum == doctest::Approx(d.log.total_return).epsilon(1e-12));
  }

  auto other = c.layout;
  other[0] = "renamed";
  CHECK_THROWS_AS(ToSupervised(c, other), ShapeError);
  CHECK_THROWS_AS(ToTransitions(c, other), ShapeError);
  Corpus bad = c;
  bad.dialogues[0].log.turns[0].features = Features::Zero(3);
  CHECK_THROWS_AS(ToSupervised(bad, bad.layout), ShapeError);
}

TEST_CASE_FIXTURE(CorpusFixture, "a clean corpus replays through the rule table") {
  const Corpus c = Generate(200, Clean(), 17);
  HandcraftedPolicy replay;
  int turns = 0, agree = 0;
  for (const auto& d : c.dialogues) {
    replay.BeginEpisode();
    for (const auto& t : d.log.turns) {
      const int a = HandcraftedPolicy::ToAction(replay.Decide(RuleInputFromOriginal(t.features)), c.space);
      agree += a == t.action;
      ++turns;
    }
  }
  CHECK(agree == turns);
}

TEST_CASE_FIXTURE(CorpusFixture, "save and load round trip") {
  const Corpus c = Generate(40, BlunderSchedule{}, 19);
  std::ostringstream out;
  SaveCorpus(c, out);
  std::istringstream in(out.str());
  const Corpus back = LoadCorpus(in);
  std::ostringstream again;
  SaveCorpus(back, again);
  CHECK(again.str() == out.str());
  REQUIRE(back.dialogues.size() == c.dialogues.size());
  for (size_t i = 0; i < c.dialogues.size(); ++i) {
    CHECK(back.dialogues[i].rating == c.dialogues[i].rating);
    CHECK(back.dialogues[i].p_blunder == c.dialogues[i].p_blunder);
    REQUIRE(back.dialogues[i].log.turns.size() == c.dialogues[i].log.turns.size());
    for (size_t t = 0; t < c.dialogues[i].log.turns.size(); ++t) {
      CHECK(back.dialogues[i].log.turns[t].features == c.dialogues[i].log.turns[t].features);
    }
  }
  std::istringstream junk("{\"schema\":\"something\"}\n");
  CHECK_THROWS_AS(LoadCorpus(junk), ParseError);
}

TEST_CASE("blunder schedule") {
  BlunderSchedule s;
  Rng rng(1);
  int zeros = 0;
  for (int i = 0; i < 4000; ++i) {
    const double p = s.Sample(rng);
    if (p == 0.0) {
      ++zeros;
    } else {
      CHECK(p >= s.low);
      CHECK(p <= s.high);
    }
  }
  CHECK(std::abs(zeros / 4000.0 - s.clean_frac) <= 0.03);
  s.low = 0.6;
  CHECK_THROWS_AS(s.Validate(), ConfigError);
  CHECK_THROWS_AS(HandcraftedPolicy(0.0), ConfigError);
}

}  // namespace
}  // namespace dialrl
