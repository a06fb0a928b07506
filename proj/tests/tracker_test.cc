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

#include <chrono>
#include <numeric>

#include "doctest.h"
#include "dialrl/tracker.h"
#include "oracles.h"

namespace dialrl {
namespace {

BeliefState WithMass(const Ontology& o, int slot, const std::vector<std::pair<int, double>>& masses) {
  BeliefState b = FreshBelief(o);
  double total = 0.0;
  for (const auto& [v, m] : masses) {
    b.value_mass[slot][v] = m;
    total += m;
  }
  b.not_mentioned[slot] = 1.0 - total;
  return b;
}

double Total(const BeliefState& b, size_t s) {
  return std::accumulate(b.value_mass[s].begin(), b.value_mass[s].end(), b.not_mentioned[s]);
}

TEST_CASE("noiseless and dropping channels") {
  const Ontology o = DefaultOntology();
  Rng rng(1);
  const std::vector<UserAct> acts = {UserAct::Inform("food", o.Values("food")[2]), UserAct::Request("phone")};
  const TurnObservation clean = Corrupt(acts, ErrorModel{}, o, rng);
  REQUIRE(clean.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    REQUIRE(clean[i].size() == 1);
    CHECK(clean[i][0].act == acts[i]);
    CHECK(clean[i][0].score == 1.0);
  }
  ErrorModel drop;
  drop.p_drop = 1.0;
  CHECK(Corrupt(acts, drop, o, rng).empty());
}

TEST_CASE("confusion frequency and score bounds") {
  const Ontology o = DefaultOntology();
  ErrorModel em;
  em.p_confuse = 0.2;
  Rng rng(2);
  const UserAct truth = UserAct::Inform("area", o.Values("area")[1]);
  int correct = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const TurnObservation obs = Corrupt({truth}, em, o, rng);
    REQUIRE(obs.size() == 1);
    double sum = 0.0;
    for (const auto& h : obs[0]) {
      CHECK(h.score > 0.0);
      sum += h.score;
    }
    CHECK(sum <= 1.0 + 1e-12);
    CHECK(obs[0].size() <= static_cast<size_t>(em.nbest_size));
    correct += obs[0][0].act == truth;
  }
  CHECK(std::abs(correct / static_cast<double>(n) - 0.8) <= 0.02);

  Rng a(5), b(5);
  const auto first = Corrupt({truth}, em, o, a);
  const auto second = Corrupt({truth}, em, o, b);
  CHECK(first[0][0].act == second[0][0].act);
  CHECK(first[0][0].score == second[0][0].score);
}

TEST_CASE("belief update rules") {
  const Ontology o = DefaultOntology();
  const int food = o.ConstraintIndex("food");
  const BeliefState fresh = FreshBelief(o);
  const std::string v = o.Values("food")[3];
  const BeliefState b1 = UpdateBelief(fresh, {{{UserAct::Inform("food", v), 1.0}}}, 4, o);
  CHECK(Top2(b1, food).first >= 0.99);
  CHECK(ArgmaxValue(b1, food) == 3);
  CHECK(b1.turn == 1);
  CHECK(b1.db_count == 4);

  const BeliefState empty = UpdateBelief(b1, {}, 4, o);
  CHECK(empty.value_mass == b1.value_mass);
  CHECK(empty.turn == 2);
  for (double p : empty.user_act) CHECK(p == 0.0);

  const std::string w = o.Values("food")[0];
  BeliefState c = UpdateBelief(fresh, {{{UserAct::Inform("food", v), 0.7}}}, 0, o);
  c = UpdateBelief(c, {{{UserAct::Inform("food", w), 0.7}}}, 0, o);
  CHECK(c.value_mass[food][0] > c.value_mass[food][3]);

  const BeliefState r = UpdateBelief(fresh, {{{UserAct::Request("phone"), 0.6}}}, 0, o);
  CHECK(r.request[o.RequestIndex("phone")] == doctest::Approx(0.6));
  CHECK(r.user_act[static_cast<int>(UserActType::kRequest)] == doctest::Approx(0.6));
}

TEST_CASE("belief normalization under arbitrary noisy sequences") {
  const Ontology o = DefaultOntology();
  ErrorModel em;
  em.p_confuse = 0.4;
  em.p_drop = 0.1;
  Rng rng(3);
  for (int d = 0; d < 200; ++d) {
    BeliefState b = FreshBelief(o);
    for (int t = 0; t < 15; ++t) {
      const std::string& slot = o.constraint_slots[UniformInt(rng, 3)];
      const auto& values = o.Values(slot);
      const std::vector<UserAct> acts = {UserAct::Inform(slot, values[UniformInt(rng, static_cast<int>(values.size()))]),
                                         UserAct::Make(Bernoulli(rng, 0.5) ? UserActType::kAffirm : UserActType::kNegate)};
      const SystemAct ctx = SystemAct::ExplConf(o, slot, values[0]);
      b = UpdateBelief(b, Corrupt(acts, em, o, rng), 3, o, &ctx);
      for (size_t s = 0; s < b.value_mass.size(); ++s) {
        CHECK(std::abs(Total(b, s) - 1.0) <= 1e-9);
        for (double m : b.value_mass[s]) CHECK((m >= 0.0 && m <= 1.0));
      }
    }
  }
}

TEST_CASE("top2") {
  const Ontology o = DefaultOntology();
  const int food = o.ConstraintIndex("food");
  const BeliefState b = WithMass(o, food, {{2, 0.85}, {5, 0.1}});
  CHECK(Top2(b, food).first == doctest::Approx(0.85));
  CHECK(Top2(b, food).second == doctest::Approx(0.1));
  CHECK(Top2(FreshBelief(o), food) == std::pair<double, double>{0.0, 0.0});
  const BeliefState single = WithMass(o, food, {{1, 0.6}});
  CHECK(Top2(single, food) == std::pair<double, double>{0.6, 0.0});
}

TEST_CASE("summary grid examples") {
  CHECK(NearestConstraintGrid(0.85, 0.1) == 1);
  CHECK(NearestConstraintGrid(0.0, 0.0) == 4);
  CHECK(NearestRequestGrid(0.95) == 0);
  const Ontology o = DefaultOntology();
  const int food = o.ConstraintIndex("food");
  BeliefState b = WithMass(o, food, {{2, 0.85}, {5, 0.1}});
  const Features f = Summarize(b);
  CHECK(f.size() == kSummarySize);
  CHECK(f.sum() == kSummaryBlocks);
  const Features block = f.segment(food * kSummaryBlockSize, kSummaryBlockSize);
  CHECK(block == (Features(5) << 0, 1, 0, 0, 0).finished());
}

TEST_CASE("summarize equals the brute-force grid oracle") {
  const Ontology o = DefaultOntology();
  Rng rng(4);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 10000; ++i) {
    const BeliefState b = oracle::RandomBelief(o, rng);
    const Features f = Summarize(b);
    REQUIRE(f == oracle::BruteSummary(b));
    for (int k = 0; k < kSummaryBlocks; ++k) CHECK(f.segment(k * kSummaryBlockSize, kSummaryBlockSize).sum() == 1.0);
  }
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}

TEST_CASE("original feature vector layout") {
  const Ontology o = DefaultOntology();
  BeliefState b = FreshBelief(o);
  Features f = VectorizeOriginal(b);
  CHECK(f.size() == 31);
  CHECK(f.isZero());
  b.turn = 15;
  b.db_count = 40;
  f = VectorizeOriginal(b);
  CHECK(f(kTurnFeature) == doctest::Approx(0.5));
  CHECK(f(kDbFeature) == 1.0);
  CHECK(OriginalLayout(o).size() == 31);
  CHECK(SummaryLayout(o).size() == static_cast<size_t>(kSummarySize));
}

}  // namespace
}  // namespace dialrl
