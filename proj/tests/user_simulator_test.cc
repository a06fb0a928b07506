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

#include "doctest.h"
#include "dialrl/errors.h"
#include "dialrl/user_simulator.h"

namespace dialrl {
namespace {

struct Fixture {
  Ontology ontology = DefaultOntology();
  UserConfig cfg;
  UserGoal goal;
  Fixture() {
    cfg.p_multi_act = 0.0;
    goal.constraints = {{"area", Value("area", 0)}, {"food", Value("food", 1)}, {"pricerange", Value("pricerange", 2)}};
    goal.requests = {"phone", "address"};
  }
  std::string Value(const std::string& slot, int i) const { return ontology.Values(slot)[i]; }
  SystemAct MatchingOffer() const {
    return SystemAct::Offer(ontology, {{"name", "r1"},
                                       {"area", goal.constraints.at("area")},
                                       {"food", goal.constraints.at("food")},
                                       {"pricerange", goal.constraints.at("pricerange")}});
  }
};

int Count(const Agenda& agenda, UserActType type) {
  int n = 0;
  for (const auto& a : agenda.items()) n += a.type == type;
  return n;
}

TEST_CASE("agenda seeding") {
  Fixture f;
  Rng rng(1);
  const UserState s = InitUser(f.ontology, f.goal, f.cfg, rng);
  CHECK(Count(s.agenda, UserActType::kInform) == 3);
  CHECK(Count(s.agenda, UserActType::kRequest) == 2);
  CHECK(Count(s.agenda, UserActType::kBye) == 1);
  CHECK(s.agenda.items().front().type == UserActType::kBye);
  for (const auto& a : s.agenda.items()) {
    if (a.type == UserActType::kInform) CHECK(f.goal.constraints.at(*a.slot) == *a.value);
    if (a.type == UserActType::kRequest) CHECK(f.goal.requests.count(*a.slot) == 1);
  }
  Rng r1(9), r2(9);
  CHECK(InitUser(f.ontology, f.goal, f.cfg, r1).agenda.items() == InitUser(f.ontology, f.goal, f.cfg, r2).agenda.items());

  UserGoal no_requests = f.goal;
  no_requests.requests.clear();
  CHECK_THROWS_AS(InitUser(f.ontology, no_requests, f.cfg, rng), DomainError);
}

TEST_CASE("response rules") {
  Fixture f;
  Rng rng(2);
  UserState s = InitUser(f.ontology, f.goal, f.cfg, rng);
  CHECK(Respond(s, SystemAct::Request(f.ontology, "food"), f.ontology, f.cfg, rng) ==
        std::vector<UserAct>{UserAct::Inform("food", f.goal.constraints.at("food"))});
  CHECK(Respond(s, SystemAct::Select(f.ontology, "area", f.Value("area", 3), f.Value("area", 4)), f.ontology, f.cfg,
                rng) == std::vector<UserAct>{UserAct::Inform("area", f.goal.constraints.at("area"))});
  CHECK(Respond(s, SystemAct::ExplConf(f.ontology, "area", f.goal.constraints.at("area")), f.ontology, f.cfg, rng) ==
        std::vector<UserAct>{UserAct::Make(UserActType::kAffirm)});
  CHECK(Respond(s, SystemAct::ExplConf(f.ontology, "pricerange", f.Value("pricerange", 0)), f.ontology, f.cfg,
                rng) == std::vector<UserAct>{UserAct::Make(UserActType::kNegate),
                                             UserAct::Inform("pricerange", f.goal.constraints.at("pricerange"))});
  const auto last = s.last_acts;
  CHECK(Respond(s, SystemAct::Repeat(), f.ontology, f.cfg, rng) == last);
}

TEST_CASE("offers, requests and satisfaction") {
  Fixture f;
  Rng rng(3);
  UserState s = InitUser(f.ontology, f.goal, f.cfg, rng);
  CHECK_FALSE(IsSatisfied(s));
  SystemAct offer = f.MatchingOffer();
  offer.payload["address"] = "1 Main St";
  const auto reply = Respond(s, offer, f.ontology, f.cfg, rng);
  CHECK(reply == std::vector<UserAct>{UserAct::Request("phone")});
  CHECK_FALSE(IsSatisfied(s));
  offer.payload["phone"] = "555";
  const auto done = Respond(s, offer, f.ontology, f.cfg, rng);
  CHECK(done == std::vector<UserAct>{UserAct::Make(UserActType::kThankYou), UserAct::Make(UserActType::kBye)});
  CHECK(IsSatisfied(s));
  CHECK_THROWS_AS(Respond(s, offer, f.ontology, f.cfg, rng), UsageError);
}

TEST_CASE("hang-up rules") {
  Fixture f;
  Rng rng(4);
  UserState s = InitUser(f.ontology, f.goal, f.cfg, rng);
  CHECK_FALSE(CheckHangup(s, f.MatchingOffer()));
  SystemAct wrong_price = f.MatchingOffer();
  wrong_price.payload["pricerange"] = f.Value("pricerange", 0);
  CHECK(CheckHangup(s, wrong_price));
  SystemAct missing = f.MatchingOffer();
  missing.payload.erase("food");
  CHECK(CheckHangup(s, missing));

  Respond(s, wrong_price, f.ontology, f.cfg, rng);
  CHECK(s.hung_up);
  CHECK_FALSE(IsSatisfied(s));
  CHECK_THROWS_AS(Respond(s, f.MatchingOffer(), f.ontology, f.cfg, rng), UsageError);
  CHECK_FALSE(IsSatisfied(s));
}

TEST_CASE("request for a slot outside the goal") {
  Fixture f;
  f.goal.constraints.erase("pricerange");
  Rng rng(5);
  UserState s = InitUser(f.ontology, f.goal, f.cfg, rng);
  const auto reply = Respond(s, SystemAct::Request(f.ontology, "pricerange"), f.ontology, f.cfg, rng);
  REQUIRE(reply.size() == 2);
  CHECK(reply[0].type == UserActType::kNegate);
  CHECK(reply[1].type == UserActType::kInform);
  CHECK(f.goal.constraints.at(*reply[1].slot) == *reply[1].value);
}

TEST_CASE("cooperative policy terminates within the turn bound for every seed") {
  Fixture f;
  f.cfg.p_multi_act = 0.3;
  const Database db = GenerateDatabase(f.ontology, 150, 7);
  GoalConfig gc;
  for (uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const UserGoal goal = SampleGoal(f.ontology, db, rng, gc);
    UserState s = InitUser(f.ontology, goal, f.cfg, rng);
    const int bound = 2 * static_cast<int>(goal.constraints.size() + goal.requests.size()) + 3;
    int turns = 0;
    for (const auto& slot : f.ontology.constraint_slots) {
      if (!goal.constraints.count(slot)) continue;
      const auto reply = Respond(s, SystemAct::Request(f.ontology, slot), f.ontology, f.cfg, rng);
      ++turns;
      for (const auto& a : reply) {
        if (a.type == UserActType::kInform) CHECK(goal.constraints.at(*a.slot) == *a.value);
      }
    }
    const Restaurant r = Query(f.ontology, db, goal.constraints).front();
    std::map<std::string, std::string> payload = {{"name", r.name}};
    for (const auto& [slot, value] : goal.constraints) payload[slot] = value;
    while (!s.finished && turns < bound) {
      const auto reply = Respond(s, SystemAct::Offer(f.ontology, payload), f.ontology, f.cfg, rng);
      ++turns;
      for (const auto& a : reply) {
        if (a.type == UserActType::kRequest) payload[*a.slot] = r.Field(*a.slot);
      }
    }
    CHECK(IsSatisfied(s));
    CHECK(turns <= bound);
  }
}

TEST_CASE("user configuration validation") {
  UserConfig cfg;
  cfg.p_multi_act = 1.2;
  CHECK_THROWS_AS(cfg.Validate(), ConfigError);
}

}  // namespace
}  // namespace dialrl
