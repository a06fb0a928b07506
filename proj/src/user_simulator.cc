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

#include "dialrl/user_simulator.h"

#include <algorithm>

#include "dialrl/errors.h"

namespace dialrl {

void UserConfig::Validate() const {
  for (double p : {p_multi_act, p_null, p_reqalts_on_bad_offer, p_reqmore, p_restart}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("user probabilities must lie in [0,1]");
  }
}

std::optional<UserAct> Agenda::Pop() {
  if (stack_.empty()) return std::nullopt;
  UserAct top = std::move(stack_.back());
  stack_.pop_back();
  return top;
}

int Agenda::Remove(UserActType type, const std::string& slot) {
  const auto before = stack_.size();
  std::erase_if(stack_, [&](const UserAct& a) { return a.type == type && a.slot && *a.slot == slot; });
  return static_cast<int>(before - stack_.size());
}

const UserAct* Agenda::TopInform() const {
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    if (it->type == UserActType::kInform) return &*it;
  }
  return nullptr;
}

std::vector<std::string> Agenda::PendingRequests() const {
  std::vector<std::string> out;
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    if (it->type == UserActType::kRequest) out.push_back(*it->slot);
  }
  return out;
}

UserState InitUser(const Ontology& ontology, const UserGoal& goal, const UserConfig& cfg, Rng& rng) {
  ValidateGoal(ontology, goal);
  cfg.Validate();
  UserState state;
  state.goal = goal;
  state.agenda.Push(UserAct::Make(UserActType::kBye));
  // Requests in canonical order, first one on top.
  for (auto it = ontology.request_slots.rbegin(); it != ontology.request_slots.rend(); ++it) {
    if (goal.requests.count(*it)) state.agenda.Push(UserAct::Request(*it));
  }
  std::vector<std::pair<std::string, std::string>> informs(goal.constraints.begin(), goal.constraints.end());
  std::shuffle(informs.begin(), informs.end(), rng);
  for (auto& [slot, value] : informs) state.agenda.Push(UserAct::Inform(slot, value));
  return state;
}

bool CheckHangup(const UserState& state, const SystemAct& sys) {
  if (sys.type != SystemActType::kOffer) return false;
  for (const auto& [slot, value] : state.goal.constraints) {
    auto it = sys.payload.find(slot);
    if (it == sys.payload.end() || it->second != value) return true;
  }
  return false;
}

bool IsSatisfied(const UserState& state) {
  if (state.hung_up || !state.offered) return false;
  for (const auto& slot : state.goal.requests) {
    if (!state.received.count(slot)) return false;
  }
  return true;
}

void NoteSystemAct(UserState& state, const SystemAct& sys) {
  if (sys.type != SystemActType::kOffer || state.hung_up) return;
  if (CheckHangup(state, sys)) {
    state.hung_up = true;
    return;
  }
  const std::string& name = sys.payload.at("name");
  if (!state.offered || *state.offered != name) {
    state.received.clear();
    state.offered = name;
  }
  for (const auto& [slot, value] : sys.payload) {
    if (state.goal.requests.count(slot)) state.received[slot] = value;
  }
}

namespace {

// Answers a question about a goal constraint, dropping the matching inform
// from the agenda.
UserAct InformGoal(UserState& state, const std::string& slot) {
  state.agenda.Remove(UserActType::kInform, slot);
  return UserAct::Inform(slot, state.goal.constraints.at(slot));
}

std::optional<UserAct> PopTopInform(UserState& state) {
  const UserAct* top = state.agenda.TopInform();
  if (!top) return std::nullopt;
  UserAct act = *top;
  state.agenda.Remove(UserActType::kInform, *act.slot);
  return act;
}

}  // namespace

std::vector<UserAct> Respond(UserState& state, const SystemAct& sys, const Ontology& ontology,
                             const UserConfig& cfg, Rng& rng) {
  (void)ontology;
  if (state.hung_up) throw UsageError("user has hung up");
  if (state.finished) throw UsageError("user has already said bye");

  std::vector<UserAct> acts;
  bool may_volunteer = true;
  const auto& goal = state.goal;
  const bool silent = Bernoulli(rng, cfg.p_null);

  switch (sys.type) {
    case SystemActType::kOffer: {
      NoteSystemAct(state, sys);
      if (state.hung_up) {
        acts = {UserAct::Make(UserActType::kBye)};
        state.last_acts = acts;
        return acts;
      }
      if (IsSatisfied(state)) {
        acts = {UserAct::Make(UserActType::kThankYou), UserAct::Make(UserActType::kBye)};
        state.finished = true;
        state.last_acts = acts;
        return acts;
      }
      may_volunteer = false;
      if (Bernoulli(rng, cfg.p_reqmore)) {
        acts.push_back(UserAct::Make(UserActType::kReqMore));
        break;
      }
      std::vector<std::string> outstanding;
      for (const auto& slot : state.agenda.PendingRequests()) {
        if (!state.received.count(slot)) outstanding.push_back(slot);
      }
      acts.push_back(UserAct::Request(outstanding.front()));
      if (outstanding.size() > 1 && Bernoulli(rng, cfg.p_multi_act)) {
        acts.push_back(UserAct::Request(outstanding[1]));
      }
      break;
    }
    case SystemActType::kRequest: {
      const std::string& slot = *sys.slot;
      if (goal.constraints.count(slot)) {
        acts.push_back(InformGoal(state, slot));
      } else {
        acts.push_back(UserAct::Make(UserActType::kNegate));
        if (auto other = PopTopInform(state)) acts.push_back(*other);
        may_volunteer = false;
      }
      break;
    }
    case SystemActType::kExplConf: {
      const std::string& slot = *sys.slot;
      auto it = goal.constraints.find(slot);
      if (it == goal.constraints.end()) {
        acts.push_back(UserAct::Make(UserActType::kNegate));
      } else if (it->second == sys.values.front()) {
        state.agenda.Remove(UserActType::kInform, slot);
        acts.push_back(UserAct::Make(UserActType::kAffirm));
      } else {
        acts.push_back(UserAct::Make(UserActType::kNegate));
        acts.push_back(InformGoal(state, slot));
        may_volunteer = false;
      }
      break;
    }
    case SystemActType::kSelect: {
      const std::string& slot = *sys.slot;
      if (goal.constraints.count(slot)) {
        acts.push_back(InformGoal(state, slot));
      } else {
        acts.push_back(UserAct::Make(UserActType::kNegate));
      }
      break;
    }
    case SystemActType::kRepeat: {
      may_volunteer = false;
      if (!state.last_acts.empty()) {
        acts = state.last_acts;
      } else if (auto top = PopTopInform(state)) {
        acts.push_back(*top);
      } else {
        acts.push_back(UserAct::Make(UserActType::kNull));
      }
      break;
    }
    case SystemActType::kCannotHelp: {
      std::vector<std::string> slots;
      for (const auto& [slot, _] : goal.constraints) slots.push_back(slot);
      acts.push_back(InformGoal(state, slots[UniformInt(rng, static_cast<int>(slots.size()))]));
      break;
    }
    case SystemActType::kConfirmDomain:
      acts.push_back(UserAct::Make(UserActType::kAffirm));
      break;
  }

  if (Bernoulli(rng, cfg.p_restart)) {
    acts = {UserAct::Make(UserActType::kRestart)};
    may_volunteer = false;
  }
  if (may_volunteer && acts.size() == 1 && Bernoulli(rng, cfg.p_multi_act)) {
    const UserAct* top = state.agenda.TopInform();
    if (top && (!acts[0].slot || *acts[0].slot != *top->slot)) {
      acts.push_back(*PopTopInform(state));
    }
  }
  if (silent) acts = {UserAct::Make(UserActType::kNull)};
  state.last_acts = acts;
  return acts;
}

}  // namespace dialrl
