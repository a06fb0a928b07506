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

#ifndef DIALRL_USER_SIMULATOR_H_
#define DIALRL_USER_SIMULATOR_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialrl/ontology.h"
#include "dialrl/rng.h"

namespace dialrl {

struct UserConfig {
  // Probability of volunteering one more pending act in the same turn.
  double p_multi_act = 0.2;
  // Probability that the user says nothing in a turn.
  double p_null = 0.0;
  // Reserved; accepted offers never trigger reqalts.
  double p_reqalts_on_bad_offer = 0.0;
  // Table-2 coverage hooks, all off by default.
  double p_reqmore = 0.0;
  double p_restart = 0.0;

  void Validate() const;
};

// Stack of pending user acts; back() is the top.
class Agenda {
 public:
  void Push(UserAct act) { stack_.push_back(std::move(act)); }
  std::optional<UserAct> Pop();
  const UserAct* Top() const { return stack_.empty() ? nullptr : &stack_.back(); }
  // Removes every act equal in type and slot; returns how many were removed.
  int Remove(UserActType type, const std::string& slot);
  // The topmost inform, or nullptr.
  const UserAct* TopInform() const;
  // Pending request acts from the top down.
  std::vector<std::string> PendingRequests() const;
  bool empty() const { return stack_.empty(); }
  size_t size() const { return stack_.size(); }
  // Bottom-to-top view.
  const std::vector<UserAct>& items() const { return stack_; }

 private:
  std::vector<UserAct> stack_;
};

struct UserState {
  UserGoal goal;
  Agenda agenda;
  // Request slot -> value received for the accepted restaurant.
  std::map<std::string, std::string> received;
  // Name of the restaurant currently on offer (accepted, non-violating).
  std::optional<std::string> offered;
  bool hung_up = false;
  // Set once the user has closed an accepted dialogue with bye.
  bool finished = false;
  std::vector<UserAct> last_acts;
};

// Seeds the agenda: bye at the bottom, then the goal requests, then the goal
// constraint informs in random order on top.
UserState InitUser(const Ontology& ontology, const UserGoal& goal, const UserConfig& cfg, Rng& rng);

// True iff the offer contradicts or omits some goal constraint.
bool CheckHangup(const UserState& state, const SystemAct& sys);

// True iff a non-violating offer was accepted and every goal request has been
// received for it.
bool IsSatisfied(const UserState& state);

// Updates offer bookkeeping (acceptance, received slots, hang-up) for a system
// act without producing a response. Used by interactive sessions where an
// operator plays the user.
void NoteSystemAct(UserState& state, const SystemAct& sys);

// One user turn: 1 or 2 acts. Throws UsageError after a hang-up or bye.
std::vector<UserAct> Respond(UserState& state, const SystemAct& sys, const Ontology& ontology,
                             const UserConfig& cfg, Rng& rng);

}  // namespace dialrl

#endif  // DIALRL_USER_SIMULATOR_H_
