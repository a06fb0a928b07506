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

#ifndef DIALRL_ENVIRONMENT_H_
#define DIALRL_ENVIRONMENT_H_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialrl/numerics.h"
#include "dialrl/ontology.h"
#include "dialrl/rng.h"
#include "dialrl/tracker.h"
#include "dialrl/user_simulator.h"
#include "json.hpp"

namespace dialrl {

enum class ActionSpace { kSummary, kOriginal };

std::string_view ToString(ActionSpace space);
ActionSpace ParseActionSpace(std::string_view name);

inline constexpr int kNumSummaryActions = 7;
inline constexpr int kNumOriginalActions = 11;
int NumActions(ActionSpace space);
int FeatureSize(ActionSpace space);
std::vector<std::string> FeatureLayout(ActionSpace space, const Ontology& ontology);

// Indices of the original action space; the order is fixed.
namespace original_action {
inline constexpr int kOffer = 0;
inline constexpr int kSelectArea = 1;
inline constexpr int kSelectFood = 2;
inline constexpr int kSelectPricerange = 3;
inline constexpr int kRequestArea = 4;
inline constexpr int kRequestFood = 5;
inline constexpr int kRequestPricerange = 6;
inline constexpr int kExplConfArea = 7;
inline constexpr int kExplConfFood = 8;
inline constexpr int kExplConfPricerange = 9;
inline constexpr int kRepeat = 10;
}  // namespace original_action

// Summary actions are indexed by SystemActType.
std::string_view ActionName(ActionSpace space, int action);
int ParseActionName(ActionSpace space, std::string_view name);

// A constraint counts as grounded when its argmax is right with at least this mass.
inline constexpr double kGroundedThreshold = 0.7;

struct EnvConfig {
  ActionSpace space = ActionSpace::kOriginal;
  int max_turns = 30;
  double turn_penalty = -0.03;
  double success_reward = 1.0;
  double failure_reward = -1.0;
  // Agent-side discount.
  double gamma = 0.99;
  // Summary expl-conf targets the most certain slot below this mass.
  double confirm_threshold = 0.9;
  // Offers inform every request slot whose probability reaches this value.
  double inform_request_threshold = 0.5;
  int db_size = 150;
  uint64_t db_seed = 7;

  GoalConfig goal;
  UserConfig user;
  ErrorModel error;

  void Validate(const Ontology& ontology) const;
};

struct StepResult {
  Features features;
  double reward = 0.0;
  bool terminal = false;
  bool success = false;
};

struct TurnInfo {
  SystemAct system_act;
  std::vector<UserAct> user_acts;
  TurnObservation observed;
};

// Offer for the understood constraints: argmax value per mentioned slot, the
// first matching restaurant, and every request slot the user probably asked
// for. nullopt when the database has no match.
std::optional<SystemAct> MakeOffer(const BeliefState& belief, const Ontology& ontology, const Database& db,
                                   const EnvConfig& cfg);

// Database matches of the understood constraints; 0 when nothing is understood.
int MatchCount(const BeliefState& belief, const Ontology& ontology, const Database& db);

// Fills in slot information for a summary act with the min-max heuristics:
//   request   -> slot whose most likely value is least certain;
//   expl-conf -> most certain slot strictly below cfg.confirm_threshold, else
//                the request slot;
//   select    -> slot with the smallest gap between its top two values;
//   offer     -> MakeOffer, or cannothelp when nothing matches.
// Ties follow the canonical slot order.
SystemAct RealizeSummaryAct(SystemActType type, const BeliefState& belief, const Ontology& ontology,
                            const Database& db, const EnvConfig& cfg);

// An offer with no database match becomes an apology that the user answers
// like a repeat.
SystemAct RealizeOriginalAct(int action, const BeliefState& belief, const Ontology& ontology,
                             const Database& db, const EnvConfig& cfg);

// Episodic dialogue MDP over tracker beliefs. Not thread-safe; use one
// instance per concurrently running dialogue.
class DialogueEnv {
 public:
  DialogueEnv(EnvConfig cfg, std::shared_ptr<const Ontology> ontology, std::shared_ptr<const Database> db);

  Features Reset(Rng& rng);
  Features ResetWithGoal(const UserGoal& goal, Rng& rng);
  // Throws DomainError for a bad action and UsageError when no episode is active.
  StepResult Step(int action, Rng& rng);

  SystemAct Realize(int action) const;
  Features CurrentFeatures() const;
  int NumActions() const { return dialrl::NumActions(cfg_.space); }

  const EnvConfig& config() const { return cfg_; }
  const Ontology& ontology() const { return *ontology_; }
  const Database& database() const { return *db_; }
  std::shared_ptr<const Ontology> shared_ontology() const { return ontology_; }
  std::shared_ptr<const Database> shared_database() const { return db_; }
  const BeliefState& belief() const { return belief_; }
  const UserState& user() const { return user_; }
  const TurnInfo& last_turn() const { return last_turn_; }
  bool active() const { return active_; }
  int turn() const { return belief_.turn; }
  int GroundedConstraints() const;

 private:

  EnvConfig cfg_;
  std::shared_ptr<const Ontology> ontology_;
  std::shared_ptr<const Database> db_;
  BeliefState belief_;
  UserState user_;
  TurnInfo last_turn_;
  bool active_ = false;
};

Features ExtractFeatures(ActionSpace space, const BeliefState& belief);

struct PolicyInput {
  const Features& features;
  const BeliefState& belief;
  ActionSpace space;
};

// Maps the agent's observable state to an action index.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void BeginEpisode() {}
  virtual int Act(const PolicyInput& input, Rng& rng) = 0;
};

struct TurnRecord {
  int turn = 0;
  Features features;
  int action = 0;
  std::string system_act;
  std::vector<UserAct> user_acts;
  TurnObservation observed;
  double reward = 0.0;
  Features next_features;
  bool terminal = false;
  bool success = false;
  // Set by policies that substitute a random action (corpus generation).
  bool blunder = false;
};

struct EpisodeLog {
  UserGoal goal;
  std::vector<TurnRecord> turns;
  double total_return = 0.0;
  bool success = false;
  bool hung_up = false;
  bool timeout = false;
  int length = 0;
  int goal_constraints = 0;
  int grounded_constraints = 0;
};

// Policies that can report a substituted action for the last Act() call.
class BlunderReporting {
 public:
  virtual ~BlunderReporting() = default;
  virtual bool last_was_blunder() const = 0;
};

EpisodeLog RunEpisode(DialogueEnv& env, Policy& policy, Rng& rng);

// Terminal reward component implied by the flags: +success, -failure or 0.
double TerminalComponent(const EpisodeLog& log, const EnvConfig& cfg);

// Episode-log records, one JSON object per line. A file starts with
//   {"schema":"dialrl.episodes","version":1,"space":...,"feature_layout":[...]}
// and stores each episode as a "dialogue" record followed by its "turn" records.
nlohmann::json EpisodeHeader(ActionSpace space, const Ontology& ontology);
nlohmann::json DialogueRecord(const EpisodeLog& log, int index);
nlohmann::json TurnRecordJson(const TurnRecord& turn, int index);
TurnRecord TurnRecordFromJson(const nlohmann::json& j);
void ReadDialogueRecord(const nlohmann::json& j, EpisodeLog& log);

void WriteEpisodes(const std::vector<EpisodeLog>& logs, ActionSpace space, const Ontology& ontology,
                   std::ostream& out);

nlohmann::json FeaturesToJson(const Features& f);
Features FeaturesFromJson(const nlohmann::json& j);

}  // namespace dialrl

#endif  // DIALRL_ENVIRONMENT_H_
