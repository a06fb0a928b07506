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

#include "dialrl/environment.h"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <set>

#include "dialrl/errors.h"

namespace dialrl {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kNumOriginalActions> kOriginalNames = {
    "offer",       "select-area",     "select-food",         "select-pricerange",
    "request-area", "request-food",   "request-pricerange",  "expl-conf-area",
    "expl-conf-food", "expl-conf-pricerange", "repeat"};

// Fills the two select candidates, padding with leading ontology values when
// the tracker has fewer than two hypotheses.
std::pair<std::string, std::string> SelectValues(const BeliefState& belief, const Ontology& ontology, int slot) {
  const auto& name = ontology.constraint_slots[slot];
  const auto& vals = ontology.Values(name);
  std::vector<int> picks;
  for (int v : {ArgmaxValue(belief, slot), SecondValue(belief, slot)}) {
    if (v >= 0) picks.push_back(v);
  }
  for (int v = 0; picks.size() < 2 && v < static_cast<int>(vals.size()); ++v) {
    if (std::find(picks.begin(), picks.end(), v) == picks.end()) picks.push_back(v);
  }
  return {vals[picks[0]], vals[picks[1]]};
}

std::string ConfirmValue(const BeliefState& belief, const Ontology& ontology, int slot) {
  const auto& name = ontology.constraint_slots[slot];
  const int v = ArgmaxValue(belief, slot);
  return ontology.Values(name)[v >= 0 ? v : 0];
}

int MinMaxSlot(const BeliefState& belief, int slots) {
  int best = 0;
  double best_p = std::numeric_limits<double>::infinity();
  for (int s = 0; s < slots; ++s) {
    const double p1 = Top2(belief, s).first;
    if (p1 < best_p) {
      best_p = p1;
      best = s;
    }
  }
  return best;
}

}  // namespace

std::string_view ToString(ActionSpace space) { return space == ActionSpace::kSummary ? "summary" : "original"; }

ActionSpace ParseActionSpace(std::string_view name) {
  if (name == "summary") return ActionSpace::kSummary;
  if (name == "original") return ActionSpace::kOriginal;
  throw ConfigError("unknown action space '" + std::string(name) + "'");
}

int NumActions(ActionSpace space) {
  return space == ActionSpace::kSummary ? kNumSummaryActions : kNumOriginalActions;
}

int FeatureSize(ActionSpace space) { return space == ActionSpace::kSummary ? kSummarySize : kOriginalSize; }

std::vector<std::string> FeatureLayout(ActionSpace space, const Ontology& ontology) {
  return space == ActionSpace::kSummary ? SummaryLayout(ontology) : OriginalLayout(ontology);
}

std::string_view ActionName(ActionSpace space, int action) {
  if (action < 0 || action >= NumActions(space)) throw DomainError("action index out of range");
  if (space == ActionSpace::kSummary) return ToString(static_cast<SystemActType>(action));
  return kOriginalNames[action];
}

int ParseActionName(ActionSpace space, std::string_view name) {
  for (int a = 0; a < NumActions(space); ++a) {
    if (ActionName(space, a) == name) return a;
  }
  throw ConfigError("unknown " + std::string(ToString(space)) + " action '" + std::string(name) + "'");
}

void EnvConfig::Validate(const Ontology& ontology) const {
  if (max_turns <= 0) throw ConfigError("env.max_turns must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("env.gamma outside [0,1]");
  if (!(confirm_threshold > 0.0 && confirm_threshold <= 1.0)) throw ConfigError("env.confirm_threshold outside (0,1]");
  if (!(inform_request_threshold >= 0.0 && inform_request_threshold <= 1.0)) {
    throw ConfigError("env.inform_request_threshold outside [0,1]");
  }
  if (db_size <= 0) throw ConfigError("env.db_size must be positive");
  goal.Validate(ontology);
  user.Validate();
  error.Validate();
}

std::optional<SystemAct> MakeOffer(const BeliefState& belief, const Ontology& ontology, const Database& db,
                                   const EnvConfig& cfg) {
  const auto understood = UnderstoodConstraints(belief, ontology);
  const Restaurant* match = nullptr;
  for (const auto& r : db) {
    bool ok = true;
    for (const auto& [slot, value] : understood) {
      if (r.Field(slot) != value) {
        ok = false;
        break;
      }
    }
    if (ok) {
      match = &r;
      break;
    }
  }
  if (!match) return std::nullopt;
  std::map<std::string, std::string> payload = understood;
  payload["name"] = match->name;
  for (int r = 0; r < ontology.num_requests(); ++r) {
    const auto& slot = ontology.request_slots[r];
    if (belief.request[r] >= cfg.inform_request_threshold && !payload.count(slot)) {
      payload[slot] = match->Field(slot);
    }
  }
  return SystemAct::Offer(ontology, std::move(payload));
}

SystemAct RealizeSummaryAct(SystemActType type, const BeliefState& belief, const Ontology& ontology,
                            const Database& db, const EnvConfig& cfg) {
  const int slots = ontology.num_constraints();
  switch (type) {
    case SystemActType::kRequest:
      return SystemAct::Request(ontology, ontology.constraint_slots[MinMaxSlot(belief, slots)]);
    case SystemActType::kExplConf: {
      int best = -1;
      double best_p = -1.0;
      for (int s = 0; s < slots; ++s) {
        const double p1 = Top2(belief, s).first;
        if (p1 < cfg.confirm_threshold && p1 > best_p) {
          best_p = p1;
          best = s;
        }
      }
      if (best < 0) best = MinMaxSlot(belief, slots);
      return SystemAct::ExplConf(ontology, ontology.constraint_slots[best], ConfirmValue(belief, ontology, best));
    }
    case SystemActType::kSelect: {
      int best = 0;
      double best_gap = std::numeric_limits<double>::infinity();
      for (int s = 0; s < slots; ++s) {
        const auto [p1, p2] = Top2(belief, s);
        if (p1 - p2 < best_gap) {
          best_gap = p1 - p2;
          best = s;
        }
      }
      auto [v1, v2] = SelectValues(belief, ontology, best);
      return SystemAct::Select(ontology, ontology.constraint_slots[best], v1, v2);
    }
    case SystemActType::kOffer: {
      if (auto offer = MakeOffer(belief, ontology, db, cfg)) return *offer;
      return SystemAct::CannotHelp();
    }
    case SystemActType::kRepeat:
      return SystemAct::Repeat();
    case SystemActType::kCannotHelp:
      return SystemAct::CannotHelp();
    case SystemActType::kConfirmDomain:
      return SystemAct::ConfirmDomain();
  }
  throw DomainError("unknown summary act");
}

SystemAct RealizeOriginalAct(int action, const BeliefState& belief, const Ontology& ontology,
                             const Database& db, const EnvConfig& cfg) {
  namespace oa = original_action;
  if (action < 0 || action >= kNumOriginalActions) throw DomainError("action index out of range");
  if (action == oa::kOffer) {
    if (auto offer = MakeOffer(belief, ontology, db, cfg)) return *offer;
    return SystemAct::Repeat(/*apology=*/true);
  }
  if (action == oa::kRepeat) return SystemAct::Repeat();
  if (action <= oa::kSelectPricerange) {
    const int slot = action - oa::kSelectArea;
    auto [v1, v2] = SelectValues(belief, ontology, slot);
    return SystemAct::Select(ontology, ontology.constraint_slots[slot], v1, v2);
  }
  if (action <= oa::kRequestPricerange) {
    return SystemAct::Request(ontology, ontology.constraint_slots[action - oa::kRequestArea]);
  }
  const int slot = action - oa::kExplConfArea;
  return SystemAct::ExplConf(ontology, ontology.constraint_slots[slot], ConfirmValue(belief, ontology, slot));
}

Features ExtractFeatures(ActionSpace space, const BeliefState& belief) {
  return space == ActionSpace::kSummary ? Summarize(belief) : VectorizeOriginal(belief);
}

// ---------------------------------------------------------------------------
// DialogueEnv

DialogueEnv::DialogueEnv(EnvConfig cfg, std::shared_ptr<const Ontology> ontology,
                         std::shared_ptr<const Database> db)
    : cfg_(std::move(cfg)), ontology_(std::move(ontology)), db_(std::move(db)) {
  cfg_.Validate(*ontology_);
  if (ontology_->num_constraints() != 3 || ontology_->num_requests() != 8) {
    throw ConfigError("the dialogue environment needs 3 constraint and 8 request slots");
  }
  belief_ = FreshBelief(*ontology_);
}

Features DialogueEnv::Reset(Rng& rng) {
  return ResetWithGoal(SampleGoal(*ontology_, *db_, rng, cfg_.goal), rng);
}

Features DialogueEnv::ResetWithGoal(const UserGoal& goal, Rng& rng) {
  user_ = InitUser(*ontology_, goal, cfg_.user, rng);
  belief_ = FreshBelief(*ontology_);
  last_turn_ = TurnInfo{};
  active_ = true;
  return CurrentFeatures();
}

SystemAct DialogueEnv::Realize(int action) const {
  if (cfg_.space == ActionSpace::kSummary) {
    if (action < 0 || action >= kNumSummaryActions) throw DomainError("action index out of range");
    return RealizeSummaryAct(static_cast<SystemActType>(action), belief_, *ontology_, *db_, cfg_);
  }
  return RealizeOriginalAct(action, belief_, *ontology_, *db_, cfg_);
}

Features DialogueEnv::CurrentFeatures() const { return ExtractFeatures(cfg_.space, belief_); }

int MatchCount(const BeliefState& belief, const Ontology& ontology, const Database& db) {
  const auto understood = UnderstoodConstraints(belief, ontology);
  if (understood.empty()) return 0;
  return CountMatches(ontology, db, understood);
}

StepResult DialogueEnv::Step(int action, Rng& rng) {
  if (!active_) throw UsageError("step called without an active episode");
  if (action < 0 || action >= NumActions()) throw DomainError("action index " + std::to_string(action) + " out of range");

  last_turn_.system_act = Realize(action);
  last_turn_.user_acts = Respond(user_, last_turn_.system_act, *ontology_, cfg_.user, rng);
  last_turn_.observed = Corrupt(last_turn_.user_acts, cfg_.error, *ontology_, rng);
  BeliefState next = UpdateBelief(belief_, last_turn_.observed, 0, *ontology_, &last_turn_.system_act);
  next.db_count = MatchCount(next, *ontology_, *db_);
  belief_ = std::move(next);

  StepResult out;
  out.success = user_.finished && IsSatisfied(user_);
  out.reward = cfg_.turn_penalty;
  if (out.success) {
    out.reward += cfg_.success_reward;
    out.terminal = true;
  } else if (user_.hung_up || user_.finished || belief_.turn >= cfg_.max_turns) {
    out.reward += cfg_.failure_reward;
    out.terminal = true;
  }
  out.features = CurrentFeatures();
  active_ = !out.terminal;
  return out;
}

int DialogueEnv::GroundedConstraints() const {
  int n = 0;
  for (const auto& [slot, value] : user_.goal.constraints) {
    const int s = ontology_->ConstraintIndex(slot);
    const int v = ArgmaxValue(belief_, s);
    if (v >= 0 && ontology_->Values(slot)[v] == value && Top2(belief_, s).first >= kGroundedThreshold) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeLog RunEpisode(DialogueEnv& env, Policy& policy, Rng& rng) {
  EpisodeLog log;
  policy.BeginEpisode();
  Features features = env.Reset(rng);
  log.goal = env.user().goal;
  const auto* reporter = dynamic_cast<const BlunderReporting*>(&policy);
  while (true) {
    TurnRecord rec;
    rec.turn = env.turn();
    rec.features = features;
    rec.action = policy.Act(PolicyInput{features, env.belief(), env.config().space}, rng);
    rec.blunder = reporter && reporter->last_was_blunder();
    const StepResult res = env.Step(rec.action, rng);
    rec.system_act = env.last_turn().system_act.ToString();
    rec.user_acts = env.last_turn().user_acts;
    rec.observed = env.last_turn().observed;
    rec.reward = res.reward;
    rec.next_features = res.features;
    rec.terminal = res.terminal;
    rec.success = res.success;
    log.total_return += res.reward;
    log.turns.push_back(std::move(rec));
    features = res.features;
    if (res.terminal) {
      log.success = res.success;
      break;
    }
  }
  log.length = static_cast<int>(log.turns.size());
  log.hung_up = env.user().hung_up;
  log.timeout = !log.success && !log.hung_up;
  log.goal_constraints = static_cast<int>(log.goal.constraints.size());
  log.grounded_constraints = env.GroundedConstraints();
  return log;
}

double TerminalComponent(const EpisodeLog& log, const EnvConfig& cfg) {
  if (log.success) return cfg.success_reward;
  if (log.hung_up || log.timeout) return cfg.failure_reward;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Serialization

json FeaturesToJson(const Features& f) {
  json out = json::array();
  for (Eigen::Index i = 0; i < f.size(); ++i) out.push_back(f(i));
  return out;
}

Features FeaturesFromJson(const json& j) {
  Features f(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) f(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return f;
}

json EpisodeHeader(ActionSpace space, const Ontology& ontology) {
  return {{"schema", "dialrl.episodes"},
          {"version", 1},
          {"space", std::string(ToString(space))},
          {"feature_layout", FeatureLayout(space, ontology)}};
}

json DialogueRecord(const EpisodeLog& log, int index) {
  json goal;
  goal["constraints"] = log.goal.constraints;
  goal["requests"] = log.goal.requests;
  return {{"record", "dialogue"},
          {"dialogue", index},
          {"goal", goal},
          {"return", log.total_return},
          {"success", log.success},
          {"hung_up", log.hung_up},
          {"timeout", log.timeout},
          {"length", log.length},
          {"goal_constraints", log.goal_constraints},
          {"grounded_constraints", log.grounded_constraints}};
}

void ReadDialogueRecord(const json& j, EpisodeLog& log) {
  log.goal.constraints = j.at("goal").at("constraints").get<std::map<std::string, std::string>>();
  log.goal.requests = j.at("goal").at("requests").get<std::set<std::string>>();
  log.total_return = j.at("return").get<double>();
  log.success = j.at("success").get<bool>();
  log.hung_up = j.at("hung_up").get<bool>();
  log.timeout = j.at("timeout").get<bool>();
  log.length = j.at("length").get<int>();
  log.goal_constraints = j.at("goal_constraints").get<int>();
  log.grounded_constraints = j.at("grounded_constraints").get<int>();
}

json TurnRecordJson(const TurnRecord& t, int index) {
  json user = json::array();
  for (const auto& a : t.user_acts) user.push_back(a.ToString());
  json observed = json::array();
  for (const auto& list : t.observed) {
    json hyps = json::array();
    for (const auto& h : list) hyps.push_back(json::array({h.act.ToString(), h.score}));
    observed.push_back(std::move(hyps));
  }
  return {{"record", "turn"},
          {"dialogue", index},
          {"turn", t.turn},
          {"features", FeaturesToJson(t.features)},
          {"action", t.action},
          {"act", t.system_act},
          {"user_acts", user},
          {"observed", observed},
          {"reward", t.reward},
          {"next_features", FeaturesToJson(t.next_features)},
          {"terminal", t.terminal},
          {"success", t.success},
          {"blunder", t.blunder}};
}

TurnRecord TurnRecordFromJson(const json& j) {
  TurnRecord t;
  t.turn = j.at("turn").get<int>();
  t.features = FeaturesFromJson(j.at("features"));
  t.action = j.at("action").get<int>();
  t.system_act = j.at("act").get<std::string>();
  for (const auto& a : j.at("user_acts")) t.user_acts.push_back(ParseUserAct(a.get<std::string>()));
  for (const auto& list : j.at("observed")) {
    NBestList hyps;
    for (const auto& h : list) hyps.push_back({ParseUserAct(h.at(0).get<std::string>()), h.at(1).get<double>()});
    t.observed.push_back(std::move(hyps));
  }
  t.reward = j.at("reward").get<double>();
  t.next_features = FeaturesFromJson(j.at("next_features"));
  t.terminal = j.at("terminal").get<bool>();
  t.success = j.at("success").get<bool>();
  t.blunder = j.value("blunder", false);
  return t;
}

void WriteEpisodes(const std::vector<EpisodeLog>& logs, ActionSpace space, const Ontology& ontology,
                   std::ostream& out) {
  out << EpisodeHeader(space, ontology).dump() << '\n';
  for (size_t i = 0; i < logs.size(); ++i) {
    out << DialogueRecord(logs[i], static_cast<int>(i)).dump() << '\n';
    for (const auto& t : logs[i].turns) out << TurnRecordJson(t, static_cast<int>(i)).dump() << '\n';
  }
}

}  // namespace dialrl
