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

#ifndef DIALRL_ONTOLOGY_H_
#define DIALRL_ONTOLOGY_H_

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialrl/rng.h"

namespace dialrl {

// Restaurant-domain definition: slots, value inventories and the act
// vocabulary shared by the simulator, the tracker and the dialogue manager.
//
// Orderings are canonical. Constraint and request slots keep the domain order
// (area, food, pricerange / area, food, address, name, pricerange, postcode,
// signature, phone) and value lists are sorted lexicographically, so feature
// indices derived from an ontology are stable across runs.
struct Ontology {
  std::vector<std::string> constraint_slots;
  std::vector<std::string> request_slots;
  // Keyed by constraint slot.
  std::map<std::string, std::vector<std::string>> values;

  int num_constraints() const { return static_cast<int>(constraint_slots.size()); }
  int num_requests() const { return static_cast<int>(request_slots.size()); }

  // -1 when the slot is not a constraint (request) slot.
  int ConstraintIndex(std::string_view slot) const;
  int RequestIndex(std::string_view slot) const;
  bool IsConstraintSlot(std::string_view slot) const { return ConstraintIndex(slot) >= 0; }
  bool IsRequestSlot(std::string_view slot) const { return RequestIndex(slot) >= 0; }

  // Throws DomainError for a non-constraint slot.
  const std::vector<std::string>& Values(std::string_view slot) const;
  // -1 when the value is not listed for the slot.
  int ValueIndex(std::string_view slot, std::string_view value) const;

  // Throws ConfigError naming the first violated invariant.
  void Validate() const;
};

// Appendix-style restaurant ontology with five or more values per constraint.
Ontology DefaultOntology();

// Line-delimited JSON: a header {"schema":"dialrl.ontology","version":1}
// followed by records {"constraint_slots":[...]}, {"request_slots":[...]} and
// {"values":{slot:[...]}}. Throws ParseError naming the offending field.
Ontology LoadOntology(std::istream& in);
Ontology LoadOntologyFile(const std::string& path);
void SaveOntology(const Ontology& ontology, std::ostream& out);

// ---------------------------------------------------------------------------
// Dialogue acts.

enum class SystemActType {
  kOffer,
  kSelect,
  kRequest,
  kExplConf,
  kRepeat,
  kCannotHelp,
  kConfirmDomain,
};
inline constexpr int kNumSystemActTypes = 7;

// The fifteen user act types, in the same order as the user-act feature block.
enum class UserActType {
  kDeny,
  kNull,
  kReqMore,
  kConfirm,
  kAck,
  kAffirm,
  kRequest,
  kInform,
  kThankYou,
  kRepeat,
  kReqAlts,
  kNegate,
  kBye,
  kHello,
  kRestart,
};
inline constexpr int kNumUserActTypes = 15;

std::string_view ToString(SystemActType type);
std::string_view ToString(UserActType type);
std::optional<UserActType> ParseUserActType(std::string_view name);
std::optional<SystemActType> ParseSystemActType(std::string_view name);

// A system act. Construct through the named factories, which enforce the
// per-type field invariants:
//   request / expl-conf / select carry exactly one constraint slot
//   (select carries two candidate values, expl-conf one);
//   offer carries a restaurant name and at most one value per constraint
//   slot (the constraints understood by the system) plus any informed
//   request-slot values;
//   repeat / cannothelp / confirmdomain carry nothing.
struct SystemAct {
  SystemActType type = SystemActType::kRepeat;
  std::optional<std::string> slot;
  std::vector<std::string> values;
  std::map<std::string, std::string> payload;
  // Set on the repeat act that stands in for a no-match offer in the
  // original action space.
  bool apology = false;

  static SystemAct Offer(const Ontology& ontology, std::map<std::string, std::string> payload);
  static SystemAct Select(const Ontology& ontology, std::string slot, std::string v1, std::string v2);
  static SystemAct Request(const Ontology& ontology, std::string slot);
  static SystemAct ExplConf(const Ontology& ontology, std::string slot, std::string value);
  static SystemAct Repeat(bool apology = false);
  static SystemAct CannotHelp();
  static SystemAct ConfirmDomain();

  std::string ToString() const;
  bool operator==(const SystemAct&) const = default;
};

// A user act. inform and confirm carry slot+value, request carries a slot,
// every other type carries neither.
struct UserAct {
  UserActType type = UserActType::kNull;
  std::optional<std::string> slot;
  std::optional<std::string> value;

  static UserAct Make(UserActType type);
  static UserAct Inform(std::string slot, std::string value);
  static UserAct Request(std::string slot);
  static UserAct Confirm(std::string slot, std::string value);

  // Throws DomainError if the fields do not match the type.
  void Validate() const;
  std::string ToString() const;
  bool operator==(const UserAct&) const = default;
};

// Parses the act syntax used in logs and the chat loop, e.g. "inform(food=thai)",
// "request(phone)", "affirm()", "bye". Throws ParseError.
UserAct ParseUserAct(std::string_view text);

// ---------------------------------------------------------------------------
// Database.

inline constexpr std::array<std::string_view, 4> kInformableFields = {
    "address", "postcode", "signature", "phone"};

struct Restaurant {
  std::string name;
  // One value per constraint slot plus address, postcode, signature, phone.
  std::map<std::string, std::string> fields;

  const std::string& Field(std::string_view slot) const;
};

using Database = std::vector<Restaurant>;

// Synthetic database of `size` restaurants with constraint values drawn
// uniformly from the ontology. Deterministic in `seed`.
Database GenerateDatabase(const Ontology& ontology, int size, uint64_t seed);

// Returns the restaurants matching every given constraint, in database order.
// Empty constraints select the whole database. Unknown slot -> DomainError.
Database Query(const Ontology& ontology, const Database& db,
               const std::map<std::string, std::string>& constraints);
int CountMatches(const Ontology& ontology, const Database& db,
                 const std::map<std::string, std::string>& constraints);

// Line-delimited JSON, header {"schema":"dialrl.database","version":1}, one
// restaurant object per line with "name" and one key per field.
Database LoadDatabase(const Ontology& ontology, std::istream& in);
void SaveDatabase(const Database& db, std::ostream& out);

// ---------------------------------------------------------------------------
// User goals.

struct UserGoal {
  std::map<std::string, std::string> constraints;
  std::set<std::string> requests;

  bool operator==(const UserGoal&) const = default;
};

struct GoalConfig {
  // Probability that each constraint slot (canonical order) is part of the goal.
  std::vector<double> constraint_inclusion = {1.0, 1.0, 1.0};
  // request_count_probs[k] = P(k + 1 requests).
  std::vector<double> request_count_probs = {0.5, 0.35, 0.15};
  // Request slots that may be drawn. Empty means every request slot that is
  // not already a constraint of the goal.
  std::vector<std::string> request_pool = {"address", "phone", "postcode", "signature"};
  // Fraction of goals resampled until at least one restaurant matches.
  double satisfiable_frac = 1.0;

  void Validate(const Ontology& ontology) const;
};

// Throws ConfigError on an invalid configuration.
UserGoal SampleGoal(const Ontology& ontology, const Database& db, Rng& rng, const GoalConfig& cfg);

// Throws DomainError if the goal violates the UserGoal invariants.
void ValidateGoal(const Ontology& ontology, const UserGoal& goal);

std::string ToString(const UserGoal& goal);

}  // namespace dialrl

#endif  // DIALRL_ONTOLOGY_H_
