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

#include "dialrl/ontology.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dialrl/errors.h"
#include "json.hpp"

namespace dialrl {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kNumSystemActTypes> kSystemActNames = {
    "offer", "select", "request", "expl-conf", "repeat", "cannothelp", "confirmdomain"};

constexpr std::array<std::string_view, kNumUserActTypes> kUserActNames = {
    "deny",     "null",   "reqmore", "confirm", "ack",    "affirm", "request", "inform",
    "thankyou", "repeat", "reqalts", "negate",  "bye",    "hello",  "restart"};

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void RequireConstraint(const Ontology& ontology, const std::string& slot, const char* act) {
  if (!ontology.IsConstraintSlot(slot)) {
    throw DomainError(std::string(act) + " requires a constraint slot, got '" + slot + "'");
  }
}

void RequireValue(const Ontology& ontology, const std::string& slot, const std::string& value) {
  if (ontology.ValueIndex(slot, value) < 0) {
    throw DomainError("value '" + value + "' is not listed for slot '" + slot + "'");
  }
}

json ParseLine(const std::string& line, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

void CheckHeader(const json& header, const char* schema) {
  if (!header.is_object() || header.value("schema", "") != schema) {
    throw ParseError(std::string("missing header for schema ") + schema);
  }
  if (header.value("version", 0) != 1) {
    throw ParseError(std::string("unsupported ") + schema + " version");
  }
}

std::vector<std::string> StringList(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ParseError("field '" + field + "' must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ontology

int Ontology::ConstraintIndex(std::string_view slot) const {
  for (size_t i = 0; i < constraint_slots.size(); ++i) {
    if (constraint_slots[i] == slot) return static_cast<int>(i);
  }
  return -1;
}

int Ontology::RequestIndex(std::string_view slot) const {
  for (size_t i = 0; i < request_slots.size(); ++i) {
    if (request_slots[i] == slot) return static_cast<int>(i);
  }
  return -1;
}

const std::vector<std::string>& Ontology::Values(std::string_view slot) const {
  auto it = values.find(std::string(slot));
  if (it == values.end()) throw DomainError("no values for slot '" + std::string(slot) + "'");
  return it->second;
}

int Ontology::ValueIndex(std::string_view slot, std::string_view value) const {
  auto it = values.find(std::string(slot));
  if (it == values.end()) return -1;
  auto pos = std::lower_bound(it->second.begin(), it->second.end(), value);
  if (pos == it->second.end() || *pos != value) return -1;
  return static_cast<int>(pos - it->second.begin());
}

void Ontology::Validate() const {
  if (constraint_slots.empty()) throw ConfigError("constraint_slots: empty");
  if (request_slots.empty()) throw ConfigError("request_slots: empty");
  for (const auto& slot : constraint_slots) {
    auto it = values.find(slot);
    if (it == values.end() || it->second.empty()) {
      throw ConfigError("values." + slot + ": missing or empty");
    }
    if (!std::is_sorted(it->second.begin(), it->second.end()) ||
        std::adjacent_find(it->second.begin(), it->second.end()) != it->second.end()) {
      throw ConfigError("values." + slot + ": must be sorted and unique");
    }
  }
  for (const auto& [slot, list] : values) {
    if (!IsConstraintSlot(slot)) throw ConfigError("values." + slot + ": not a constraint slot");
  }
}

Ontology DefaultOntology() {
  Ontology o;
  o.constraint_slots = {"area", "food", "pricerange"};
  o.request_slots = {"area", "food", "address", "name", "pricerange", "postcode", "signature", "phone"};
  o.values["area"] = {"centre", "east", "north", "south", "west"};
  o.values["food"] = {"british", "chinese", "european", "french", "indian",
                      "italian", "japanese", "korean", "spanish", "thai"};
  o.values["pricerange"] = {"budget", "cheap", "expensive", "luxury", "moderate"};
  return o;
}

Ontology LoadOntology(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::optional<std::vector<std::string>> constraints, requests;
  std::optional<json> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    json rec = ParseLine(line, line_no);
    if (!have_header) {
      CheckHeader(rec, "dialrl.ontology");
      have_header = true;
      continue;
    }
    if (!rec.is_object() || rec.size() != 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected a single-field record");
    }
    const std::string key = rec.begin().key();
    if (key == "constraint_slots") {
      constraints = StringList(rec[key], key);
    } else if (key == "request_slots") {
      requests = StringList(rec[key], key);
    } else if (key == "values") {
      values = rec[key];
    } else {
      throw ParseError("unknown field '" + key + "'");
    }
  }
  if (!have_header) throw ParseError("missing header for schema dialrl.ontology");
  if (!constraints) throw ParseError("missing field 'constraint_slots'");
  if (!requests) throw ParseError("missing field 'request_slots'");
  if (!values || !values->is_object()) throw ParseError("missing field 'values'");

  Ontology o;
  o.constraint_slots = *constraints;
  o.request_slots = *requests;
  for (const auto& slot : o.constraint_slots) {
    if (!values->contains(slot)) throw ParseError("missing field 'values." + slot + "'");
    auto list = StringList((*values)[slot], "values." + slot);
    if (list.empty()) throw ParseError("field 'values." + slot + "' is empty");
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    o.values[slot] = std::move(list);
  }
  for (const auto& [key, _] : values->items()) {
    if (!o.IsConstraintSlot(key)) throw ParseError("field 'values." + key + "' is not a constraint slot");
  }
  try {
    o.Validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return o;
}

Ontology LoadOntologyFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open ontology file " + path);
  return LoadOntology(in);
}

void SaveOntology(const Ontology& ontology, std::ostream& out) {
  out << json{{"schema", "dialrl.ontology"}, {"version", 1}}.dump() << '\n';
  out << json{{"constraint_slots", ontology.constraint_slots}}.dump() << '\n';
  out << json{{"request_slots", ontology.request_slots}}.dump() << '\n';
  json values = json::object();
  for (const auto& [slot, list] : ontology.values) values[slot] = list;
  out << json{{"values", values}}.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Acts

std::string_view ToString(SystemActType type) { return kSystemActNames[static_cast<int>(type)]; }
std::string_view ToString(UserActType type) { return kUserActNames[static_cast<int>(type)]; }

std::optional<UserActType> ParseUserActType(std::string_view name) {
  for (int i = 0; i < kNumUserActTypes; ++i) {
    if (kUserActNames[i] == name) return static_cast<UserActType>(i);
  }
  return std::nullopt;
}

std::optional<SystemActType> ParseSystemActType(std::string_view name) {
  for (int i = 0; i < kNumSystemActTypes; ++i) {
    if (kSystemActNames[i] == name) return static_cast<SystemActType>(i);
  }
  return std::nullopt;
}

SystemAct SystemAct::Offer(const Ontology& ontology, std::map<std::string, std::string> payload) {
  auto name = payload.find("name");
  if (name == payload.end() || name->second.empty()) throw DomainError("offer requires a restaurant name");
  for (const auto& [slot, value] : payload) {
    if (slot == "name") continue;
    if (ontology.IsConstraintSlot(slot)) {
      RequireValue(ontology, slot, value);
    } else if (!ontology.IsRequestSlot(slot)) {
      throw DomainError("offer payload has unknown slot '" + slot + "'");
    }
  }
  SystemAct act;
  act.type = SystemActType::kOffer;
  act.payload = std::move(payload);
  return act;
}

SystemAct SystemAct::Select(const Ontology& ontology, std::string slot, std::string v1, std::string v2) {
  RequireConstraint(ontology, slot, "select");
  RequireValue(ontology, slot, v1);
  RequireValue(ontology, slot, v2);
  if (v1 == v2) throw DomainError("select requires two distinct values");
  SystemAct act;
  act.type = SystemActType::kSelect;
  act.slot = std::move(slot);
  act.values = {std::move(v1), std::move(v2)};
  return act;
}

SystemAct SystemAct::Request(const Ontology& ontology, std::string slot) {
  RequireConstraint(ontology, slot, "request");
  SystemAct act;
  act.type = SystemActType::kRequest;
  act.slot = std::move(slot);
  return act;
}

SystemAct SystemAct::ExplConf(const Ontology& ontology, std::string slot, std::string value) {
  RequireConstraint(ontology, slot, "expl-conf");
  RequireValue(ontology, slot, value);
  SystemAct act;
  act.type = SystemActType::kExplConf;
  act.slot = std::move(slot);
  act.values = {std::move(value)};
  return act;
}

SystemAct SystemAct::Repeat(bool apology) {
  SystemAct act;
  act.type = SystemActType::kRepeat;
  act.apology = apology;
  return act;
}

SystemAct SystemAct::CannotHelp() {
  SystemAct act;
  act.type = SystemActType::kCannotHelp;
  return act;
}

SystemAct SystemAct::ConfirmDomain() {
  SystemAct act;
  act.type = SystemActType::kConfirmDomain;
  return act;
}

std::string SystemAct::ToString() const {
  std::string out(apology ? std::string_view("apology") : dialrl::ToString(type));
  out += '(';
  switch (type) {
    case SystemActType::kOffer: {
      out += "name=" + payload.at("name");
      for (const auto& [k, v] : payload) {
        if (k != "name") out += "," + k + "=" + v;
      }
      break;
    }
    case SystemActType::kSelect:
      out += *slot + "=" + values[0] + "|" + values[1];
      break;
    case SystemActType::kExplConf:
      out += *slot + "=" + values[0];
      break;
    case SystemActType::kRequest:
      out += *slot;
      break;
    default:
      break;
  }
  out += ')';
  return out;
}

UserAct UserAct::Make(UserActType type) {
  UserAct act;
  act.type = type;
  act.Validate();
  return act;
}

UserAct UserAct::Inform(std::string slot, std::string value) {
  UserAct act;
  act.type = UserActType::kInform;
  act.slot = std::move(slot);
  act.value = std::move(value);
  act.Validate();
  return act;
}

UserAct UserAct::Request(std::string slot) {
  UserAct act;
  act.type = UserActType::kRequest;
  act.slot = std::move(slot);
  act.Validate();
  return act;
}

UserAct UserAct::Confirm(std::string slot, std::string value) {
  UserAct act;
  act.type = UserActType::kConfirm;
  act.slot = std::move(slot);
  act.value = std::move(value);
  act.Validate();
  return act;
}

void UserAct::Validate() const {
  const bool needs_slot =
      type == UserActType::kInform || type == UserActType::kConfirm || type == UserActType::kRequest;
  const bool needs_value = type == UserActType::kInform || type == UserActType::kConfirm;
  if (needs_slot != slot.has_value() || (slot && slot->empty())) {
    throw DomainError(std::string(dialrl::ToString(type)) +
                      (needs_slot ? " requires a slot" : " must not carry a slot"));
  }
  if (needs_value != value.has_value() || (value && value->empty())) {
    throw DomainError(std::string(dialrl::ToString(type)) +
                      (needs_value ? " requires a value" : " must not carry a value"));
  }
}

std::string UserAct::ToString() const {
  std::string out(dialrl::ToString(type));
  out += '(';
  if (slot) out += *slot;
  if (value) out += "=" + *value;
  out += ')';
  return out;
}

UserAct ParseUserAct(std::string_view text) {
  const std::string s = Trim(text);
  const auto open = s.find('(');
  std::string name = Trim(s.substr(0, open));
  std::string args;
  if (open != std::string::npos) {
    if (s.back() != ')') throw ParseError("unbalanced parentheses in '" + s + "'");
    args = Trim(s.substr(open + 1, s.size() - open - 2));
  }
  auto type = ParseUserActType(name);
  if (!type) throw ParseError("unknown user act '" + name + "'");
  UserAct act;
  act.type = *type;
  if (!args.empty()) {
    const auto eq = args.find('=');
    act.slot = Trim(args.substr(0, eq));
    if (eq != std::string::npos) act.value = Trim(args.substr(eq + 1));
  }
  try {
    act.Validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return act;
}

// ---------------------------------------------------------------------------
// Database

const std::string& Restaurant::Field(std::string_view slot) const {
  if (slot == "name") return name;
  auto it = fields.find(std::string(slot));
  if (it == fields.end()) throw DomainError("restaurant " + name + " has no field '" + std::string(slot) + "'");
  return it->second;
}

Database GenerateDatabase(const Ontology& ontology, int size, uint64_t seed) {
  if (size <= 0) throw ConfigError("database size must be positive");
  Rng rng(seed);
  Database db;
  db.reserve(size);
  static constexpr std::array<std::string_view, 8> kStreets = {
      "mill road", "regent street", "hills road", "king street",
      "bridge street", "trumpington street", "castle hill", "newmarket road"};
  static constexpr std::array<std::string_view, 8> kDishes = {
      "noodle soup", "roast duck", "lamb curry", "seafood paella",
      "mushroom risotto", "beef stew", "tofu stir fry", "fish pie"};
  for (int i = 0; i < size; ++i) {
    Restaurant r;
    char name[32];
    std::snprintf(name, sizeof(name), "restaurant_%03d", i);
    r.name = name;
    for (const auto& slot : ontology.constraint_slots) {
      const auto& vals = ontology.Values(slot);
      r.fields[slot] = vals[UniformInt(rng, static_cast<int>(vals.size()))];
    }
    r.fields["address"] = std::to_string(1 + UniformInt(rng, 199)) + " " +
                          std::string(kStreets[UniformInt(rng, kStreets.size())]);
    r.fields["postcode"] = "cb" + std::to_string(1 + UniformInt(rng, 5)) + " " +
                           std::to_string(1 + UniformInt(rng, 9)) +
                           static_cast<char>('a' + UniformInt(rng, 26)) +
                           static_cast<char>('a' + UniformInt(rng, 26));
    r.fields["signature"] = std::string(kDishes[UniformInt(rng, kDishes.size())]);
    char phone[16];
    std::snprintf(phone, sizeof(phone), "01223 %06d", UniformInt(rng, 1000000));
    r.fields["phone"] = phone;
    db.push_back(std::move(r));
  }
  return db;
}

Database Query(const Ontology& ontology, const Database& db,
               const std::map<std::string, std::string>& constraints) {
  for (const auto& [slot, _] : constraints) {
    if (!ontology.IsConstraintSlot(slot)) throw DomainError("query on unknown slot '" + slot + "'");
  }
  Database out;
  for (const auto& r : db) {
    bool ok = true;
    for (const auto& [slot, value] : constraints) {
      if (r.Field(slot) != value) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(r);
  }
  return out;
}

int CountMatches(const Ontology& ontology, const Database& db,
                 const std::map<std::string, std::string>& constraints) {
  for (const auto& [slot, _] : constraints) {
    if (!ontology.IsConstraintSlot(slot)) throw DomainError("query on unknown slot '" + slot + "'");
  }
  int n = 0;
  for (const auto& r : db) {
    bool ok = true;
    for (const auto& [slot, value] : constraints) {
      if (r.Field(slot) != value) {
        ok = false;
        break;
      }
    }
    n += ok;
  }
  return n;
}

Database LoadDatabase(const Ontology& ontology, std::istream& in) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  Database db;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    json rec = ParseLine(line, line_no);
    if (!have_header) {
      CheckHeader(rec, "dialrl.database");
      have_header = true;
      continue;
    }
    Restaurant r;
    if (!rec.contains("name") || !rec["name"].is_string()) {
      throw ParseError("line " + std::to_string(line_no) + ": missing field 'name'");
    }
    r.name = rec["name"].get<std::string>();
    for (const auto& slot : ontology.constraint_slots) {
      if (!rec.contains(slot) || !rec[slot].is_string()) {
        throw ParseError("line " + std::to_string(line_no) + ": missing field '" + slot + "'");
      }
      r.fields[slot] = rec[slot].get<std::string>();
      if (ontology.ValueIndex(slot, r.fields[slot]) < 0) {
        throw ParseError("line " + std::to_string(line_no) + ": field '" + slot + "' has unknown value");
      }
    }
    for (auto field : kInformableFields) {
      const std::string key(field);
      if (!rec.contains(key) || !rec[key].is_string()) {
        throw ParseError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
      }
      r.fields[key] = rec[key].get<std::string>();
    }
    db.push_back(std::move(r));
  }
  if (!have_header) throw ParseError("missing header for schema dialrl.database");
  return db;
}

void SaveDatabase(const Database& db, std::ostream& out) {
  out << json{{"schema", "dialrl.database"}, {"version", 1}}.dump() << '\n';
  for (const auto& r : db) {
    json rec;
    rec["name"] = r.name;
    for (const auto& [k, v] : r.fields) rec[k] = v;
    out << rec.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Goals

void GoalConfig::Validate(const Ontology& ontology) const {
  if (static_cast<int>(constraint_inclusion.size()) != ontology.num_constraints()) {
    throw ConfigError("goal.constraint_inclusion must have one entry per constraint slot");
  }
  bool any = false;
  for (double p : constraint_inclusion) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("goal.constraint_inclusion outside [0,1]");
    any |= p > 0.0;
  }
  if (!any) throw ConfigError("goal.constraint_inclusion: at least one slot must be includable");
  if (request_count_probs.empty()) throw ConfigError("goal.request_count_probs is empty");
  double total = 0.0;
  for (double p : request_count_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("goal.request_count_probs outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("goal.request_count_probs must sum to 1");
  if (!(satisfiable_frac >= 0.0 && satisfiable_frac <= 1.0)) {
    throw ConfigError("goal.satisfiable_frac outside [0,1]");
  }
  for (const auto& slot : request_pool) {
    if (!ontology.IsRequestSlot(slot)) throw ConfigError("goal.request_pool: unknown slot '" + slot + "'");
  }
}

void ValidateGoal(const Ontology& ontology, const UserGoal& goal) {
  if (goal.constraints.empty()) throw DomainError("goal needs at least one constraint");
  if (goal.requests.empty()) throw DomainError("goal needs at least one request");
  for (const auto& [slot, value] : goal.constraints) {
    if (!ontology.IsConstraintSlot(slot)) throw DomainError("goal constraint on non-constraint slot " + slot);
    RequireValue(ontology, slot, value);
  }
  for (const auto& slot : goal.requests) {
    if (!ontology.IsRequestSlot(slot)) throw DomainError("goal request on unknown slot " + slot);
  }
}

UserGoal SampleGoal(const Ontology& ontology, const Database& db, Rng& rng, const GoalConfig& cfg) {
  cfg.Validate(ontology);
  const bool must_match = Bernoulli(rng, cfg.satisfiable_frac);
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    UserGoal goal;
    for (int i = 0; i < ontology.num_constraints(); ++i) {
      if (!Bernoulli(rng, cfg.constraint_inclusion[i])) continue;
      const auto& slot = ontology.constraint_slots[i];
      const auto& vals = ontology.Values(slot);
      goal.constraints[slot] = vals[UniformInt(rng, static_cast<int>(vals.size()))];
    }
    if (goal.constraints.empty()) continue;

    std::vector<std::string> pool;
    if (cfg.request_pool.empty()) {
      for (const auto& slot : ontology.request_slots) {
        if (!goal.constraints.count(slot)) pool.push_back(slot);
      }
    } else {
      for (const auto& slot : cfg.request_pool) {
        if (!goal.constraints.count(slot)) pool.push_back(slot);
      }
    }
    if (pool.empty()) throw ConfigError("goal.request_pool leaves nothing to request");
    const int count = std::min<int>(1 + SampleCategorical(rng, cfg.request_count_probs),
                                    static_cast<int>(pool.size()));
    std::shuffle(pool.begin(), pool.end(), rng);
    goal.requests.insert(pool.begin(), pool.begin() + count);

    if (must_match && CountMatches(ontology, db, goal.constraints) == 0) continue;
    return goal;
  }
  throw ConfigError("could not sample a satisfiable goal; database too sparse");
}

std::string ToString(const UserGoal& goal) {
  std::ostringstream out;
  out << "constraints{";
  bool first = true;
  for (const auto& [k, v] : goal.constraints) {
    out << (first ? "" : ",") << k << "=" << v;
    first = false;
  }
  out << "} requests{";
  first = true;
  for (const auto& r : goal.requests) {
    out << (first ? "" : ",") << r;
    first = false;
  }
  out << "}";
  return out.str();
}

}  // namespace dialrl
