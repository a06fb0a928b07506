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

#include "dialrl/tracker.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dialrl/errors.h"

namespace dialrl {
namespace {

constexpr std::array<UserActType, 5> kFillerActs = {UserActType::kNull, UserActType::kAck, UserActType::kHello,
                                                    UserActType::kThankYou, UserActType::kRepeat};

UserAct Confuse(const UserAct& act, const Ontology& ontology, Rng& rng) {
  switch (act.type) {
    case UserActType::kInform: {
      if (ontology.IsConstraintSlot(*act.slot)) {
        const auto& vals = ontology.Values(*act.slot);
        if (vals.size() > 1) {
          const int own = ontology.ValueIndex(*act.slot, *act.value);
          int pick = UniformInt(rng, static_cast<int>(vals.size()) - 1);
          if (own >= 0 && pick >= own) ++pick;
          return UserAct::Inform(*act.slot, vals[pick]);
        }
      }
      break;
    }
    case UserActType::kRequest: {
      const auto& slots = ontology.request_slots;
      if (slots.size() > 1) {
        const int own = ontology.RequestIndex(*act.slot);
        int pick = UniformInt(rng, static_cast<int>(slots.size()) - 1);
        if (own >= 0 && pick >= own) ++pick;
        return UserAct::Request(slots[pick]);
      }
      break;
    }
    case UserActType::kAffirm:
      return UserAct::Make(UserActType::kNegate);
    case UserActType::kNegate:
      return UserAct::Make(UserActType::kAffirm);
    default:
      break;
  }
  UserActType pick;
  do {
    pick = kFillerActs[UniformInt(rng, kFillerActs.size())];
  } while (pick == act.type);
  return UserAct::Make(pick);
}

double Sum(const std::vector<double>& v, double extra) { return std::accumulate(v.begin(), v.end(), extra); }

void ApplyInform(BeliefState& b, int slot, int value, double c) {
  auto& mass = b.value_mass[slot];
  for (auto& m : mass) m *= (1.0 - c);
  b.not_mentioned[slot] *= (1.0 - c);
  mass[value] += c;
}

void ApplyNegation(BeliefState& b, int slot, int value, double c) {
  const double moved = b.value_mass[slot][value] * c;
  b.value_mass[slot][value] -= moved;
  b.not_mentioned[slot] += moved;
}

}  // namespace

void ErrorModel::Validate() const {
  if (!(p_confuse >= 0.0 && p_confuse <= 1.0)) throw ConfigError("error.p_confuse outside [0,1]");
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw ConfigError("error.p_drop outside [0,1]");
  if (nbest_size < 1 || nbest_size > 5) throw ConfigError("error.nbest_size must lie in [1,5]");
  if (!(concentration > 0.0)) throw ConfigError("error.concentration must be positive");
}

TurnObservation Corrupt(const std::vector<UserAct>& acts, const ErrorModel& em, const Ontology& ontology,
                        Rng& rng) {
  TurnObservation obs;
  for (const auto& act : acts) {
    if (Bernoulli(rng, em.p_drop)) continue;
    if (em.noiseless()) {
      obs.push_back({{act, 1.0}});
      continue;
    }
    const bool correct_top = !Bernoulli(rng, em.p_confuse);
    std::vector<UserAct> items;
    if (correct_top) items.push_back(act);
    const size_t wanted = static_cast<size_t>(em.nbest_size);
    for (int attempt = 0; items.size() < wanted && attempt < 16; ++attempt) {
      if (!correct_top && items.size() == 1) {
        items.push_back(act);
        continue;
      }
      UserAct candidate = Confuse(act, ontology, rng);
      if (std::find(items.begin(), items.end(), candidate) == items.end()) items.push_back(std::move(candidate));
    }

    NBestList list;
    const double u = Uniform01(rng);
    const double beta = correct_top ? std::pow(u, 1.0 / em.concentration)
                                    : 1.0 - std::pow(u, 1.0 / em.concentration);
    double score = 0.5 + 0.5 * beta;
    double remaining = 1.0 - score;
    list.push_back({items[0], score});
    for (size_t i = 1; i < items.size(); ++i) {
      score = remaining * UniformReal(rng, 0.5, 1.0);
      remaining -= score;
      list.push_back({items[i], score});
    }
    obs.push_back(std::move(list));
  }
  return obs;
}

BeliefState FreshBelief(const Ontology& ontology) {
  BeliefState b;
  for (const auto& slot : ontology.constraint_slots) {
    b.value_mass.emplace_back(ontology.Values(slot).size(), 0.0);
    b.not_mentioned.push_back(1.0);
  }
  b.request.assign(ontology.request_slots.size(), 0.0);
  return b;
}

BeliefState UpdateBelief(const BeliefState& belief, const TurnObservation& obs, int db_count,
                         const Ontology& ontology, const SystemAct* context) {
  BeliefState b = belief;
  b.user_act.fill(0.0);

  int confirm_slot = -1, confirm_value = -1;
  if (context && context->type == SystemActType::kExplConf) {
    confirm_slot = ontology.ConstraintIndex(*context->slot);
    confirm_value = ontology.ValueIndex(*context->slot, context->values.front());
  }

  for (const auto& list : obs) {
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      const UserAct& act = it->act;
      const double c = std::clamp(it->score, 0.0, 1.0);
      auto& agg = b.user_act[static_cast<int>(act.type)];
      agg = std::min(1.0, agg + c);
      switch (act.type) {
        case UserActType::kInform: {
          const int s = ontology.ConstraintIndex(*act.slot);
          const int v = s >= 0 ? ontology.ValueIndex(*act.slot, *act.value) : -1;
          if (v >= 0) ApplyInform(b, s, v, c);
          break;
        }
        case UserActType::kRequest: {
          const int r = ontology.RequestIndex(*act.slot);
          if (r >= 0) b.request[r] = std::max(b.request[r], c);
          break;
        }
        case UserActType::kAffirm:
          if (confirm_value >= 0) ApplyInform(b, confirm_slot, confirm_value, c);
          break;
        case UserActType::kNegate:
          if (confirm_value >= 0) ApplyNegation(b, confirm_slot, confirm_value, c);
          break;
        default:
          break;
      }
    }
  }

  for (size_t s = 0; s < b.value_mass.size(); ++s) {
    const double total = Sum(b.value_mass[s], b.not_mentioned[s]);
    if (!(total > 0.0)) throw NumericsError("belief for slot " + ontology.constraint_slots[s] + " lost all mass");
    // Renormalize to wash out floating-point drift.
    for (auto& m : b.value_mass[s]) m /= total;
    b.not_mentioned[s] /= total;
  }
  b.turn = belief.turn + 1;
  b.db_count = db_count;
  return b;
}

std::pair<double, double> Top2(const BeliefState& belief, int slot) {
  double p1 = 0.0, p2 = 0.0;
  for (double m : belief.value_mass.at(slot)) {
    if (m > p1) {
      p2 = p1;
      p1 = m;
    } else if (m > p2) {
      p2 = m;
    }
  }
  return {p1, p2};
}

int ArgmaxValue(const BeliefState& belief, int slot) {
  const auto& mass = belief.value_mass.at(slot);
  int best = -1;
  double best_mass = 0.0;
  for (size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] > best_mass) {
      best_mass = mass[i];
      best = static_cast<int>(i);
    }
  }
  return best;
}

int SecondValue(const BeliefState& belief, int slot) {
  const int first = ArgmaxValue(belief, slot);
  if (first < 0) return -1;
  const auto& mass = belief.value_mass.at(slot);
  int best = -1;
  double best_mass = 0.0;
  for (size_t i = 0; i < mass.size(); ++i) {
    if (static_cast<int>(i) != first && mass[i] > best_mass) {
      best_mass = mass[i];
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::map<std::string, std::string> UnderstoodConstraints(const BeliefState& belief, const Ontology& ontology) {
  std::map<std::string, std::string> out;
  for (int s = 0; s < ontology.num_constraints(); ++s) {
    const int v = ArgmaxValue(belief, s);
    if (v >= 0) {
      const auto& slot = ontology.constraint_slots[s];
      out[slot] = ontology.Values(slot)[v];
    }
  }
  return out;
}

int NearestConstraintGrid(double p1, double p2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < Grids::kConstraint.size(); ++i) {
    const double d1 = p1 - Grids::kConstraint[i].first;
    const double d2 = p2 - Grids::kConstraint[i].second;
    const double d = d1 * d1 + d2 * d2;
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int NearestRequestGrid(double p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < Grids::kRequest.size(); ++i) {
    const double d = std::abs(p - Grids::kRequest[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int PhaseBucket(int turn) {
  if (turn <= 1) return 0;
  if (turn <= 3) return 1;
  if (turn <= 5) return 2;
  if (turn <= 9) return 3;
  return 4;
}

Features Summarize(const BeliefState& belief) {
  const int constraints = static_cast<int>(belief.value_mass.size());
  const int requests = static_cast<int>(belief.request.size());
  if (constraints + requests + 1 != kSummaryBlocks) {
    throw ShapeError("summary space needs 3 constraint and 8 request slots");
  }
  Features out = Features::Zero(kSummarySize);
  int block = 0;
  for (int s = 0; s < constraints; ++s, ++block) {
    const auto [p1, p2] = Top2(belief, s);
    out(block * kSummaryBlockSize + NearestConstraintGrid(p1, p2)) = 1.0;
  }
  for (int r = 0; r < requests; ++r, ++block) {
    out(block * kSummaryBlockSize + NearestRequestGrid(belief.request[r])) = 1.0;
  }
  out(block * kSummaryBlockSize + PhaseBucket(belief.turn)) = 1.0;
  return out;
}

Features VectorizeOriginal(const BeliefState& belief) {
  if (belief.value_mass.size() != 3 || belief.request.size() != 8) {
    throw ShapeError("original space needs 3 constraint and 8 request slots");
  }
  Features out = Features::Zero(kOriginalSize);
  for (int s = 0; s < 3; ++s) {
    const auto [p1, p2] = Top2(belief, s);
    out(2 * s) = p1;
    out(2 * s + 1) = p2;
  }
  for (int r = 0; r < 8; ++r) out(6 + r) = belief.request[r];
  for (int a = 0; a < kNumUserActTypes; ++a) out(kUserActOffset + a) = belief.user_act[a];
  out(kTurnFeature) = belief.turn / kTurnScale;
  out(kDbFeature) = std::min(belief.db_count, kDbCap) / static_cast<double>(kDbCap);
  return out;
}

std::vector<std::string> SummaryLayout(const Ontology& ontology) {
  std::vector<std::string> names;
  for (const auto& slot : ontology.constraint_slots) {
    for (int g = 0; g < kSummaryBlockSize; ++g) names.push_back("constraint." + slot + ".g" + std::to_string(g));
  }
  for (const auto& slot : ontology.request_slots) {
    for (int g = 0; g < kSummaryBlockSize; ++g) names.push_back("request." + slot + ".g" + std::to_string(g));
  }
  for (int g = 0; g < kSummaryBlockSize; ++g) names.push_back("phase.b" + std::to_string(g));
  return names;
}

std::vector<std::string> OriginalLayout(const Ontology& ontology) {
  std::vector<std::string> names;
  for (const auto& slot : ontology.constraint_slots) {
    names.push_back("constraint." + slot + ".p1");
    names.push_back("constraint." + slot + ".p2");
  }
  for (const auto& slot : ontology.request_slots) names.push_back("request." + slot);
  for (int a = 0; a < kNumUserActTypes; ++a) {
    names.push_back("user_act." + std::string(ToString(static_cast<UserActType>(a))));
  }
  names.push_back("turn/30");
  names.push_back("db_count/20");
  return names;
}

std::string DescribeBelief(const BeliefState& belief, const Ontology& ontology) {
  std::ostringstream out;
  out.precision(3);
  out << "turn " << belief.turn << ", db " << belief.db_count << "\n";
  for (int s = 0; s < ontology.num_constraints(); ++s) {
    const auto& slot = ontology.constraint_slots[s];
    out << "  " << slot << ":";
    const int v1 = ArgmaxValue(belief, s);
    const int v2 = SecondValue(belief, s);
    if (v1 >= 0) out << " (" << ontology.Values(slot)[v1] << ", " << belief.value_mass[s][v1] << ")";
    if (v2 >= 0) out << " (" << ontology.Values(slot)[v2] << ", " << belief.value_mass[s][v2] << ")";
    out << " (not_mentioned, " << belief.not_mentioned[s] << ")\n";
  }
  out << "  requests:";
  for (int r = 0; r < ontology.num_requests(); ++r) {
    if (belief.request[r] > 0.0) out << " " << ontology.request_slots[r] << "=" << belief.request[r];
  }
  out << "\n";
  return out.str();
}

}  // namespace dialrl
