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

#ifndef DIALRL_TRACKER_H_
#define DIALRL_TRACKER_H_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "dialrl/numerics.h"
#include "dialrl/ontology.h"
#include "dialrl/rng.h"

namespace dialrl {

// Noisy observation channel. Each true user act is deleted with p_drop or
// turned into an n-best list whose top entry is the true act with
// probability 1 - p_confuse. Top scores are drawn as 0.5 + 0.5 * B with
// B ~ Beta(concentration, 1) when the top entry is correct and
// B ~ Beta(1, concentration) when it is a confusion, so confidence carries
// information about correctness.
struct ErrorModel {
  double p_confuse = 0.0;
  double p_drop = 0.0;
  int nbest_size = 2;
  double concentration = 3.0;

  bool noiseless() const { return p_confuse == 0.0 && p_drop == 0.0; }
  void Validate() const;
};

struct Hypothesis {
  UserAct act;
  double score = 0.0;
};

// One scored list per surviving user act, best first.
using NBestList = std::vector<Hypothesis>;
using TurnObservation = std::vector<NBestList>;

TurnObservation Corrupt(const std::vector<UserAct>& acts, const ErrorModel& em, const Ontology& ontology,
                        Rng& rng);

// The tracker's output and the agent's observable state.
struct BeliefState {
  // Per constraint slot: mass on each ontology value ...
  std::vector<std::vector<double>> value_mass;
  // ... and on "not mentioned"; each slot sums to 1.
  std::vector<double> not_mentioned;
  // Per request slot: probability that the user asked for it.
  std::vector<double> request;
  // Per user act type: aggregated hypothesis score this turn.
  std::array<double, kNumUserActTypes> user_act{};
  int turn = 0;
  int db_count = 0;
};

BeliefState FreshBelief(const Ontology& ontology);

// Evidence accumulation. An inform(s, v) hypothesis with score c sets
// mass(v) <- mass(v) (1 - c) + c and scales every other entry of slot s by
// (1 - c). Hypotheses in a list are applied lowest score first. request(s)
// raises the request probability to max(old, c). When `context` is an
// expl-conf(s, v), affirm counts as inform(s, v) and negate moves a fraction
// c of v's mass to not-mentioned. User-act probabilities are replaced by this
// turn's summed scores (capped at 1); the turn counter advances by one.
BeliefState UpdateBelief(const BeliefState& belief, const TurnObservation& obs, int db_count,
                         const Ontology& ontology, const SystemAct* context = nullptr);

// The two largest value masses of a constraint slot (not-mentioned excluded).
std::pair<double, double> Top2(const BeliefState& belief, int slot);
// Most likely value index, or -1 if the slot has no value mass.
int ArgmaxValue(const BeliefState& belief, int slot);
// Second most likely value index, or -1.
int SecondValue(const BeliefState& belief, int slot);

// Constraints understood by the tracker: argmax value of every mentioned slot.
std::map<std::string, std::string> UnderstoodConstraints(const BeliefState& belief, const Ontology& ontology);

// ---------------------------------------------------------------------------
// Summary space: 12 one-hot blocks of 5 = 60 bits. Blocks 0-2 are the
// constraint slots mapped through the constraint grid, blocks 3-10 the request
// slots mapped through the request grid, block 11 the dialogue phase.

struct Grids {
  static constexpr std::array<std::pair<double, double>, 5> kConstraint = {
      {{1.0, 0.0}, {0.8, 0.2}, {0.6, 0.2}, {0.6, 0.4}, {0.4, 0.4}}};
  static constexpr std::array<double, 5> kRequest = {1.0, 0.8, 0.6, 0.4, 0.0};
};

inline constexpr int kSummaryBlocks = 12;
inline constexpr int kSummaryBlockSize = 5;
inline constexpr int kSummarySize = kSummaryBlocks * kSummaryBlockSize;

// Index of the nearest grid entry in Euclidean distance; ties go to the lowest index.
int NearestConstraintGrid(double p1, double p2);
int NearestRequestGrid(double p);
// Phase bucket of the turn counter: [0,1], [2,3], [4,5], [6,9], [10,inf).
int PhaseBucket(int turn);

Features Summarize(const BeliefState& belief);

// ---------------------------------------------------------------------------
// Original space, 31 entries:
//   [0, 6)   top-2 probabilities per constraint slot (p1, p2)
//   [6, 14)  request probabilities
//   [14, 29) user-act probabilities (act type order)
//   29       turn / 30
//   30       min(db_count, 20) / 20

inline constexpr int kOriginalSize = 31;
inline constexpr int kTurnFeature = 29;
inline constexpr int kDbFeature = 30;
inline constexpr int kUserActOffset = 14;
inline constexpr double kTurnScale = 30.0;
inline constexpr int kDbCap = 20;

Features VectorizeOriginal(const BeliefState& belief);

// Ordered feature names; written into every corpus and checkpoint.
std::vector<std::string> SummaryLayout(const Ontology& ontology);
std::vector<std::string> OriginalLayout(const Ontology& ontology);

std::string DescribeBelief(const BeliefState& belief, const Ontology& ontology);

}  // namespace dialrl

#endif  // DIALRL_TRACKER_H_
