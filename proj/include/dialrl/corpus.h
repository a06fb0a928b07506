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

#ifndef DIALRL_CORPUS_H_
#define DIALRL_CORPUS_H_

#include <array>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "dialrl/agent.h"
#include "dialrl/environment.h"
#include "dialrl/rng.h"
#include "json.hpp"

namespace dialrl {

enum class Provenance { kHandcrafted, kNoisyHandcrafted, kAgent };

std::string_view ToString(Provenance p);
Provenance ParseProvenance(std::string_view name);

struct CorpusDialogue {
  EpisodeLog log;
  int rating = 0;
  Provenance provenance = Provenance::kHandcrafted;
  double p_blunder = 0.0;
};

struct Corpus {
  ActionSpace space = ActionSpace::kOriginal;
  std::vector<std::string> layout;
  std::vector<CorpusDialogue> dialogues;
};

// What the rule table looks at: the top value probability of each constraint
// slot and the negate probability of the last user turn.
struct RuleInput {
  std::array<double, 3> top{};
  double negate = 0.0;
};

RuleInput RuleInputFromBelief(const BeliefState& belief);
// Reads the same quantities from an original-space feature vector.
RuleInput RuleInputFromOriginal(const Features& features);

enum class RuleKind { kRequest, kExplConf, kOffer };

struct RuleDecision {
  RuleKind kind = RuleKind::kOffer;
  int slot = -1;
};

// Rule-based system: ask for every constraint slot in canonical order,
// explicitly confirm slots whose top value is below the threshold, then offer.
// Asking again after an accepted offer repeats it with the requested slots
// filled in. A slot the user negated right after being asked for it is
// treated as "don't care" for the rest of the dialogue.
class HandcraftedPolicy : public Policy, public BlunderReporting {
 public:
  explicit HandcraftedPolicy(double confirm_threshold = 0.7, double p_blunder = 0.0);

  void BeginEpisode() override;
  int Act(const PolicyInput& input, Rng& rng) override;
  bool last_was_blunder() const override { return last_blunder_; }

  // The rule table with the current dialogue memory; updates the memory.
  RuleDecision Decide(const RuleInput& input);
  static int ToAction(const RuleDecision& d, ActionSpace space);

  void set_p_blunder(double p) { p_blunder_ = p; }
  double p_blunder() const { return p_blunder_; }
  double confirm_threshold() const { return threshold_; }

 private:
  double threshold_;
  double p_blunder_;
  bool last_blunder_ = false;
  std::set<int> dont_care_;
  int last_request_ = -1;
};

// Per-dialogue blunder probability: 0 with probability clean_frac, otherwise
// uniform in [low, high].
struct BlunderSchedule {
  double clean_frac = 0.25;
  double low = 0.15;
  double high = 0.5;

  void Validate() const;
  double Sample(Rng& rng) const;
};

nlohmann::json ToJson(const BlunderSchedule& s);
BlunderSchedule BlunderScheduleFromJson(const nlohmann::json& j, BlunderSchedule base = {});

inline constexpr int kDefaultCorpusSize = 2118;

// Runs n dialogues, dialogue i on its own stream DeriveSeed(seed, i).
Corpus GenerateCorpus(DialogueEnv& env, HandcraftedPolicy& policy, int n, const BlunderSchedule& schedule,
                      uint64_t seed);

int CountBlunders(const EpisodeLog& log);

// 3: success without blunders; 2: success with at most two blunders;
// 1: any other success, or a failure with at least half of the goal
// constraints grounded; 0: otherwise.
int Rate(const EpisodeLog& log);

// Dialogues rated 3, in corpus order.
Corpus FilterExpert(const Corpus& corpus);
std::array<int, 4> RatingHistogram(const Corpus& corpus);

// One pair per system turn. Throws ShapeError when the corpus layout differs
// from `layout` or a turn has the wrong feature width.
std::vector<SupervisedPair> ToSupervised(const Corpus& corpus, const std::vector<std::string>& layout);
std::vector<Transition> ToTransitions(const Corpus& corpus, const std::vector<std::string>& layout);

// Episode-log format with a "dialrl.corpus" header and rating, provenance and
// p_blunder on every dialogue record.
void SaveCorpus(const Corpus& corpus, std::ostream& out);
Corpus LoadCorpus(std::istream& in);
void SaveCorpusFile(const Corpus& corpus, const std::string& path);
Corpus LoadCorpusFile(const std::string& path);

}  // namespace dialrl

#endif  // DIALRL_CORPUS_H_
