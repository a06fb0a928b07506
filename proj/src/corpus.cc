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

#include "dialrl/corpus.h"

#include <fstream>

#include "dialrl/errors.h"

namespace dialrl {

using nlohmann::json;

namespace {

constexpr double kMentioned = 1e-9;
constexpr double kNegateObserved = 0.5;

}  // namespace

std::string_view ToString(Provenance p) {
  switch (p) {
    case Provenance::kHandcrafted:
      return "handcrafted";
    case Provenance::kNoisyHandcrafted:
      return "noisy-handcrafted";
    case Provenance::kAgent:
      return "agent";
  }
  return "agent";
}

Provenance ParseProvenance(std::string_view name) {
  if (name == "handcrafted") return Provenance::kHandcrafted;
  if (name == "noisy-handcrafted") return Provenance::kNoisyHandcrafted;
  if (name == "agent") return Provenance::kAgent;
  throw ParseError("unknown provenance '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Handcrafted policy

RuleInput RuleInputFromBelief(const BeliefState& belief) {
  RuleInput in;
  for (int s = 0; s < 3; ++s) in.top[s] = Top2(belief, s).first;
  in.negate = belief.user_act[static_cast<int>(UserActType::kNegate)];
  return in;
}

RuleInput RuleInputFromOriginal(const Features& features) {
  if (features.size() != kOriginalSize) throw ShapeError("expected original-space features");
  RuleInput in;
  for (int s = 0; s < 3; ++s) in.top[s] = features(2 * s);
  in.negate = features(kUserActOffset + static_cast<int>(UserActType::kNegate));
  return in;
}

HandcraftedPolicy::HandcraftedPolicy(double confirm_threshold, double p_blunder)
    : threshold_(confirm_threshold), p_blunder_(p_blunder) {
  if (!(confirm_threshold > 0.0 && confirm_threshold <= 1.0)) throw ConfigError("handcrafted threshold outside (0,1]");
  if (!(p_blunder >= 0.0 && p_blunder <= 1.0)) throw ConfigError("p_blunder outside [0,1]");
}

void HandcraftedPolicy::BeginEpisode() {
  dont_care_.clear();
  last_request_ = -1;
  last_blunder_ = false;
}

RuleDecision HandcraftedPolicy::Decide(const RuleInput& in) {
  if (last_request_ >= 0 && in.negate >= kNegateObserved) dont_care_.insert(last_request_);
  last_request_ = -1;
  for (int s = 0; s < 3; ++s) {
    if (!dont_care_.count(s) && in.top[s] < kMentioned) {
      last_request_ = s;
      return {RuleKind::kRequest, s};
    }
  }
  for (int s = 0; s < 3; ++s) {
    if (!dont_care_.count(s) && in.top[s] < threshold_) return {RuleKind::kExplConf, s};
  }
  return {RuleKind::kOffer, -1};
}

int HandcraftedPolicy::ToAction(const RuleDecision& d, ActionSpace space) {
  namespace oa = original_action;
  if (space == ActionSpace::kSummary) {
    switch (d.kind) {
      case RuleKind::kRequest:
        return static_cast<int>(SystemActType::kRequest);
      case RuleKind::kExplConf:
        return static_cast<int>(SystemActType::kExplConf);
      case RuleKind::kOffer:
        return static_cast<int>(SystemActType::kOffer);
    }
  }
  switch (d.kind) {
    case RuleKind::kRequest:
      return oa::kRequestArea + d.slot;
    case RuleKind::kExplConf:
      return oa::kExplConfArea + d.slot;
    case RuleKind::kOffer:
      return oa::kOffer;
  }
  return oa::kOffer;
}

int HandcraftedPolicy::Act(const PolicyInput& input, Rng& rng) {
  const int rule = ToAction(Decide(RuleInputFromBelief(input.belief)), input.space);
  last_blunder_ = false;
  if (p_blunder_ > 0.0 && Bernoulli(rng, p_blunder_)) {
    const int a = UniformInt(rng, NumActions(input.space));
    if (a != rule) {
      last_blunder_ = true;
      namespace oa = original_action;
      const bool orig = input.space == ActionSpace::kOriginal;
      last_request_ = orig && a >= oa::kRequestArea && a <= oa::kRequestPricerange ? a - oa::kRequestArea : -1;
      return a;
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Generation and rating

void BlunderSchedule::Validate() const {
  if (!(clean_frac >= 0.0 && clean_frac <= 1.0)) throw ConfigError("corpus.schedule.clean_frac outside [0,1]");
  if (!(low >= 0.0 && low <= high && high <= 1.0)) throw ConfigError("corpus.schedule needs 0 <= low <= high <= 1");
}

double BlunderSchedule::Sample(Rng& rng) const {
  if (Bernoulli(rng, clean_frac)) return 0.0;
  return UniformReal(rng, low, high);
}

json ToJson(const BlunderSchedule& s) { return {{"clean_frac", s.clean_frac}, {"low", s.low}, {"high", s.high}}; }

BlunderSchedule BlunderScheduleFromJson(const json& j, BlunderSchedule s) {
  s.clean_frac = j.value("clean_frac", s.clean_frac);
  s.low = j.value("low", s.low);
  s.high = j.value("high", s.high);
  return s;
}

Corpus GenerateCorpus(DialogueEnv& env, HandcraftedPolicy& policy, int n, const BlunderSchedule& schedule,
                      uint64_t seed) {
  if (n <= 0) throw ConfigError("corpus size must be positive");
  schedule.Validate();
  Corpus corpus;
  corpus.space = env.config().space;
  corpus.layout = FeatureLayout(corpus.space, env.ontology());
  corpus.dialogues.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(i)));
    CorpusDialogue d;
    d.p_blunder = schedule.Sample(rng);
    policy.set_p_blunder(d.p_blunder);
    d.log = RunEpisode(env, policy, rng);
    d.rating = Rate(d.log);
    d.provenance = d.p_blunder > 0.0 ? Provenance::kNoisyHandcrafted : Provenance::kHandcrafted;
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

int CountBlunders(const EpisodeLog& log) {
  int n = 0;
  for (const auto& t : log.turns) n += t.blunder ? 1 : 0;
  return n;
}

int Rate(const EpisodeLog& log) {
  const int blunders = CountBlunders(log);
  if (log.success) {
    if (blunders == 0) return 3;
    return blunders <= 2 ? 2 : 1;
  }
  return 2 * log.grounded_constraints >= log.goal_constraints ? 1 : 0;
}

Corpus FilterExpert(const Corpus& corpus) {
  Corpus out;
  out.space = corpus.space;
  out.layout = corpus.layout;
  for (const auto& d : corpus.dialogues) {
    if (d.rating == 3) out.dialogues.push_back(d);
  }
  return out;
}

std::array<int, 4> RatingHistogram(const Corpus& corpus) {
  std::array<int, 4> h{};
  for (const auto& d : corpus.dialogues) ++h.at(static_cast<size_t>(d.rating));
  return h;
}

std::vector<SupervisedPair> ToSupervised(const Corpus& corpus, const std::vector<std::string>& layout) {
  CheckLayout(layout, corpus.layout, "corpus");
  std::vector<SupervisedPair> out;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.log.turns) {
      if (t.features.size() != static_cast<Eigen::Index>(layout.size())) {
        throw ShapeError("corpus turn has " + std::to_string(t.features.size()) + " features, layout has " +
                         std::to_string(layout.size()));
      }
      out.push_back({t.features, t.action});
    }
  }
  return out;
}

std::vector<Transition> ToTransitions(const Corpus& corpus, const std::vector<std::string>& layout) {
  CheckLayout(layout, corpus.layout, "corpus");
  std::vector<Transition> out;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.log.turns) {
      if (t.features.size() != static_cast<Eigen::Index>(layout.size()) ||
          t.next_features.size() != static_cast<Eigen::Index>(layout.size())) {
        throw ShapeError("corpus turn feature width differs from the layout");
      }
      out.push_back({t.features, t.action, t.reward, t.next_features, t.terminal});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

void SaveCorpus(const Corpus& corpus, std::ostream& out) {
  json header = {{"schema", "dialrl.corpus"},
                 {"version", 1},
                 {"space", std::string(ToString(corpus.space))},
                 {"feature_layout", corpus.layout},
                 {"dialogues", corpus.dialogues.size()}};
  out << header.dump() << '\n';
  for (size_t i = 0; i < corpus.dialogues.size(); ++i) {
    const auto& d = corpus.dialogues[i];
    json rec = DialogueRecord(d.log, static_cast<int>(i));
    rec["rating"] = d.rating;
    rec["provenance"] = std::string(ToString(d.provenance));
    rec["p_blunder"] = d.p_blunder;
    out << rec.dump() << '\n';
    for (const auto& t : d.log.turns) out << TurnRecordJson(t, static_cast<int>(i)).dump() << '\n';
  }
}

Corpus LoadCorpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("corpus file is empty");
  Corpus corpus;
  int line_no = 1;
  try {
    const json header = json::parse(line);
    if (header.value("schema", "") != "dialrl.corpus") throw ParseError("missing dialrl.corpus header");
    if (header.value("version", 0) != 1) throw ParseError("unsupported corpus version");
    corpus.space = ParseActionSpace(header.at("space").get<std::string>());
    corpus.layout = header.at("feature_layout").get<std::vector<std::string>>();
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      const std::string kind = rec.at("record").get<std::string>();
      if (kind == "dialogue") {
        CorpusDialogue d;
        ReadDialogueRecord(rec, d.log);
        d.rating = rec.at("rating").get<int>();
        if (d.rating < 0 || d.rating > 3) throw ParseError("rating outside 0..3");
        d.provenance = ParseProvenance(rec.at("provenance").get<std::string>());
        d.p_blunder = rec.at("p_blunder").get<double>();
        corpus.dialogues.push_back(std::move(d));
      } else if (kind == "turn") {
        if (corpus.dialogues.empty()) throw ParseError("turn record before any dialogue record");
        corpus.dialogues.back().log.turns.push_back(TurnRecordFromJson(rec));
      } else {
        throw ParseError("unknown record kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
  }
  for (const auto& d : corpus.dialogues) {
    if (static_cast<int>(d.log.turns.size()) != d.log.length) throw ParseError("dialogue length disagrees with its turns");
  }
  return corpus;
}

void SaveCorpusFile(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  SaveCorpus(corpus, out);
}

Corpus LoadCorpusFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus " + path);
  return LoadCorpus(in);
}

}  // namespace dialrl
